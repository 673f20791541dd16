//! `equipart`: batch runs of the allocation experiments with reproducible manifests.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commands::anneal::{AnnealArgs, AnnealRunConfig};
use commands::diffuse::{DiffuseArgs, DiffuseConfig};
use commands::dynamics::{DynamicsArgs, DynamicsConfig};
use commands::hot_lattice::{HotLatticeArgs, HotLatticeConfig};
use commands::infer::{CategoricalArgs, CategoricalConfig, KdeArgs, KdeConfig};
use commands::invert::{InvertArgs, InvertConfig};
use commands::kmedians::{KMediansArgs, KMediansConfig};
use commands::misspec::{MisspecArgs, MisspecConfig};
use commands::network::{NetworkArgs, NetworkConfig};
use commands::static_opt::{StaticArgs, StaticConfig};
use config::ConfigFile;
use error::{invalid, CliError, CliResult};
use output::{FileDigest, Format, Run};

const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "equipart", version, about = "Resource-allocation experiments: optima, dynamics, inference, networks")]
struct Cli {
    /// Master seed for every random stream [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: equipart-out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// TOML file with global keys and one table per subcommand; flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Table format [default: csv]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Static optimum of a budgeted variational problem on a grid
    Static(StaticArgs),
    /// Break placement on a lattice by greedy cost reduction
    HotLattice(HotLatticeArgs),
    /// Facility placement by k-medians and its scaling exponent
    Kmedians(KMediansArgs),
    /// Heat-flow transform of a density with transformed samples
    Diffuse(DiffuseArgs),
    /// Rank candidate densities against an observed response
    Invert(InvertArgs),
    /// Hamiltonian, damped or overdamped allocation dynamics
    Dynamics(DynamicsArgs),
    /// Cost of planning against the wrong density
    Misspec(MisspecArgs),
    /// Allocation tracking a categorical posterior predictive
    InferCategorical(CategoricalArgs),
    /// Space-time kernel density estimate of a drifting process
    InferKde(KdeArgs),
    /// Allocation of resource over graph edges or nodes
    Network(NetworkArgs),
    /// Simulated annealing on a test or network problem
    Anneal(AnnealArgs),
    /// Re-run a manifest and compare output digests
    Replay {
        /// manifest.json of an earlier run
        manifest: PathBuf,
    },
}

/// A subcommand with every option filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "config", rename_all = "kebab-case")]
enum Resolved {
    Static(StaticConfig),
    HotLattice(HotLatticeConfig),
    Kmedians(KMediansConfig),
    Diffuse(DiffuseConfig),
    Invert(InvertConfig),
    Dynamics(DynamicsConfig),
    Misspec(MisspecConfig),
    InferCategorical(CategoricalConfig),
    InferKde(KdeConfig),
    Network(NetworkConfig),
    Anneal(AnnealRunConfig),
}

impl Resolved {
    fn execute(&self, run: &mut Run) -> CliResult<()> {
        match self {
            Resolved::Static(c) => commands::static_opt::run(c, run),
            Resolved::HotLattice(c) => commands::hot_lattice::run(c, run),
            Resolved::Kmedians(c) => commands::kmedians::run(c, run),
            Resolved::Diffuse(c) => commands::diffuse::run(c, run),
            Resolved::Invert(c) => commands::invert::run(c, run),
            Resolved::Dynamics(c) => commands::dynamics::run(c, run),
            Resolved::Misspec(c) => commands::misspec::run(c, run),
            Resolved::InferCategorical(c) => commands::infer::run_categorical(c, run),
            Resolved::InferKde(c) => commands::infer::run_kde(c, run),
            Resolved::Network(c) => commands::network::run(c, run),
            Resolved::Anneal(c) => commands::anneal::run(c, run),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    artifact_version: String,
    #[serde(flatten)]
    resolved: Resolved,
    seed: u64,
    format: Format,
    threads: Option<usize>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    wall_time_seconds: f64,
}

fn resolve(command: Command, file: &ConfigFile) -> CliResult<Resolved> {
    Ok(match command {
        Command::Static(a) => Resolved::Static(file.layer("static", &a)?.resolve()?),
        Command::HotLattice(a) => Resolved::HotLattice(file.layer("hot-lattice", &a)?.resolve()?),
        Command::Kmedians(a) => Resolved::Kmedians(file.layer("kmedians", &a)?.resolve()?),
        Command::Diffuse(a) => Resolved::Diffuse(file.layer("diffuse", &a)?.resolve()?),
        Command::Invert(a) => Resolved::Invert(file.layer("invert", &a)?.resolve()?),
        Command::Dynamics(a) => Resolved::Dynamics(file.layer("dynamics", &a)?.resolve()?),
        Command::Misspec(a) => Resolved::Misspec(file.layer("misspec", &a)?.resolve()?),
        Command::InferCategorical(a) => Resolved::InferCategorical(file.layer("infer-categorical", &a)?.resolve()?),
        Command::InferKde(a) => Resolved::InferKde(file.layer("infer-kde", &a)?.resolve()?),
        Command::Network(a) => Resolved::Network(file.layer("network", &a)?.resolve()?),
        Command::Anneal(a) => Resolved::Anneal(file.layer("anneal", &a)?.resolve()?),
        Command::Replay { .. } => unreachable!("replay is dispatched before resolution"),
    })
}

fn set_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs one resolved pipeline and writes its manifest.
fn execute(
    resolved: Resolved,
    out_dir: PathBuf,
    format: Format,
    seed: u64,
    threads: Option<usize>,
) -> CliResult<Manifest> {
    let started = Instant::now();
    let mut run = Run::new(out_dir, format, seed)?;
    resolved.execute(&mut run)?;
    let manifest = Manifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        resolved,
        seed,
        format,
        threads,
        inputs: std::mem::take(&mut run.inputs),
        outputs: std::mem::take(&mut run.outputs),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = run.out_dir().join(MANIFEST);
    std::fs::write(&path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
    Ok(manifest)
}

fn replay(path: &Path, cli_out: Option<PathBuf>, cli_threads: Option<usize>) -> CliResult<()> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("manifest {}: {e}", path.display())))?;
    let old: Manifest =
        serde_json::from_str(&text).map_err(|e| invalid(format!("manifest {}: {e}", path.display())))?;
    let out_dir = cli_out.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).join("replay"));
    let threads = cli_threads.or(old.threads);
    set_threads(threads)?;
    let new = execute(old.resolved, out_dir, old.format, old.seed, threads)?;
    if new.inputs != old.inputs {
        return Err(invalid("replay: input files differ from the manifest's digests"));
    }
    if new.outputs != old.outputs {
        let mut diverged: Vec<&str> =
            new.outputs.iter().filter(|f| !old.outputs.contains(f)).map(|f| f.path.as_str()).collect();
        diverged.extend(
            old.outputs.iter().filter(|f| !new.outputs.iter().any(|g| g.path == f.path)).map(|f| f.path.as_str()),
        );
        return Err(CliError::Numerical(format!("replay diverged in {}", diverged.join(", "))));
    }
    println!("replay of {} reproduced {} outputs", path.display(), new.outputs.len());
    Ok(())
}

fn main_inner(cli: Cli) -> CliResult<()> {
    if let Command::Replay { manifest } = cli.command {
        if cli.config.is_some() || cli.seed.is_some() || cli.format.is_some() {
            return Err(invalid("replay takes its seed, format and config from the manifest"));
        }
        return replay(&manifest, cli.out_dir, cli.threads);
    }
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
            ConfigFile::parse(&text, &path.display().to_string())?
        }
        None => ConfigFile::default(),
    };
    let seed = cli.seed.or(file.global("seed")?).unwrap_or(0);
    let out_dir = cli.out_dir.or(file.global("out-dir")?).unwrap_or_else(|| PathBuf::from("equipart-out"));
    let format = cli.format.or(file.global("format")?).unwrap_or(Format::Csv);
    let threads = cli.threads.or(file.global("threads")?);
    set_threads(threads)?;
    let resolved = resolve(cli.command, &file)?;
    let manifest = execute(resolved, out_dir.clone(), format, seed, threads)?;
    println!("wrote {} files and {} to {}", manifest.outputs.len(), MANIFEST, out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
