use std::path::PathBuf;

use clap::Args;
use equipart_core::diffusion::{cosine_expand, diffusion_time, heat_evolve, transform_points};
use equipart_core::domain::sample_density;
use equipart_core::stats::chi_square_uniform_pvalue;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{as_refs, load_density, numbered, required};
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DiffuseArgs {
    /// Density on a single box
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// Diffusion horizon [default: half the squared longest side]
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Number of density snapshots after t = 0 [default: 4]
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// Cosine modes per axis [default: lattice resolution]
    #[arg(long)]
    pub modes: Option<usize>,
    /// Points sampled from the density and transported [default: 1000]
    #[arg(long)]
    pub points: Option<usize>,
    /// RK4 steps for the point transport [default: 80]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Bins per axis for the uniformity test of the transported points [default: 10]
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DiffuseConfig {
    pub density: PathBuf,
    pub t_final: Option<f64>,
    pub snapshots: usize,
    pub modes: Option<usize>,
    pub points: usize,
    pub steps: usize,
    pub bins: usize,
}

impl DiffuseArgs {
    pub fn resolve(self) -> CliResult<DiffuseConfig> {
        let cfg = DiffuseConfig {
            density: required(self.density, "density")?,
            t_final: self.t_final,
            snapshots: self.snapshots.unwrap_or(4),
            modes: self.modes,
            points: self.points.unwrap_or(1000),
            steps: self.steps.unwrap_or(80),
            bins: self.bins.unwrap_or(10),
        };
        if cfg.snapshots == 0 || cfg.bins == 0 {
            return Err(invalid("--snapshots and --bins must be positive"));
        }
        Ok(cfg)
    }
}

pub fn run(cfg: &DiffuseConfig, run: &mut Run) -> CliResult<()> {
    let p = load_density(run, &cfg.density)?;
    let (bounds, res) = match (p.field().domain().boxes(), p.field().resolution()) {
        ([b], [r]) => (b.clone(), r.clone()),
        _ => return Err(invalid("diffuse needs a density on a single box")),
    };
    let t_final = cfg.t_final.unwrap_or_else(|| diffusion_time(&bounds));
    let modes = cfg.modes.unwrap_or_else(|| res.iter().copied().min().unwrap_or(1));
    let expansion = cosine_expand(&p, modes)?;
    let mut times = Vec::new();
    for k in 0..=cfg.snapshots {
        let t = t_final * k as f64 / cfg.snapshots as f64;
        let q = heat_evolve(&expansion, t)?;
        run.write_field(&format!("density_{k:03}.csv"), q.field())?;
        times.push(vec![Cell::from(k), Cell::from(t)]);
    }
    run.write_table("snapshots", &["snapshot", "t"], &times)?;

    let dims = bounds.dims();
    let start = if cfg.points > 0 { sample_density(&p, cfg.points, run.seed)? } else { Vec::new() };
    let moved = transform_points(&p, &start, t_final, cfg.steps)?;
    let mut header = vec!["point".to_string()];
    header.extend(numbered("x", dims));
    header.extend(numbered("y", dims));
    let rows: Vec<Vec<Cell>> = start
        .iter()
        .zip(&moved)
        .enumerate()
        .map(|(i, (a, b))| std::iter::once(Cell::from(i)).chain(a.iter().chain(b).map(|v| Cell::from(*v))).collect())
        .collect();
    run.write_table("points", &as_refs(&header), &rows)?;

    let pvalue = if moved.is_empty() {
        None
    } else {
        let mut counts = vec![0usize; cfg.bins.pow(dims as u32)];
        for x in &moved {
            let mut flat = 0;
            for (j, v) in x.iter().enumerate() {
                let b = (((v - bounds.lower[j]) / bounds.extent(j)) * cfg.bins as f64) as usize;
                flat = flat * cfg.bins + b.min(cfg.bins - 1);
            }
            counts[flat] += 1;
        }
        Some(chi_square_uniform_pvalue(&counts))
    };
    run.write_json(
        "summary.json",
        &json!({ "t_final": real_json(t_final), "modes": modes, "uniformity_pvalue": pvalue.map(real_json) }),
    )
}
