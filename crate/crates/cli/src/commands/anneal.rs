use std::path::PathBuf;

use clap::Args;
use equipart_core::annealer::{
    anneal_restarts, AnnealConfig, AnnealHistory, RealSpace, Ring, RingSpace, Schedule, StateSpace,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::network::{load_graph, load_node_density, scaled_action};
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AnnealArgs {
    /// quadratic-test, binary-test or network-neighborhood [default: quadratic-test]
    #[arg(long)]
    pub problem: Option<String>,
    /// State dimension of the test problems [default: 4 quadratic, 16 binary]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Edge list for network-neighborhood
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Generated graph for network-neighborhood: `ba:<n>:<m>` or `er:<n>:<p>` [default: ba:50:2]
    #[arg(long)]
    pub graph: Option<String>,
    /// Node probabilities for network-neighborhood: file, `uniform` or `random` [default: random]
    #[arg(long)]
    pub density: Option<String>,
    /// Total resource for network-neighborhood [default: 1]
    #[arg(long)]
    pub budget: Option<f64>,
    /// Initial inverse temperature β0 [default: 0.1]
    #[arg(long)]
    pub beta0: Option<f64>,
    /// geometric or linear [default: geometric]
    #[arg(long)]
    pub schedule: Option<String>,
    /// Ratio (geometric) or increment (linear) of the schedule [default: 1.003 or 0.1]
    #[arg(long)]
    pub rate: Option<f64>,
    /// Stop once β reaches this [default: 1e6]
    #[arg(long)]
    pub beta_max: Option<f64>,
    /// Stop once |E − E_{t−τ}| ≤ ε [default: 0]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Delay τ of the stall test [default: 1000]
    #[arg(long)]
    pub tau: Option<usize>,
    /// Iteration cap [default: 100000]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Most elements touched per proposal [default: 1]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Independent chains [default: 1]
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AnnealRunConfig {
    pub problem: String,
    pub dim: usize,
    pub edges: Option<PathBuf>,
    pub graph: Option<String>,
    pub density: String,
    pub budget: f64,
    pub beta0: f64,
    pub schedule: String,
    pub rate: f64,
    pub beta_max: f64,
    pub epsilon: f64,
    pub tau: usize,
    pub max_iters: usize,
    pub n_max: usize,
    pub restarts: usize,
}

impl AnnealArgs {
    pub fn resolve(self) -> CliResult<AnnealRunConfig> {
        let problem = self.problem.unwrap_or_else(|| "quadratic-test".into());
        let dim = match problem.as_str() {
            "quadratic-test" => self.dim.unwrap_or(4),
            "binary-test" => self.dim.unwrap_or(16),
            "network-neighborhood" => 0,
            _ => {
                return Err(invalid(format!(
                    "--problem `{problem}`: expected quadratic-test, binary-test or network-neighborhood"
                )))
            }
        };
        if dim == 0 && problem != "network-neighborhood" {
            return Err(invalid("--dim must be at least 1"));
        }
        if self.edges.is_some() && self.graph.is_some() {
            return Err(invalid("--edges and --graph are exclusive"));
        }
        let schedule = self.schedule.unwrap_or_else(|| "geometric".into());
        let rate = match schedule.as_str() {
            "geometric" => self.rate.unwrap_or(1.003),
            "linear" => self.rate.unwrap_or(0.1),
            _ => return Err(invalid(format!("--schedule `{schedule}`: expected geometric or linear"))),
        };
        let defaults = AnnealConfig::default();
        let graph = match (&self.edges, self.graph) {
            (None, None) if problem == "network-neighborhood" => Some("ba:50:2".to_string()),
            (_, g) => g,
        };
        Ok(AnnealRunConfig {
            problem,
            dim,
            edges: self.edges,
            graph,
            density: self.density.unwrap_or_else(|| "random".into()),
            budget: self.budget.unwrap_or(1.0),
            beta0: self.beta0.unwrap_or(defaults.beta0),
            schedule,
            rate,
            beta_max: self.beta_max.unwrap_or(defaults.beta_max),
            epsilon: self.epsilon.unwrap_or(defaults.epsilon),
            tau: self.tau.unwrap_or(defaults.tau),
            max_iters: self.max_iters.unwrap_or(defaults.max_iters),
            n_max: self.n_max.unwrap_or(defaults.n_max),
            restarts: self.restarts.unwrap_or(1),
        })
    }
}

fn write_history(run: &mut Run, histories: &[AnnealHistory]) -> CliResult<()> {
    let rows: Vec<Vec<Cell>> = histories
        .iter()
        .enumerate()
        .flat_map(|(r, h)| {
            h.records.iter().map(move |x| {
                vec![r.into(), x.iter.into(), x.energy.into(), x.best.into(), x.beta.into(), x.accepted.into()]
            })
        })
        .collect();
    run.write_table("history", &["restart", "iter", "energy", "energy_best", "beta", "accepted"], &rows)
}

fn finish<S>(
    run: &mut Run,
    space: &S,
    config: &AnnealConfig,
    x0: S::State,
    restarts: usize,
    cells: impl Fn(&S::State) -> Vec<Cell>,
) -> CliResult<()>
where
    S: StateSpace + Sync,
    S::State: Send + Sync,
{
    let (x, histories) = anneal_restarts(space, config, x0, restarts)?;
    write_history(run, &histories)?;
    let rows: Vec<Vec<Cell>> = cells(&x).into_iter().enumerate().map(|(i, c)| vec![(i + 1).into(), c]).collect();
    run.write_table("best", &["index", "value"], &rows)?;
    let iterations: Vec<usize> = histories.iter().map(|h| h.records.len()).collect();
    run.write_json("summary.json", &json!({ "best_energy": real_json(space.energy(&x)), "iterations": iterations }))
}

pub fn run(cfg: &AnnealRunConfig, run: &mut Run) -> CliResult<()> {
    let config = AnnealConfig {
        beta0: cfg.beta0,
        schedule: if cfg.schedule == "linear" {
            Schedule::Linear { increment: cfg.rate }
        } else {
            Schedule::Geometric { ratio: cfg.rate }
        },
        beta_max: cfg.beta_max,
        epsilon: cfg.epsilon,
        tau: cfg.tau,
        max_iters: cfg.max_iters,
        n_max: cfg.n_max,
        seed: run.seed,
    };
    config.validate()?;
    let reals = |x: &Vec<f64>| x.iter().map(|v| Cell::from(*v)).collect();
    match cfg.problem.as_str() {
        "quadratic-test" => {
            let space = RealSpace {
                energy: |x: &[f64]| x.iter().enumerate().map(|(i, v)| (v - (i + 1) as f64).powi(2)).sum(),
                bounds: None,
            };
            finish(run, &space, &config, vec![0.0; cfg.dim], cfg.restarts, reals)
        }
        "binary-test" => {
            let space = RingSpace { energy: |x: &[i64]| x.iter().sum::<i64>() as f64, ring: Ring::Binary };
            finish(run, &space, &config, vec![1; cfg.dim], cfg.restarts, |x: &Vec<i64>| {
                x.iter().map(|v| Cell::from(*v)).collect()
            })
        }
        _ => {
            let g = load_graph(run, cfg.edges.as_ref(), cfg.graph.as_deref())?;
            if g.edge_count() == 0 {
                return Err(invalid("graph has no edges"));
            }
            let p = load_node_density(run, &cfg.density, g.node_count())?;
            let m = g.edge_count();
            let space = RealSpace {
                energy: |x: &[f64]| scaled_action(&g, &p, cfg.budget, x),
                bounds: Some((vec![1.0; m], vec![f64::INFINITY; m])),
            };
            finish(run, &space, &config, vec![1.0; m], cfg.restarts, |x: &Vec<f64>| {
                let z: f64 = x.iter().sum();
                x.iter().map(|v| Cell::from(cfg.budget * v / z)).collect()
            })
        }
    }
}
