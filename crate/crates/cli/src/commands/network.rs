use std::path::PathBuf;

use clap::Args;
use equipart_core::annealer::{anneal, AnnealConfig, RealSpace, Schedule, StateSpace};
use equipart_core::network::{
    barabasi_albert, degree_approx, erdos_renyi, hot_node_fixed_point, hot_node_objective, incident_sums,
    neighborhood_action, neighborhood_optimum, parse_edge_list, path_counts, random_feasible_allocation, subgraph_loss,
    FixedPointOptions, NodeDensity, UGraph,
};
use equipart_core::rng;
use equipart_core::stats::linear_fit;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::parse_rows;
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct NetworkArgs {
    /// Edge list with 1-based `u v` lines
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Generated graph instead of --edges: `ba:<n>:<m>` or `er:<n>:<p>`
    #[arg(long)]
    pub graph: Option<String>,
    /// Node probabilities, one per line, or `uniform` / `random` [default: uniform]
    #[arg(long)]
    pub density: Option<String>,
    /// Total resource K [default: 1]
    #[arg(long)]
    pub budget: Option<f64>,
    /// analytic, degree, anneal, fixed-point, subgraph or random [default: analytic]
    #[arg(long)]
    pub mode: Option<String>,
    /// Per-node exponent γ for fixed-point mode [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Damping d for fixed-point mode [default: 0.5]
    #[arg(long)]
    pub damping: Option<f64>,
    /// Convergence tolerance for fixed-point mode [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap for anneal mode [default: 200000]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Source node (1-based) whose path counts are written in subgraph mode
    #[arg(long)]
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct NetworkConfig {
    pub edges: Option<PathBuf>,
    pub graph: Option<String>,
    pub density: String,
    pub budget: f64,
    pub mode: String,
    pub gamma: f64,
    pub damping: f64,
    pub tol: f64,
    pub iters: usize,
    pub source: Option<usize>,
}

const MODES: [&str; 6] = ["analytic", "degree", "anneal", "fixed-point", "subgraph", "random"];

impl NetworkArgs {
    pub fn resolve(self) -> CliResult<NetworkConfig> {
        if self.edges.is_some() == self.graph.is_some() {
            return Err(invalid("exactly one of --edges and --graph is required"));
        }
        let mode = self.mode.unwrap_or_else(|| "analytic".into());
        if !MODES.contains(&mode.as_str()) {
            return Err(invalid(format!("--mode `{mode}`: expected one of {}", MODES.join(", "))));
        }
        let budget = self.budget.unwrap_or(1.0);
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(invalid("--budget must be positive"));
        }
        if self.source == Some(0) {
            return Err(invalid("--source is 1-based"));
        }
        Ok(NetworkConfig {
            edges: self.edges,
            graph: self.graph,
            density: self.density.unwrap_or_else(|| "uniform".into()),
            budget,
            mode,
            gamma: self.gamma.unwrap_or(1.0),
            damping: self.damping.unwrap_or(0.5),
            tol: self.tol.unwrap_or(1e-10),
            iters: self.iters.unwrap_or(200_000),
            source: self.source,
        })
    }
}

/// Graph from an edge-list file or a `ba:n:m` / `er:n:p` generator.
pub fn load_graph(run: &mut Run, edges: Option<&PathBuf>, generator: Option<&str>) -> CliResult<UGraph> {
    if let Some(path) = edges {
        let text = run.input(path)?;
        return parse_edge_list(&text).map_err(|e| invalid(format!("{}: {e}", path.display())));
    }
    let spec = generator.ok_or_else(|| invalid("no graph given"))?;
    let bad = || invalid(format!("graph `{spec}`: expected ba:<n>:<m> or er:<n>:<p>"));
    let parts: Vec<&str> = spec.split(':').collect();
    let seed = run.seed;
    match parts.as_slice() {
        ["ba", n, m] => Ok(barabasi_albert(n.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?, seed)?),
        ["er", n, p] => Ok(erdos_renyi(n.parse().map_err(|_| bad())?, p.parse().map_err(|_| bad())?, seed)?),
        _ => Err(bad()),
    }
}

/// `uniform`, `random` (i.i.d. uniform weights, normalized) or a file of weights.
pub fn load_node_density(run: &mut Run, spec: &str, n: usize) -> CliResult<NodeDensity> {
    match spec {
        "uniform" => Ok(NodeDensity::uniform(n)),
        "random" => {
            let mut r = rng::stream(run.seed, "cli/node_density", 0);
            Ok(NodeDensity::normalized((0..n).map(|_| r.random::<f64>()).collect())?)
        }
        path => {
            let path = PathBuf::from(path);
            let text = run.input(&path)?;
            let w: Vec<f64> = parse_rows(&text, &path)?.into_iter().flatten().collect();
            if w.len() != n {
                return Err(invalid(format!("{}: {} values for {n} nodes", path.display(), w.len())));
            }
            NodeDensity::normalized(w).map_err(|e| invalid(format!("{}: {e}", path.display())))
        }
    }
}

fn edge_rows(g: &UGraph, s: &[f64]) -> Vec<Vec<Cell>> {
    g.edges().iter().zip(s).map(|(&(u, v), x)| vec![(u + 1).into(), (v + 1).into(), (*x).into()]).collect()
}

/// Edge action with the raw state rescaled onto the budget.
pub fn scaled_action(g: &UGraph, p: &NodeDensity, budget: f64, x: &[f64]) -> f64 {
    let z: f64 = x.iter().sum();
    let s: Vec<f64> = x.iter().map(|v| budget * v / z).collect();
    neighborhood_action(g, p, &s).unwrap_or(f64::NAN)
}

pub fn run(cfg: &NetworkConfig, run: &mut Run) -> CliResult<()> {
    let g = load_graph(run, cfg.edges.as_ref(), cfg.graph.as_deref())?;
    if g.edge_count() == 0 {
        return Err(invalid("graph has no edges"));
    }
    let p = load_node_density(run, &cfg.density, g.node_count())?;
    let k = cfg.budget;
    let mut summary = json!({
        "mode": cfg.mode,
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "budget": real_json(k),
    });
    match cfg.mode.as_str() {
        "analytic" | "random" | "anneal" => {
            let optimum = neighborhood_optimum(&g, &p, k)?;
            let best = neighborhood_action(&g, &p, &optimum.values)?;
            let s = match cfg.mode.as_str() {
                "analytic" => optimum.values.clone(),
                "random" => random_feasible_allocation(&g, k, &mut rng::stream(run.seed, "cli/random_allocation", 0)),
                _ => {
                    let m = g.edge_count();
                    let space = RealSpace {
                        energy: |x: &[f64]| scaled_action(&g, &p, k, x),
                        bounds: Some((vec![1.0; m], vec![f64::INFINITY; m])),
                    };
                    let config = AnnealConfig {
                        schedule: Schedule::Geometric { ratio: 1.0003 },
                        beta_max: 1e9,
                        tau: 20_000,
                        max_iters: cfg.iters,
                        n_max: 2,
                        seed: run.seed,
                        ..Default::default()
                    };
                    let (x, history) = anneal(&space, &config, vec![1.0; m])?;
                    summary["iterations"] = history.records.len().into();
                    summary["annealed_energy"] = real_json(space.energy(&x));
                    let z: f64 = x.iter().sum();
                    x.iter().map(|v| k * v / z).collect()
                }
            };
            let action = neighborhood_action(&g, &p, &s)?;
            summary["action"] = real_json(action);
            summary["optimal_action"] = real_json(best);
            summary["relative_gap"] = real_json((action - best) / best);
            run.write_table("allocation", &["u", "v", "S"], &edge_rows(&g, &s))?;
        }
        "degree" => {
            let optimum = neighborhood_optimum(&g, &p, k)?;
            let incident = incident_sums(&g, &optimum.values);
            let approx = degree_approx(&g, k)?;
            let rows: Vec<Vec<Cell>> = (0..g.node_count())
                .map(|i| vec![(i + 1).into(), g.degree(i).into(), incident[i].into(), approx[i].into()])
                .collect();
            run.write_table("nodes", &["node", "degree", "incident", "degree_approx"], &rows)?;
            if let Some(fit) = linear_fit(&approx, &incident) {
                summary["fit"] = json!({
                    "slope": real_json(fit.slope),
                    "intercept": real_json(fit.intercept),
                    "r_squared": real_json(fit.r_squared),
                });
            }
            run.write_table("allocation", &["u", "v", "S"], &edge_rows(&g, &optimum.values))?;
        }
        "fixed-point" => {
            let pv = p.values();
            let w: Vec<f64> = g.edges().iter().map(|&(u, v)| pv[u] + pv[v]).collect();
            let z: f64 = w.iter().sum();
            if !(z > 0.0) {
                return Err(invalid("node density puts no mass on any edge"));
            }
            let joint: Vec<f64> = w.iter().map(|x| x / z).collect();
            let gamma = vec![cfg.gamma; g.node_count()];
            let opts = FixedPointOptions { damping: cfg.damping, tol: cfg.tol, ..Default::default() };
            let fp = hot_node_fixed_point(&g, &joint, &gamma, k, opts)?;
            let rows: Vec<Vec<Cell>> =
                fp.s.iter().enumerate().map(|(i, s)| vec![(i + 1).into(), (*s).into()]).collect();
            run.write_table("nodes", &["node", "S"], &rows)?;
            summary["sweeps"] = fp.sweeps.into();
            summary["residual"] = real_json(fp.residual);
            summary["objective"] = real_json(hot_node_objective(&g, &joint, &gamma, &fp.s));
        }
        _ => {
            let optimum = neighborhood_optimum(&g, &p, k)?;
            let losses: Vec<f64> = (0..g.node_count())
                .into_par_iter()
                .map(|i| subgraph_loss(&g, &optimum.values, i))
                .collect::<Result<_, _>>()?;
            let rows: Vec<Vec<Cell>> =
                losses.iter().enumerate().map(|(i, l)| vec![(i + 1).into(), (*l).into()]).collect();
            run.write_table("subgraph_loss", &["node", "loss"], &rows)?;
            if let Some(source) = cfg.source {
                let uses = path_counts(&g, source - 1)?;
                let rows: Vec<Vec<Cell>> = uses
                    .iter()
                    .map(|u| vec![(u.from + 1).into(), (u.to + 1).into(), u.depth.into(), u.count.into()])
                    .collect();
                run.write_table("path_counts", &["from", "to", "depth", "count"], &rows)?;
            }
            let pv = p.values();
            summary["expected_loss"] = real_json(losses.iter().zip(pv).map(|(l, q)| l * q).sum());
        }
    }
    run.write_json("summary.json", &summary)
}
