use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use equipart_core::inference::{
    bandwidth_schedule, replay_allocation, wiener_density, wiener_sample_paths, DirichletPosterior, ObservationStream,
    PathRecord, SpacetimeKDE, WienerSpec,
};
use equipart_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{as_refs, numbered, parse_rows};
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CategoricalArgs {
    /// Observation file, lines `category,t` with 0-based categories; omit to simulate
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Category probabilities used for simulation [default: 0.5,0.3,0.2]
    #[arg(long, value_delimiter = ',')]
    pub truth: Option<Vec<f64>>,
    /// Number of simulated observations [default: 10000]
    #[arg(long)]
    pub n_obs: Option<usize>,
    /// Time between simulated observations [default: 0.01]
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Symmetric Dirichlet prior concentration [default: 1]
    #[arg(long)]
    pub prior: Option<f64>,
    /// Total resource K [default: 1]
    #[arg(long)]
    pub budget: Option<f64>,
    /// Euler step of the allocation dynamics [default: 0.01]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Euler steps between observations [default: 1]
    #[arg(long)]
    pub steps_per_obs: Option<usize>,
    /// Initial allocation per category [default: K/m each]
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CategoricalConfig {
    pub observations: Option<PathBuf>,
    pub truth: Vec<f64>,
    pub n_obs: usize,
    pub spacing: f64,
    pub prior: f64,
    pub budget: f64,
    pub dt: f64,
    pub steps_per_obs: usize,
    pub init: Option<Vec<f64>>,
}

impl CategoricalArgs {
    pub fn resolve(self) -> CliResult<CategoricalConfig> {
        let truth = self.truth.unwrap_or_else(|| vec![0.5, 0.3, 0.2]);
        if truth.is_empty() || truth.iter().any(|p| !(*p >= 0.0)) || (truth.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("--truth must be non-negative probabilities summing to 1"));
        }
        Ok(CategoricalConfig {
            observations: self.observations,
            truth,
            n_obs: self.n_obs.unwrap_or(10_000),
            spacing: self.spacing.unwrap_or(0.01),
            prior: self.prior.unwrap_or(1.0),
            budget: self.budget.unwrap_or(1.0),
            dt: self.dt.unwrap_or(0.01),
            steps_per_obs: self.steps_per_obs.unwrap_or(1),
            init: self.init,
        })
    }
}

pub fn run_categorical(cfg: &CategoricalConfig, run: &mut Run) -> CliResult<()> {
    let mut stream = ObservationStream::new();
    let categories = match &cfg.observations {
        Some(path) => {
            let text = run.input(path)?;
            let rows = parse_rows(&text, path)?;
            let mut top = 0;
            for (i, row) in rows.iter().enumerate() {
                let (&c, &t) = match row.as_slice() {
                    [c, t, ..] => (c, t),
                    _ => return Err(invalid(format!("{}: observation {} needs `category,t`", path.display(), i + 1))),
                };
                if !(c >= 0.0 && c.fract() == 0.0) {
                    return Err(invalid(format!("{}: category {c} is not a non-negative integer", path.display())));
                }
                top = top.max(c as usize);
                stream.push(c as usize, t)?;
            }
            top + 1
        }
        None => {
            let mut r = rng::stream(run.seed, "cli/categorical", 0);
            for i in 0..cfg.n_obs {
                let u: f64 = r.random();
                let mut acc = 0.0;
                let mut c = cfg.truth.len() - 1;
                for (j, p) in cfg.truth.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        c = j;
                        break;
                    }
                }
                stream.push(c, (i + 1) as f64 * cfg.spacing)?;
            }
            cfg.truth.len()
        }
    };
    let prior = DirichletPosterior::symmetric(categories, cfg.prior)?;
    let init = cfg.init.clone().unwrap_or_else(|| vec![cfg.budget / categories as f64; categories]);
    let snaps = replay_allocation(&prior, &stream, &init, cfg.budget, cfg.dt, cfg.steps_per_obs)?;
    let mut header = vec!["t".to_string()];
    header.extend(numbered("p", categories));
    header.extend(numbered("s", categories));
    header.push("clamped".into());
    let rows: Vec<Vec<Cell>> = snaps
        .iter()
        .map(|s| {
            let mut row = vec![Cell::from(s.t)];
            row.extend(s.predictive.iter().chain(&s.allocation).map(|v| Cell::from(*v)));
            row.push(s.clamped.into());
            row
        })
        .collect();
    run.write_table("series", &as_refs(&header), &rows)?;
    let last = snaps.last().expect("replay starts with the prior");
    let z: f64 = last.predictive.iter().map(|p| p.sqrt()).sum();
    let optimum: Vec<f64> = last.predictive.iter().map(|p| cfg.budget * p.sqrt() / z).collect();
    run.write_json(
        "summary.json",
        &json!({
            "observations": stream.len(),
            "predictive": last.predictive.iter().map(|v| real_json(*v)).collect::<Vec<_>>(),
            "allocation": last.allocation.iter().map(|v| real_json(*v)).collect::<Vec<_>>(),
            "static_optimum": optimum.iter().map(|v| real_json(*v)).collect::<Vec<_>>(),
        }),
    )
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct KdeArgs {
    /// Sample file, lines `path_id,t,x`; omit to simulate Wiener paths
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Drift μ of the reference process [default: 0.5]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Volatility σ of the reference process [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Start x0 of the reference process [default: 0]
    #[arg(long)]
    pub x0: Option<f64>,
    /// Numbers of simulated paths, comma separated [default: 100,1000,10000]
    #[arg(long, value_delimiter = ',')]
    pub paths: Option<Vec<usize>>,
    /// Recording interval of simulated paths [default: 0.05]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon of simulated paths [default: 1]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// c in the bandwidth schedule h = c·N^(-1/3) [default: 0.5]
    #[arg(long)]
    pub bandwidth_scale: Option<f64>,
    /// Evaluation times, comma separated [default: 0.25,0.5,0.75,1]
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Lower end of the evaluation grid [default: -4]
    #[arg(long)]
    pub x_min: Option<f64>,
    /// Upper end of the evaluation grid [default: 6]
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Evaluation grid size [default: 200]
    #[arg(long)]
    pub x_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct KdeConfig {
    pub samples: Option<PathBuf>,
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
    pub paths: Vec<usize>,
    pub dt: f64,
    pub horizon: f64,
    pub bandwidth_scale: f64,
    pub times: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
}

impl KdeArgs {
    pub fn resolve(self) -> CliResult<KdeConfig> {
        let cfg = KdeConfig {
            samples: self.samples,
            mu: self.mu.unwrap_or(0.5),
            sigma: self.sigma.unwrap_or(1.0),
            x0: self.x0.unwrap_or(0.0),
            paths: self.paths.unwrap_or_else(|| vec![100, 1000, 10_000]),
            dt: self.dt.unwrap_or(0.05),
            horizon: self.horizon.unwrap_or(1.0),
            bandwidth_scale: self.bandwidth_scale.unwrap_or(0.5),
            times: self.times.unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0]),
            x_min: self.x_min.unwrap_or(-4.0),
            x_max: self.x_max.unwrap_or(6.0),
            x_points: self.x_points.unwrap_or(200),
        };
        if !(cfg.x_max > cfg.x_min) || cfg.x_points == 0 || cfg.times.is_empty() {
            return Err(invalid("evaluation grid needs x-max > x-min, x-points ≥ 1 and at least one time"));
        }
        if cfg.samples.is_none() && (cfg.paths.is_empty() || cfg.paths.contains(&0)) {
            return Err(invalid("--paths must list positive path counts"));
        }
        Ok(cfg)
    }
}

struct Estimate {
    n: usize,
    h: f64,
    l1: f64,
    grid: Vec<Vec<Cell>>,
}

fn estimate(cfg: &KdeConfig, spec: &WienerSpec, records: &[PathRecord], n: usize) -> CliResult<Estimate> {
    let h = bandwidth_schedule(n, cfg.bandwidth_scale)?;
    let kde = SpacetimeKDE::with_samples(h, records.iter().map(|r| (r.x, r.t)).collect())?;
    let dx = (cfg.x_max - cfg.x_min) / cfg.x_points as f64;
    let mut total = 0.0;
    let mut grid = Vec::new();
    for &t in &cfg.times {
        for i in 0..cfg.x_points {
            let x = cfg.x_min + (i as f64 + 0.5) * dx;
            let est = kde.eval_conditional(x, t)?;
            let exact = wiener_density(spec, x, t);
            total += (est - exact).abs() * dx;
            grid.push(vec![t.into(), x.into(), est.into(), exact.into()]);
        }
    }
    Ok(Estimate { n, h, l1: total / cfg.times.len() as f64, grid })
}

pub fn run_kde(cfg: &KdeConfig, run: &mut Run) -> CliResult<()> {
    let spec = WienerSpec::new(cfg.mu, cfg.sigma, cfg.x0)?;
    let mut estimates = Vec::new();
    let mut kept = Vec::new();
    match &cfg.samples {
        Some(path) => {
            let text = run.input(path)?;
            let mut records = Vec::new();
            for (i, row) in parse_rows(&text, path)?.into_iter().enumerate() {
                match row.as_slice() {
                    [id, t, x, ..] if *id >= 0.0 && id.fract() == 0.0 => {
                        records.push(PathRecord { path: *id as usize, t: *t, x: *x })
                    }
                    _ => return Err(invalid(format!("{}: sample {} needs `path_id,t,x`", path.display(), i + 1))),
                }
            }
            let n = records.iter().map(|r| r.path).collect::<BTreeSet<_>>().len();
            if n == 0 {
                return Err(invalid(format!("{}: no samples", path.display())));
            }
            estimates.push(estimate(cfg, &spec, &records, n)?);
        }
        None => {
            for (k, &n) in cfg.paths.iter().enumerate() {
                let records = wiener_sample_paths(&spec, n, cfg.dt, cfg.horizon, run.seed)?;
                estimates.push(estimate(cfg, &spec, &records, n)?);
                if k + 1 == cfg.paths.len() {
                    kept = records;
                }
            }
        }
    }
    let rows: Vec<Vec<Cell>> = estimates.iter().map(|e| vec![e.n.into(), e.h.into(), e.l1.into()]).collect();
    run.write_table("l1", &["paths", "bandwidth", "l1"], &rows)?;
    let last = estimates.last().expect("at least one estimate");
    run.write_table("density", &["t", "x", "kde", "exact"], &last.grid)?;
    if !kept.is_empty() {
        let rows: Vec<Vec<Cell>> = kept.iter().map(|r| vec![r.path.into(), r.t.into(), r.x.into()]).collect();
        run.write_table("paths", &["path_id", "t", "x"], &rows)?;
    }
    let monotone = estimates.windows(2).all(|w| w[1].l1 < w[0].l1);
    run.write_json("summary.json", &json!({ "l1_decreasing": monotone, "largest_n": last.n }))
}
