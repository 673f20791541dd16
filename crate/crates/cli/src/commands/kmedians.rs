use std::path::PathBuf;

use clap::Args;
use equipart_core::domain::AxisBox;
use equipart_core::rng;
use equipart_core::static_solver::{kmedians_em, voronoi_scaling_exponent};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{as_refs, numbered, parse_rows};
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct KMediansArgs {
    /// Point file, one point per line; omit to sample a truncated quarter-plane Gaussian
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Number of generated points [default: 5000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Gaussian width of generated points [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Truncation edge: generated points lie in [0, limit)^2 [default: 3]
    #[arg(long)]
    pub limit: Option<f64>,
    /// Number of facilities [default: 50]
    #[arg(long)]
    pub k: Option<usize>,
    /// EM iteration cap [default: 500]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Grid points per axis for the Voronoi area estimate [default: 400]
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct KMediansConfig {
    pub points: Option<PathBuf>,
    pub n: usize,
    pub sigma: f64,
    pub limit: f64,
    pub k: usize,
    pub iters: usize,
    pub resolution: usize,
}

impl KMediansArgs {
    pub fn resolve(self) -> CliResult<KMediansConfig> {
        let cfg = KMediansConfig {
            points: self.points,
            n: self.n.unwrap_or(5000),
            sigma: self.sigma.unwrap_or(1.0),
            limit: self.limit.unwrap_or(3.0),
            k: self.k.unwrap_or(50),
            iters: self.iters.unwrap_or(500),
            resolution: self.resolution.unwrap_or(400),
        };
        if !(cfg.sigma > 0.0 && cfg.limit > 0.0) {
            return Err(invalid("--sigma and --limit must be positive"));
        }
        Ok(cfg)
    }
}

fn truncated_gaussian(cfg: &KMediansConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, "cli/kmedians_points", 0);
    let mut points = Vec::with_capacity(cfg.n);
    while points.len() < cfg.n {
        let x: f64 = StandardNormal.sample(&mut r);
        let y: f64 = StandardNormal.sample(&mut r);
        let (x, y) = ((x * cfg.sigma).abs(), (y * cfg.sigma).abs());
        if x < cfg.limit && y < cfg.limit {
            points.push(vec![x, y]);
        }
    }
    points
}

pub fn run(cfg: &KMediansConfig, run: &mut Run) -> CliResult<()> {
    let points = match &cfg.points {
        Some(path) => {
            let text = run.input(path)?;
            parse_rows(&text, path)?
        }
        None => truncated_gaussian(cfg, run.seed),
    };
    if points.is_empty() {
        return Err(invalid("no points"));
    }
    let fit = kmedians_em(&points, cfg.k, run.seed, cfg.iters)?;
    let dims = points[0].len();
    let mut header = vec!["facility".to_string()];
    header.extend(numbered("x", dims));
    let rows: Vec<Vec<Cell>> = fit
        .facilities
        .iter()
        .enumerate()
        .map(|(j, f)| std::iter::once(Cell::from(j)).chain(f.iter().map(|v| Cell::from(*v))).collect())
        .collect();
    run.write_table("facilities", &as_refs(&header), &rows)?;
    let trace: Vec<Vec<Cell>> =
        fit.objective_trace.iter().enumerate().map(|(i, v)| vec![i.into(), (*v).into()]).collect();
    run.write_table("objective", &["iteration", "objective"], &trace)?;
    // the density is only known for generated points
    let exponent = if cfg.points.is_none() {
        let bounds = AxisBox::new(vec![0.0, 0.0], vec![cfg.limit, cfg.limit])?;
        let s2 = 2.0 * cfg.sigma * cfg.sigma;
        Some(voronoi_scaling_exponent(
            &fit.facilities,
            &bounds,
            |x| (-(x[0] * x[0] + x[1] * x[1]) / s2).exp(),
            cfg.resolution,
        )?)
    } else {
        None
    };
    run.write_json(
        "summary.json",
        &json!({
            "objective": real_json(fit.objective()),
            "iterations": fit.objective_trace.len() - 1,
            "scaling_exponent": exponent.map(real_json),
        }),
    )
}
