use std::path::PathBuf;

use clap::Args;
use equipart_core::domain::{LossFamily, VariationalProblem};
use equipart_core::misspec::{gaussian_rho_curve, misspec_report, Integration, Region};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::load_density;
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MisspecArgs {
    /// Width ratios σ_q/σ_p, comma separated [default: 1.0,1.1,...,2.0]
    #[arg(long, value_delimiter = ',')]
    pub ratio: Option<Vec<f64>>,
    /// Width σ_p of the assumed Gaussian [default: 0.1 on the compact region, else 1]
    #[arg(long)]
    pub sigma_p: Option<f64>,
    /// plane or compact [default: plane]
    #[arg(long)]
    pub region: Option<String>,
    /// Monte Carlo samples per ratio (0 disables the plane cross-check) [default: 100000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Assumed density p for a lattice report (requires --q)
    #[arg(long)]
    pub p: Option<PathBuf>,
    /// True density q for a lattice report (requires --p)
    #[arg(long)]
    pub q: Option<PathBuf>,
    /// Total resource for the lattice report [default: 1]
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MisspecConfig {
    pub ratio: Vec<f64>,
    pub sigma_p: f64,
    pub region: String,
    pub samples: usize,
    pub p: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub budget: f64,
}

impl MisspecArgs {
    pub fn resolve(self) -> CliResult<MisspecConfig> {
        let region = self.region.unwrap_or_else(|| "plane".into());
        if region != "plane" && region != "compact" {
            return Err(invalid(format!("--region `{region}`: expected plane or compact")));
        }
        if self.p.is_some() != self.q.is_some() {
            return Err(invalid("--p and --q must be given together"));
        }
        Ok(MisspecConfig {
            ratio: self.ratio.unwrap_or_else(|| (0..=10).map(|i| 1.0 + 0.1 * i as f64).collect()),
            sigma_p: self.sigma_p.unwrap_or(if region == "compact" { 0.1 } else { 1.0 }),
            region,
            samples: self.samples.unwrap_or(100_000),
            p: self.p,
            q: self.q,
            budget: self.budget.unwrap_or(1.0),
        })
    }
}

pub fn run(cfg: &MisspecConfig, run: &mut Run) -> CliResult<()> {
    let region = if cfg.region == "compact" { Region::default_compact() } else { Region::Plane };
    let curve = gaussian_rho_curve(cfg.sigma_p, &cfg.ratio, &region, cfg.samples, run.seed)?;
    let rows: Vec<Vec<Cell>> = curve
        .iter()
        .map(|pt| {
            vec![
                pt.ratio.into(),
                pt.rho.into(),
                pt.stderr.unwrap_or(f64::NAN).into(),
                pt.divergent.into(),
                pt.mc_rho.unwrap_or(f64::NAN).into(),
            ]
        })
        .collect();
    run.write_table("rho", &["ratio", "rho", "stderr", "divergent", "mc_rho"], &rows)?;
    if let (Some(p), Some(q)) = (&cfg.p, &cfg.q) {
        let p = load_density(run, p)?;
        let q = load_density(run, q)?;
        let problem = VariationalProblem::budgeted(p, LossFamily::PowerLaw { gamma: 1.0 }, cfg.budget)?;
        let r = misspec_report(&problem, &q, Integration::Quadrature)?;
        run.write_json(
            "report.json",
            &json!({
                "cost_p_under_p": real_json(r.cost_p_under_p),
                "cost_p_under_q": real_json(r.cost_p_under_q),
                "opportunity": real_json(r.opportunity),
                "rho": real_json(r.rho),
                "divergent": r.divergent,
            }),
        )?;
    }
    Ok(())
}
