use std::path::PathBuf;

use clap::Args;
use equipart_core::diffusion::equipartition_residual;
use equipart_core::domain::VariationalProblem;
use equipart_core::static_solver::{analytic_power_optimum, fit_scaling_exponent, solve_static, SolveOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_density, parse_loss, required};
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct StaticArgs {
    /// Event density (grid field file, normalized on load)
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// powerlaw:<gamma>, median:<N> or mean:<N> [default: powerlaw:1]
    #[arg(long)]
    pub loss: Option<String>,
    /// Total resource K [default: 1]
    #[arg(long)]
    pub budget: Option<f64>,
    /// analytic, numeric, or auto (analytic when a closed form exists) [default: auto]
    #[arg(long)]
    pub method: Option<String>,
    /// Stationarity tolerance for the numeric solver [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap for the numeric solver [default: 200000]
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct StaticConfig {
    pub density: PathBuf,
    pub loss: String,
    pub budget: f64,
    pub method: String,
    pub tol: f64,
    pub max_iter: usize,
}

impl StaticArgs {
    pub fn resolve(self) -> CliResult<StaticConfig> {
        let cfg = StaticConfig {
            density: required(self.density, "density")?,
            loss: self.loss.unwrap_or_else(|| "powerlaw:1".into()),
            budget: self.budget.unwrap_or(1.0),
            method: self.method.unwrap_or_else(|| "auto".into()),
            tol: self.tol.unwrap_or(1e-10),
            max_iter: self.max_iter.unwrap_or(200_000),
        };
        parse_loss(&cfg.loss)?;
        if !["auto", "analytic", "numeric"].contains(&cfg.method.as_str()) {
            return Err(invalid(format!("--method `{}`: expected auto, analytic or numeric", cfg.method)));
        }
        Ok(cfg)
    }
}

pub fn run(cfg: &StaticConfig, run: &mut Run) -> CliResult<()> {
    let density = load_density(run, &cfg.density)?;
    let loss = parse_loss(&cfg.loss)?;
    let problem = VariationalProblem::budgeted(density, loss, cfg.budget)?;
    let analytic = match cfg.method.as_str() {
        "analytic" => true,
        "numeric" => false,
        _ => problem.loss.optimum_exponent().is_some(),
    };
    let solution = if analytic {
        analytic_power_optimum(&problem)?
    } else {
        let volume: f64 = problem.field().cell_volumes().iter().sum();
        let init = problem.field().map(|_| cfg.budget / volume)?;
        solve_static(&problem, &init, SolveOptions::new(cfg.tol, cfg.max_iter))?
    };
    run.write_field("solution.csv", &solution.s)?;
    let action = problem.action(solution.s.values(), &solution.multipliers);
    let exponent = fit_scaling_exponent(&solution.s, &problem.density).ok();
    let invariant = equipartition_residual(&problem, &solution).ok();
    let summary = json!({
        "method": if analytic { "analytic" } else { "numeric" },
        "residual": real_json(solution.residual),
        "multipliers": solution.multipliers.iter().map(|m| real_json(*m)).collect::<Vec<_>>(),
        "iterations": solution.iterations,
        "action": real_json(action),
        "scaling_exponent": exponent.map(real_json),
        "equipartition_residual": invariant.map(real_json),
    });
    run.write_json("summary.json", &summary)
}
