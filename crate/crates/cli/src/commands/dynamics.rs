use std::path::PathBuf;

use clap::Args;
use equipart_core::domain::VariationalProblem;
use equipart_core::dynamics::{
    damped_step, energy, hamilton_step, overdamped_step, verify_legendre, CoordinateVelocity, PhaseState, TransportSpec,
};
use equipart_core::static_solver::{analytic_power_optimum, solve_static, SolveOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_density, parse_loss, required};
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DynamicsArgs {
    /// Event density
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// powerlaw:<gamma>, median:<N> or mean:<N> [default: powerlaw:1]
    #[arg(long)]
    pub loss: Option<String>,
    /// Total resource K, which fixes the multiplier [default: 1]
    #[arg(long)]
    pub budget: Option<f64>,
    /// hamilton, damped or overdamped [default: hamilton]
    #[arg(long)]
    pub mode: Option<String>,
    /// Transport exponent in [1, 2] [default: 2]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Uniform friction k [default: 0, or 1 when overdamped]
    #[arg(long)]
    pub friction: Option<f64>,
    /// Time step [default: 0.001]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of steps [default: 1000]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Steps between snapshots [default: 100]
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Initial allocation, uniform in space [default: half the uniform budget share]
    #[arg(long)]
    pub init: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DynamicsConfig {
    pub density: PathBuf,
    pub loss: String,
    pub budget: f64,
    pub mode: String,
    pub alpha: f64,
    pub friction: f64,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_every: usize,
    pub init: Option<f64>,
}

impl DynamicsArgs {
    pub fn resolve(self) -> CliResult<DynamicsConfig> {
        let mode = self.mode.unwrap_or_else(|| "hamilton".into());
        if !["hamilton", "damped", "overdamped"].contains(&mode.as_str()) {
            return Err(invalid(format!("--mode `{mode}`: expected hamilton, damped or overdamped")));
        }
        let cfg = DynamicsConfig {
            density: required(self.density, "density")?,
            loss: self.loss.unwrap_or_else(|| "powerlaw:1".into()),
            budget: self.budget.unwrap_or(1.0),
            friction: self.friction.unwrap_or(if mode == "overdamped" { 1.0 } else { 0.0 }),
            mode,
            alpha: self.alpha.unwrap_or(2.0),
            dt: self.dt.unwrap_or(1e-3),
            steps: self.steps.unwrap_or(1000),
            snapshot_every: self.snapshot_every.unwrap_or(100),
            init: self.init,
        };
        parse_loss(&cfg.loss)?;
        if !(cfg.dt > 0.0) || cfg.snapshot_every == 0 {
            return Err(invalid("--dt and --snapshot-every must be positive"));
        }
        Ok(cfg)
    }
}

pub fn run(cfg: &DynamicsConfig, run: &mut Run) -> CliResult<()> {
    let density = load_density(run, &cfg.density)?;
    let problem = VariationalProblem::budgeted(density, parse_loss(&cfg.loss)?, cfg.budget)?;
    let volume: f64 = problem.field().cell_volumes().iter().sum();
    let share = cfg.budget / volume;
    // the multiplier is held at its static-optimum value
    let optimum = match analytic_power_optimum(&problem) {
        Ok(sol) => sol,
        Err(_) => solve_static(&problem, &problem.field().map(|_| share)?, SolveOptions::default())?,
    };
    let problem = problem.with_multipliers(optimum.multipliers.clone())?;
    let init = problem.field().map(|_| cfg.init.unwrap_or(0.5 * share))?;
    let friction = problem.field().map(|_| cfg.friction)?;
    let transport = TransportSpec::new(cfg.alpha, CoordinateVelocity::Zero, friction.clone())?;

    let mut state = PhaseState::at_rest(init)?;
    let mut rows = Vec::new();
    let mut clamped = 0usize;
    let snapshot = |k: usize, step: usize, state: &PhaseState, legendre: f64, run: &mut Run| -> CliResult<Vec<Cell>> {
        run.write_field(&format!("allocation_{k:04}.csv"), &state.s)?;
        let s = state.s.values();
        Ok(vec![
            step.into(),
            state.t.into(),
            energy(state, &problem, &transport).into(),
            legendre.into(),
            problem.action(s, &problem.multipliers).into(),
            problem.stationarity_residual(s, &problem.multipliers).into(),
        ])
    };
    rows.push(snapshot(0, 0, &state, 0.0, run)?);
    let mut window = vec![state.clone()];
    for step in 1..=cfg.steps {
        state = match cfg.mode.as_str() {
            "overdamped" => {
                let (s, c) = overdamped_step(&state.s, &problem, &friction, cfg.dt)?;
                clamped += c;
                PhaseState { s, pi: state.pi.clone(), t: state.t + cfg.dt }
            }
            "damped" => {
                let st = damped_step(&state, &problem, &transport, cfg.dt)?;
                clamped += st.clamped;
                st.state
            }
            _ => {
                let st = hamilton_step(&state, &problem, &transport, cfg.dt)?;
                clamped += st.clamped;
                st.state
            }
        };
        window.push(state.clone());
        if step % cfg.snapshot_every == 0 || step == cfg.steps {
            // the momentum relation only applies to the second-order modes
            let legendre = if cfg.mode == "overdamped" { f64::NAN } else { verify_legendre(&window, &transport)? };
            rows.push(snapshot(rows.len(), step, &state, legendre, run)?);
            window = vec![state.clone()];
        }
    }
    run.write_table("series", &["step", "t", "energy", "legendre_residual", "action", "stationarity_residual"], &rows)?;
    run.write_field("static_optimum.csv", &optimum.s)?;
    run.write_json(
        "summary.json",
        &json!({
            "mode": cfg.mode,
            "multipliers": optimum.multipliers.iter().map(|m| real_json(*m)).collect::<Vec<_>>(),
            "final_stationarity_residual": real_json(problem.stationarity_residual(state.s.values(), &problem.multipliers)),
            "clamped_cells": clamped,
        }),
    )
}
