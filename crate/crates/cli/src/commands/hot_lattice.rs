use std::path::PathBuf;

use clap::Args;
use equipart_core::domain::{normalize_density, AxisBox, BoxDomain, GridField};
use equipart_core::static_solver::hot_lattice_evolve;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::load_density;
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Cell, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct HotLatticeArgs {
    /// Density on a single 2-D box; omit to use a quarter-plane Gaussian
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// Lattice rows for the generated density [default: 32]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Lattice columns for the generated density [default: 32]
    #[arg(long)]
    pub cols: Option<usize>,
    /// Width of the generated Gaussian, in unit-square coordinates [default: 0.3]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Number of break cells [default: one eighth of the cells]
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct HotLatticeConfig {
    pub density: Option<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    pub sigma: f64,
    pub budget: usize,
}

impl HotLatticeArgs {
    pub fn resolve(self) -> CliResult<HotLatticeConfig> {
        let rows = self.rows.unwrap_or(32);
        let cols = self.cols.unwrap_or(32);
        if rows == 0 || cols == 0 {
            return Err(invalid("--rows and --cols must be positive"));
        }
        Ok(HotLatticeConfig {
            density: self.density,
            rows,
            cols,
            sigma: self.sigma.unwrap_or(0.3),
            budget: self.budget.unwrap_or(rows * cols / 8),
        })
    }
}

pub fn run(cfg: &HotLatticeConfig, run: &mut Run) -> CliResult<()> {
    let density = match &cfg.density {
        Some(path) => load_density(run, path)?,
        None => {
            let dom = BoxDomain::single(AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0])?);
            let s2 = 2.0 * cfg.sigma * cfg.sigma;
            let f =
                GridField::from_fn(dom, vec![vec![cfg.rows, cfg.cols]], |x| (-(x[0] * x[0] + x[1] * x[1]) / s2).exp())?;
            normalize_density(&f)?
        }
    };
    let lattice = hot_lattice_evolve(&density, cfg.budget)?;
    let mask: Vec<Vec<Cell>> = (0..lattice.rows * lattice.cols)
        .map(|c| vec![(c / lattice.cols).into(), (c % lattice.cols).into(), lattice.breaks[c].into()])
        .collect();
    run.write_table("breaks", &["row", "col", "break"], &mask)?;
    let trace: Vec<Vec<Cell>> =
        lattice.cost_trace.iter().enumerate().map(|(i, c)| vec![i.into(), (*c).into()]).collect();
    run.write_table("cost_trace", &["breaks", "expected_cost"], &trace)?;
    run.write_field("density.csv", density.field())?;
    run.write_json(
        "summary.json",
        &json!({ "rows": lattice.rows, "cols": lattice.cols, "budget": lattice.budget, "expected_cost": real_json(lattice.expected_cost()) }),
    )
}
