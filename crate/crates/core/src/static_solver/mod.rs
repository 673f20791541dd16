//! Static optima of the constrained action.
//!
//! Closed forms cover the power-type losses under a single budget; everything
//! else goes through [`solve_static`], a functional gradient descent with
//! multiplier updates. HOT lattices and k-medians are the two discrete
//! problem families that share the same scaling story.

mod analytic;
mod descent;
mod hot_lattice;
mod kmedians;
mod scaling;

use crate::domain::GridField;

pub use analytic::analytic_power_optimum;
pub use descent::{solve_static, SolveOptions};
pub use hot_lattice::{hot_lattice_evolve, lattice_expected_cost, HotLattice};
pub use kmedians::{kmedians_em, kmedians_objective, voronoi_scaling_exponent, KMediansResult};
pub use scaling::fit_scaling_exponent;

/// A static optimum with its multipliers and stationarity residual.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    pub s: GridField,
    pub multipliers: Vec<f64>,
    /// Sup-norm of `s·p·∂L/∂S + Σ λ_i ∂f_i/∂S`.
    pub residual: f64,
    pub iterations: usize,
}
