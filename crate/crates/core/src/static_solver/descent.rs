//! Numeric static optima by functional gradient descent with dual ascent.
//!
//! The primal step minimizes the augmented action
//! `∫ s·p·L + Σ λ_i c_i + (μ/2) Σ c_i²` (with `c_i = ∫ f_i − K_i`) using the
//! shared [`gradient_step`] kernel and a halving line search started at
//! `η₀ = 0.1`. Once the primal gradient is small compared with the
//! constraint violation the multipliers ascend: `λ_i ← λ_i + μ·c_i`.
//! A final rescale restores a lone linear budget exactly.

use super::StaticSolution;
use crate::domain::{gradient_step, GridField, VariationalProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target sup-norm of the stationarity residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative tolerance on each constraint, `|∫f_i − K_i| ≤ constraint_tol·K_i`.
    pub constraint_tol: f64,
    /// Initial trial step of the line search.
    pub initial_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200_000, constraint_tol: 1e-8, initial_step: 0.1 }
    }
}

impl SolveOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, ..Self::default() }
    }
}

struct Augmented<'a> {
    problem: &'a VariationalProblem,
    volumes: Vec<f64>,
    penalty: f64,
}

impl Augmented<'_> {
    fn value(&self, s: &[f64], lambda: &[f64]) -> f64 {
        let c = self.problem.constraint_violation(s);
        self.problem.sense.sign() * self.problem.expected_loss(s)
            + c.iter().zip(lambda).map(|(c, l)| l * c).sum::<f64>()
            + 0.5 * self.penalty * c.iter().map(|c| c * c).sum::<f64>()
    }

    fn effective_multipliers(&self, s: &[f64], lambda: &[f64]) -> Vec<f64> {
        self.problem.constraint_violation(s).iter().zip(lambda).map(|(c, l)| l + self.penalty * c).collect()
    }

    /// Stationarity residual plus the penalty-scaled constraint violation.
    fn kkt_error(&self, s: &[f64], lambda: &[f64]) -> f64 {
        let eff = self.effective_multipliers(s, lambda);
        let violation = self.problem.constraint_violation(s).iter().fold(0.0f64, |m, c| m.max(c.abs()));
        self.problem.stationarity_residual(s, &eff) + self.penalty * violation
    }

    fn weighted_sq_norm(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.volumes).map(|(g, v)| g * g * v).sum()
    }
}

/// Multipliers minimizing `‖s·p·L' + Σ λ_i f_i'‖²` over the domain, a warm start for dual ascent.
fn least_squares_multipliers(problem: &VariationalProblem, s: &[f64], volumes: &[f64]) -> Vec<f64> {
    let m = problem.constraints.len();
    let loss = problem.marginal_loss(s);
    let derivs: Vec<Vec<f64>> =
        problem.constraints.iter().map(|c| s.iter().map(|&v| c.derivative(v)).collect()).collect();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            a[i][j] = (0..s.len()).map(|c| derivs[i][c] * derivs[j][c] * volumes[c]).sum();
        }
        b[i] = -(0..s.len()).map(|c| derivs[i][c] * loss[c] * volumes[c]).sum::<f64>();
    }
    solve_small(a, b).unwrap_or_else(|| vec![0.0; m])
}

/// Gaussian elimination with partial pivoting for the tiny multiplier systems.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Penalty weight matched to the typical curvature of the loss term.
fn penalty_scale(problem: &VariationalProblem, s: &[f64], volumes: &[f64]) -> f64 {
    let zeros = vec![0.0; problem.constraints.len()];
    let g0 = problem.functional_gradient(s, &zeros);
    let mut curv: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(c, &v)| {
            let h = 1e-6 * v.abs().max(1e-3);
            let mut t = s.to_vec();
            t[c] = v + h;
            ((problem.functional_gradient(&t, &zeros)[c] - g0[c]) / h).abs()
        })
        .filter(|h| h.is_finite() && *h > 0.0)
        .collect();
    let volume: f64 = volumes.iter().sum();
    if curv.is_empty() {
        return 1.0 / volume;
    }
    curv.sort_by(f64::total_cmp);
    curv[curv.len() / 2] / volume
}

/// Minimizes the action numerically from `init`.
///
/// Stops when the stationarity residual is at most `opts.tol` and every
/// constraint holds to `opts.constraint_tol`; otherwise fails with the last
/// residual after `opts.max_iter` primal steps.
pub fn solve_static(problem: &VariationalProblem, init: &GridField, opts: SolveOptions) -> Result<StaticSolution> {
    problem.check_candidate(init)?;
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let floor = problem.floor();
    if let Some(c) = init.values().iter().position(|&v| v <= floor) {
        return Err(Error::invalid(format!("initial field at or below the floor in cell {c}")));
    }
    let volumes = init.cell_volumes();
    let mut s = init.values().to_vec();
    let aug = Augmented { problem, penalty: penalty_scale(problem, &s, &volumes), volumes };

    let mut lambda = if problem.multipliers.iter().any(|&l| l != 0.0) {
        problem.multipliers.clone()
    } else {
        least_squares_multipliers(problem, &s, &aug.volumes)
    };
    let targets: Vec<f64> = problem.constraints.iter().map(|c| c.target).collect();
    let feasible = |s: &[f64]| {
        problem.constraint_violation(s).iter().zip(&targets).all(|(c, k)| c.abs() <= opts.constraint_tol * k)
    };
    let lone_budget = problem.constraints.len() == 1 && problem.constraints[0].is_linear_budget();

    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let lam_eff = aug.effective_multipliers(&s, &lambda);
        let grad = problem.functional_gradient(&s, &lam_eff);
        residual = problem.stationarity_residual(&s, &lam_eff);
        if !residual.is_finite() {
            return Err(Error::NonFinite(format!("stationarity residual at iteration {iter}")));
        }

        let violation = problem.constraint_violation(&s).iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if residual <= opts.tol && feasible(&s) && aug.penalty * violation <= 0.1 * opts.tol {
            return Ok(finish(problem, s, lam_eff, iter - 1, lone_budget));
        }

        // dual ascent once the primal problem is solved to the accuracy the violation warrants
        if residual <= (0.5 * opts.tol).max(0.1 * aug.penalty * violation) {
            lambda = lam_eff;
            continue;
        }

        let current = aug.value(&s, &lambda);
        let slope = aug.weighted_sq_norm(&grad);
        let mut step = opts.initial_step;
        loop {
            let (trial, _) = gradient_step(problem, &s, &lam_eff, |_| step);
            let value = aug.value(&trial, &lambda);
            // below rounding level of the action the residual decides instead
            let flat = (value - current).abs() <= 1e-13 * current.abs().max(1.0);
            let better = if flat {
                aug.kkt_error(&trial, &lambda) < aug.kkt_error(&s, &lambda)
            } else {
                value <= current - 1e-4 * step * slope
            };
            if better {
                s = trial;
                break;
            }
            step *= 0.5;
            if step < 1e-40 {
                // no representable decrease left: accept the current point as stalled
                if residual <= opts.tol {
                    return Ok(finish(problem, s, lam_eff, iter, lone_budget));
                }
                return Err(Error::NonConvergence { iterations: iter, residual });
            }
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual })
}

fn finish(
    problem: &VariationalProblem,
    mut s: Vec<f64>,
    multipliers: Vec<f64>,
    iterations: usize,
    lone_budget: bool,
) -> StaticSolution {
    if lone_budget {
        let total = problem.constraints[0].target + problem.constraint_violation(&s)[0];
        let scale = problem.constraints[0].target / total;
        for v in &mut s {
            *v *= scale;
        }
    }
    let residual = problem.stationarity_residual(&s, &multipliers);
    let field = problem.field().with_values(s).expect("finite values from a converged run");
    StaticSolution { s: field, multipliers, residual, iterations }
}
