use crate::domain::VariationalProblem;
use crate::error::{Error, Result};
use crate::static_solver::StaticSolution;

/// Relative spread of the transformed marginal benefit over the cells.
///
/// Per cell `r = ⟨p⟩ · (−Σ λ_i ∂f_i/∂S) / (s·p·∂L/∂S)`, the constraint
/// price per unit of density-weighted marginal benefit, scaled by the
/// transformed (uniform) density. At a stationary point `r ≡ ⟨p⟩`; the
/// return value is `(max r − min r) / |mean r|`.
pub fn equipartition_residual(problem: &VariationalProblem, solution: &StaticSolution) -> Result<f64> {
    problem.check_candidate(&solution.s)?;
    if solution.multipliers.len() != problem.constraints.len() {
        return Err(Error::invalid("one multiplier per constraint required"));
    }
    let s = solution.s.values();
    let benefit = problem.marginal_loss(s);
    let price = problem.marginal_constraint(s, &solution.multipliers);
    if let Some(c) = benefit.iter().position(|&b| b == 0.0 || !b.is_finite()) {
        return Err(Error::Degenerate(format!("marginal benefit in cell {c}")));
    }
    let mean_p = problem.density.mean();
    let r: Vec<f64> = price.iter().zip(&benefit).map(|(l, b)| mean_p * -l / b).collect();
    let mean = crate::stats::mean(&r);
    if mean == 0.0 {
        return Err(Error::Degenerate("marginal benefit: zero mean invariant".into()));
    }
    let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok((hi - lo) / mean.abs())
}
