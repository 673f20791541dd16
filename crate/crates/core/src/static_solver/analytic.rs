use super::StaticSolution;
use crate::domain::{integrate, Sense, VariationalProblem};
use crate::error::{Error, Result};

/// Closed-form optimum `S = K p^e / ∫ p^e dx` for power-type losses under one budget.
///
/// The exponent is `1/(γ+1)` for `S^{-γ}`, `N/(N+1)` for the median volume
/// loss and `N/(N+2)` for the mean volume loss.
pub fn analytic_power_optimum(problem: &VariationalProblem) -> Result<StaticSolution> {
    let (gamma, exponent) = match (problem.loss.power(), problem.loss.optimum_exponent()) {
        (Some(g), Some(e)) => (g, e),
        _ => return Err(Error::NoClosedForm(format!("loss {:?}", problem.loss))),
    };
    if problem.sense != Sense::MinimizeCost {
        return Err(Error::NoClosedForm("benefit maximization of a power-law cost".into()));
    }
    let budget = match problem.constraints.as_slice() {
        [c] if c.is_linear_budget() => c.target,
        _ => return Err(Error::NoClosedForm("closed form needs exactly one total-resource constraint".into())),
    };

    let weights = problem.field().map(|p| p.powf(exponent))?;
    let norm = integrate(&weights);
    if norm <= 0.0 {
        return Err(Error::Degenerate("density: zero everywhere".into()));
    }
    let floor = problem.floor();
    let s = weights.map(|w| (budget * w / norm).max(floor))?;
    // λ = −p ∂L/∂S is the same constant on every cell with p > 0
    let lambda = gamma * (norm / budget).powf(gamma + 1.0);
    let multipliers = vec![lambda];
    let residual = problem.stationarity_residual(s.values(), &multipliers);
    Ok(StaticSolution { s, multipliers, residual, iterations: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{
        normalize_density, AxisBox, BoxDomain, ConstraintFamily, ConstraintKind, GridField, LossFamily,
    };

    fn unit_cells(values: Vec<f64>) -> crate::domain::DensityField {
        let n = values.len();
        let dom = BoxDomain::single(AxisBox::new(vec![0.0], vec![n as f64]).unwrap());
        let f = GridField::new(dom, vec![vec![n]], values).unwrap();
        crate::domain::DensityField::new(f).unwrap()
    }

    /// Brute-force minimizer of Σ p_i/S_i over a grid on the budget simplex.
    fn simplex_grid_search(p: &[f64], budget: f64, steps: usize) -> Vec<f64> {
        let mut best = (f64::INFINITY, vec![]);
        let h = budget / steps as f64;
        for a in 1..steps {
            for b in 1..steps - a {
                for c in 1..steps - a - b {
                    let d = steps - a - b - c;
                    let s = [a as f64 * h, b as f64 * h, c as f64 * h, d as f64 * h];
                    let cost: f64 = p.iter().zip(&s).map(|(p, s)| p / s).sum();
                    if cost < best.0 {
                        best = (cost, s.to_vec());
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn four_cell_hot_optimum() {
        let p = vec![0.64, 0.04, 0.16, 0.16];
        let prob =
            VariationalProblem::budgeted(unit_cells(p.clone()), LossFamily::PowerLaw { gamma: 1.0 }, 1.8).unwrap();
        let sol = analytic_power_optimum(&prob).unwrap();
        let expected = [0.8, 0.2, 0.4, 0.4];
        for (s, e) in sol.s.values().iter().zip(expected) {
            assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
        // independent check: grid search over the budget simplex at resolution 1.8/180
        let brute = simplex_grid_search(&p, 1.8, 180);
        for (b, e) in brute.iter().zip(expected) {
            assert!((b - e).abs() < 1e-9, "{b} vs {e}");
        }
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn four_to_one_density_gives_two_to_one_resource() {
        let prob =
            VariationalProblem::budgeted(unit_cells(vec![0.8, 0.2]), LossFamily::PowerLaw { gamma: 1.0 }, 1.0).unwrap();
        let s = analytic_power_optimum(&prob).unwrap().s;
        assert!((s.values()[0] / s.values()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_spreads_budget_evenly() {
        let prob =
            VariationalProblem::budgeted(unit_cells(vec![0.2; 5]), LossFamily::VolumeMean { dims: 3 }, 7.0).unwrap();
        let s = analytic_power_optimum(&prob).unwrap().s;
        assert!(s.values().iter().all(|v| (v - 7.0 / 5.0).abs() < 1e-12));
    }

    #[test]
    fn unsupported_combinations_have_no_closed_form() {
        let p = normalize_density(&GridField::constant(BoxDomain::unit(1), vec![vec![3]], 1.0).unwrap()).unwrap();
        let quad =
            VariationalProblem::budgeted(p.clone(), LossFamily::Quadratic { target: vec![1.0; 3] }, 3.0).unwrap();
        assert!(matches!(analytic_power_optimum(&quad), Err(Error::NoClosedForm(_))));
        let square = VariationalProblem::new(
            p,
            LossFamily::PowerLaw { gamma: 1.0 },
            vec![ConstraintFamily::new(ConstraintKind::SquareNorm, 1.0).unwrap()],
            Sense::MinimizeCost,
        )
        .unwrap();
        let err = analytic_power_optimum(&square).unwrap_err();
        assert!(err.to_string().contains("no closed form"));
    }
}
