use serde::{Deserialize, Serialize};

use super::grid::{DensityField, GridField};
use crate::error::{Error, Result};

/// Lower bound applied to `S` when the loss has a pole at zero.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Pointwise loss `L(S)` weighted by the event density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossFamily {
    /// `S^{-γ}`.
    PowerLaw { gamma: f64 },
    /// Median facility distance `V^{1/N}` with `S = V^{-1}`, i.e. `S^{-1/N}`.
    VolumeMedian { dims: u32 },
    /// Mean squared facility distance `V^{2/N}`, i.e. `S^{-2/N}`.
    VolumeMean { dims: u32 },
    /// `(S - S*)²` with one target per cell.
    Quadratic { target: Vec<f64> },
}

impl LossFamily {
    fn validate(&self, cells: usize) -> Result<()> {
        match self {
            LossFamily::PowerLaw { gamma } if !(*gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::invalid(format!("power-law exponent must be positive, got {gamma}")))
            }
            LossFamily::VolumeMedian { dims: 0 } | LossFamily::VolumeMean { dims: 0 } => {
                Err(Error::invalid("volume losses need N >= 1"))
            }
            LossFamily::Quadratic { target } if target.len() != cells => {
                Err(Error::invalid(format!("quadratic target has {} cells, density has {cells}", target.len())))
            }
            _ => Ok(()),
        }
    }

    /// Exponent `γ` of the equivalent cost `S^{-γ}`, for the power-type families.
    pub fn power(&self) -> Option<f64> {
        match self {
            LossFamily::PowerLaw { gamma } => Some(*gamma),
            LossFamily::VolumeMedian { dims } => Some(1.0 / *dims as f64),
            LossFamily::VolumeMean { dims } => Some(2.0 / *dims as f64),
            LossFamily::Quadratic { .. } => None,
        }
    }

    /// Exponent `e` in `S ∝ p^e` at the single-budget optimum.
    pub fn optimum_exponent(&self) -> Option<f64> {
        match self {
            LossFamily::PowerLaw { gamma } => Some(1.0 / (gamma + 1.0)),
            LossFamily::VolumeMedian { dims } => Some(*dims as f64 / (*dims as f64 + 1.0)),
            LossFamily::VolumeMean { dims } => Some(*dims as f64 / (*dims as f64 + 2.0)),
            LossFamily::Quadratic { .. } => None,
        }
    }

    pub fn has_pole(&self) -> bool {
        self.power().is_some()
    }

    pub fn value(&self, s: f64, cell: usize) -> f64 {
        match self {
            LossFamily::Quadratic { target } => (s - target[cell]).powi(2),
            _ => s.powf(-self.power().unwrap()),
        }
    }

    pub fn derivative(&self, s: f64, cell: usize) -> f64 {
        match self {
            LossFamily::Quadratic { target } => 2.0 * (s - target[cell]),
            _ => {
                let g = self.power().unwrap();
                -g * s.powf(-g - 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// `f(S) = S`.
    TotalResource,
    /// `f(S) = |S|`.
    AbsNorm,
    /// `f(S) = S²`.
    SquareNorm,
    /// `f = V^{-1}`; with `S` read as facility density this is `S`.
    InverseVolume,
}

/// Constraint `∫ f(S) dx = K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFamily {
    pub kind: ConstraintKind,
    pub target: f64,
}

impl ConstraintFamily {
    pub fn new(kind: ConstraintKind, target: f64) -> Result<Self> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::invalid(format!("constraint target must be positive, got {target}")));
        }
        Ok(Self { kind, target })
    }

    pub fn total(target: f64) -> Result<Self> {
        Self::new(ConstraintKind::TotalResource, target)
    }

    /// True when `f(S) = S` on positive fields, so the budget can be restored by rescaling.
    pub fn is_linear_budget(&self) -> bool {
        matches!(self.kind, ConstraintKind::TotalResource | ConstraintKind::InverseVolume | ConstraintKind::AbsNorm)
    }

    pub fn value(&self, s: f64) -> f64 {
        match self.kind {
            ConstraintKind::TotalResource | ConstraintKind::InverseVolume => s,
            ConstraintKind::AbsNorm => s.abs(),
            ConstraintKind::SquareNorm => s * s,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self.kind {
            ConstraintKind::TotalResource | ConstraintKind::InverseVolume => 1.0,
            ConstraintKind::AbsNorm => s.signum(),
            ConstraintKind::SquareNorm => 2.0 * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sense {
    #[default]
    MinimizeCost,
    MaximizeBenefit,
}

impl Sense {
    /// Sign that turns the density-weighted term into something to minimize.
    pub fn sign(self) -> f64 {
        match self {
            Sense::MinimizeCost => 1.0,
            Sense::MaximizeBenefit => -1.0,
        }
    }
}

/// Density, loss, constraints and the current multipliers `λ_i`.
///
/// The action is `J = ∫ s·p·L(S) dx + Σ λ_i (∫ f_i(S) dx − K_i)` with `s = ±1` from [`Sense`].
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalProblem {
    pub density: DensityField,
    pub loss: LossFamily,
    pub constraints: Vec<ConstraintFamily>,
    pub sense: Sense,
    pub multipliers: Vec<f64>,
}

impl VariationalProblem {
    pub fn new(
        density: DensityField,
        loss: LossFamily,
        constraints: Vec<ConstraintFamily>,
        sense: Sense,
    ) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::invalid("a variational problem needs at least one constraint"));
        }
        loss.validate(density.len())?;
        let multipliers = vec![0.0; constraints.len()];
        Ok(Self { density, loss, constraints, sense, multipliers })
    }

    /// Cost minimization with a single total-resource budget.
    pub fn budgeted(density: DensityField, loss: LossFamily, budget: f64) -> Result<Self> {
        Self::new(density, loss, vec![ConstraintFamily::total(budget)?], Sense::MinimizeCost)
    }

    pub fn with_multipliers(mut self, multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.len() != self.constraints.len() {
            return Err(Error::invalid("one multiplier per constraint required"));
        }
        self.multipliers = multipliers;
        Ok(self)
    }

    pub fn field(&self) -> &GridField {
        self.density.field()
    }

    pub fn cells(&self) -> usize {
        self.density.len()
    }

    pub fn floor(&self) -> f64 {
        if self.loss.has_pole() {
            POSITIVITY_FLOOR
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn check_candidate(&self, s: &GridField) -> Result<()> {
        if !s.same_lattice(self.field()) {
            return Err(Error::invalid("candidate field lives on a different lattice than the density"));
        }
        Ok(())
    }

    /// `∫ p·L(S) dx`, unsigned.
    pub fn expected_loss(&self, s: &[f64]) -> f64 {
        let p = self.density.values();
        let vols = self.field().cell_volumes();
        (0..s.len()).map(|c| p[c] * self.loss.value(s[c], c) * vols[c]).sum()
    }

    /// `∫ f_i(S) dx − K_i` for every constraint.
    pub fn constraint_violation(&self, s: &[f64]) -> Vec<f64> {
        let vols = self.field().cell_volumes();
        self.constraints
            .iter()
            .map(|c| s.iter().zip(&vols).map(|(v, w)| c.value(*v) * w).sum::<f64>() - c.target)
            .collect()
    }

    /// Action with the given multipliers.
    pub fn action(&self, s: &[f64], multipliers: &[f64]) -> f64 {
        let objective = self.sense.sign() * self.expected_loss(s);
        let penalty: f64 = self.constraint_violation(s).iter().zip(multipliers).map(|(c, l)| c * l).sum();
        objective + penalty
    }

    /// Marginal term `s·p·∂L/∂S` per cell.
    pub fn marginal_loss(&self, s: &[f64]) -> Vec<f64> {
        let p = self.density.values();
        let sign = self.sense.sign();
        (0..s.len()).map(|c| sign * p[c] * self.loss.derivative(s[c], c)).collect()
    }

    /// Constraint term `Σ λ_i ∂f_i/∂S` per cell.
    pub fn marginal_constraint(&self, s: &[f64], multipliers: &[f64]) -> Vec<f64> {
        s.iter().map(|&v| self.constraints.iter().zip(multipliers).map(|(c, l)| l * c.derivative(v)).sum()).collect()
    }

    /// Functional gradient `δJ/δS = s·p·∂L/∂S + Σ λ_i ∂f_i/∂S` per cell.
    pub fn functional_gradient(&self, s: &[f64], multipliers: &[f64]) -> Vec<f64> {
        self.marginal_loss(s).into_iter().zip(self.marginal_constraint(s, multipliers)).map(|(a, b)| a + b).collect()
    }

    /// Sup-norm of the stationarity condition.
    ///
    /// Cells pinned at the positivity floor only count when the gradient
    /// pushes them upward, since the floor is an active bound there.
    pub fn stationarity_residual(&self, s: &[f64], multipliers: &[f64]) -> f64 {
        let floor = self.floor();
        self.functional_gradient(s, multipliers).iter().zip(s).fold(0.0, |m, (g, v)| {
            let r = if *v <= floor { (-g).max(0.0) } else { g.abs() };
            m.max(r)
        })
    }
}

/// One functional-gradient-descent step `S ← S − rate(x)·δJ/δS`, floored where the loss has a pole.
///
/// Both the static solver and the overdamped dynamics call this, so a step
/// with `rate = dt/k` is the same arithmetic as a descent step with that rate.
/// Returns the new values and the number of cells that hit the floor.
pub fn gradient_step(
    problem: &VariationalProblem,
    s: &[f64],
    multipliers: &[f64],
    rate: impl Fn(usize) -> f64,
) -> (Vec<f64>, usize) {
    let grad = problem.functional_gradient(s, multipliers);
    let floor = problem.floor();
    let mut clamped = 0;
    let next = s
        .iter()
        .zip(&grad)
        .enumerate()
        .map(|(c, (v, g))| {
            let x = v - rate(c) * g;
            if x < floor {
                clamped += 1;
                floor
            } else {
                x
            }
        })
        .collect();
    (next, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{normalize_density, BoxDomain};
    use rand::{Rng, SeedableRng};

    fn random_problem(seed: u64, loss: LossFamily) -> VariationalProblem {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = GridField::from_fn(BoxDomain::unit(2), vec![vec![4, 4]], |_| rng.random_range(0.1..1.0)).unwrap();
        let p = normalize_density(&f).unwrap();
        VariationalProblem::new(
            p,
            loss,
            vec![
                ConstraintFamily::total(1.3).unwrap(),
                ConstraintFamily::new(ConstraintKind::SquareNorm, 2.0).unwrap(),
            ],
            Sense::MinimizeCost,
        )
        .unwrap()
    }

    #[test]
    fn functional_gradient_matches_finite_differences() {
        let losses = [
            LossFamily::PowerLaw { gamma: 1.5 },
            LossFamily::VolumeMedian { dims: 2 },
            LossFamily::Quadratic { target: vec![0.7; 16] },
        ];
        for (seed, loss) in losses.into_iter().enumerate() {
            let prob = random_problem(seed as u64, loss);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed as u64);
            let s: Vec<f64> = (0..16).map(|_| rng.random_range(0.5..2.0)).collect();
            let lam = [0.3, -0.2];
            let grad = prob.functional_gradient(&s, &lam);
            let vols = prob.field().cell_volumes();
            let h = 1e-5;
            for c in 0..16 {
                let mut up = s.clone();
                let mut dn = s.clone();
                up[c] += h;
                dn[c] -= h;
                // the discrete action gradient carries the cell volume
                let fd = (prob.action(&up, &lam) - prob.action(&dn, &lam)) / (2.0 * h) / vols[c];
                assert!((fd - grad[c]).abs() <= 1e-6 * grad[c].abs().max(1.0), "cell {c}: {fd} vs {}", grad[c]);
            }
        }
    }

    #[test]
    fn problem_requires_a_constraint() {
        let p = normalize_density(&GridField::constant(BoxDomain::unit(1), vec![vec![2]], 1.0).unwrap()).unwrap();
        assert!(VariationalProblem::new(p.clone(), LossFamily::PowerLaw { gamma: 1.0 }, vec![], Sense::MinimizeCost)
            .is_err());
        assert!(VariationalProblem::budgeted(p.clone(), LossFamily::PowerLaw { gamma: 0.0 }, 1.0).is_err());
        assert!(VariationalProblem::budgeted(p, LossFamily::Quadratic { target: vec![1.0] }, 1.0).is_err());
        assert!(ConstraintFamily::total(0.0).is_err());
    }

    #[test]
    fn gradient_step_floors_pole_losses() {
        let p = normalize_density(&GridField::constant(BoxDomain::unit(1), vec![vec![2]], 1.0).unwrap()).unwrap();
        let prob = VariationalProblem::budgeted(p, LossFamily::PowerLaw { gamma: 1.0 }, 1.0).unwrap();
        let (next, clamped) = gradient_step(&prob, &[0.5, 0.5], &[10.0], |_| 1.0);
        assert_eq!(clamped, 2);
        assert!(next.iter().all(|&v| v == POSITIVITY_FLOOR));
    }
}
