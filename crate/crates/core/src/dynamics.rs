//! Time-dependent allocation driven by the action.
//!
//! With transport exponent `α ∈ (1, 2]` the field `S` and its momentum `Π`
//! follow Hamilton's equations `DΠ/Dt = −δJ/δS`, `DS/Dt = Π^{1/(α−1)}`
//! (signed power). Friction adds `−k·DS/Dt` to the momentum equation, and
//! the overdamped limit is one functional-gradient step per time step.

use serde::{Deserialize, Serialize};

use crate::domain::{gradient_step, GridField, VariationalProblem};
use crate::error::{Error, Result};
use crate::static_solver::{solve_static, SolveOptions};

/// Velocity `g(x)` of the moving coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoordinateVelocity {
    Zero,
    Constant(Vec<f64>),
    /// `g(x) = offset + A·x`, `A` given row by row.
    Linear {
        offset: Vec<f64>,
        matrix: Vec<Vec<f64>>,
    },
}

impl CoordinateVelocity {
    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CoordinateVelocity::Zero => vec![0.0; x.len()],
            CoordinateVelocity::Constant(g) => g.clone(),
            CoordinateVelocity::Linear { offset, matrix } => offset
                .iter()
                .zip(matrix)
                .map(|(o, row)| o + row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>())
                .collect(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, CoordinateVelocity::Zero)
    }

    fn check(&self, dims: usize) -> Result<()> {
        let ok = match self {
            CoordinateVelocity::Zero => true,
            CoordinateVelocity::Constant(g) => g.len() == dims,
            CoordinateVelocity::Linear { offset, matrix } => {
                offset.len() == dims && matrix.len() == dims && matrix.iter().all(|r| r.len() == dims)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("coordinate velocity does not match the domain dimension"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSpec {
    pub alpha: f64,
    pub velocity: CoordinateVelocity,
    /// Friction `k(x) ≥ 0` on the allocation lattice.
    pub friction: GridField,
}

impl TransportSpec {
    pub fn new(alpha: f64, velocity: CoordinateVelocity, friction: GridField) -> Result<Self> {
        if !(1.0..=2.0).contains(&alpha) {
            return Err(Error::invalid(format!("transport exponent must lie in [1, 2], got {alpha}")));
        }
        if friction.values().iter().any(|&k| k < 0.0) {
            return Err(Error::invalid("friction must be non-negative"));
        }
        velocity.check(friction.domain().dims())?;
        Ok(Self { alpha, velocity, friction })
    }

    /// Frictionless transport with stationary coordinates on `lattice`.
    pub fn conservative(alpha: f64, lattice: &GridField) -> Result<Self> {
        Self::new(alpha, CoordinateVelocity::Zero, lattice.map(|_| 0.0)?)
    }
}

/// Field, momentum and time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub s: GridField,
    pub pi: GridField,
    pub t: f64,
}

impl PhaseState {
    /// At rest: zero momentum.
    pub fn at_rest(s: GridField) -> Result<Self> {
        let pi = s.map(|_| 0.0)?;
        Ok(Self { s, pi, t: 0.0 })
    }
}

/// Result of one step: the new state and how many cells hit the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: PhaseState,
    pub clamped: usize,
}

pub(crate) fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// `g·∇f` per cell with upwind differences; a missing upwind neighbour
/// falls back to the one-sided difference on the other side.
fn advection(field: &GridField, velocity: &CoordinateVelocity) -> Vec<f64> {
    let v = field.values();
    (0..v.len())
        .map(|c| {
            let (b, idx) = field.cell_index(c);
            let res = &field.resolution()[b];
            let h = field.cell_spacing(b);
            let g = velocity.at(&field.cell_center(c));
            let mut total = 0.0;
            for j in 0..idx.len() {
                if g[j] == 0.0 || res[j] < 2 {
                    continue;
                }
                let neighbour = |delta: isize| {
                    let mut n = idx.clone();
                    n[j] = (idx[j] as isize + delta) as usize;
                    v[field.flat_index(b, &n)]
                };
                let backward = idx[j] > 0;
                let forward = idx[j] + 1 < res[j];
                let slope = if (g[j] > 0.0 && backward) || !forward {
                    (v[c] - neighbour(-1)) / h[j]
                } else {
                    (neighbour(1) - v[c]) / h[j]
                };
                total += g[j] * slope;
            }
            total
        })
        .collect()
}

/// `D f/Dt = ∂f/∂t + g·∇f`: backward time difference plus upwind space differences.
pub fn material_derivative(
    now: &GridField,
    prev: &GridField,
    dt: f64,
    velocity: &CoordinateVelocity,
) -> Result<GridField> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    if !now.same_lattice(prev) {
        return Err(Error::invalid("fields live on different lattices"));
    }
    velocity.check(now.domain().dims())?;
    let mut out: Vec<f64> = now.values().iter().zip(prev.values()).map(|(a, b)| (a - b) / dt).collect();
    if !velocity.is_zero() {
        for (o, a) in out.iter_mut().zip(advection(now, velocity)) {
            *o += a;
        }
    }
    now.with_values(out)
}

fn check_step(state: &PhaseState, problem: &VariationalProblem, transport: &TransportSpec, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    problem.check_candidate(&state.s)?;
    if !state.s.same_lattice(&state.pi) || !state.s.same_lattice(&transport.friction) {
        return Err(Error::invalid("state, momentum and friction must share the allocation lattice"));
    }
    if transport.alpha <= 1.0 {
        return Err(Error::invalid("α = 1 has no momentum dynamics; use the static limit"));
    }
    Ok(())
}

/// Shared symplectic update; `damping(c)` divides the new momentum.
fn symplectic(
    state: &PhaseState,
    problem: &VariationalProblem,
    transport: &TransportSpec,
    dt: f64,
    damping: impl Fn(usize) -> f64,
) -> Result<Step> {
    let s = state.s.values();
    let grad = problem.functional_gradient(s, &problem.multipliers);
    let moving = !transport.velocity.is_zero();
    let pi_adv = if moving { advection(&state.pi, &transport.velocity) } else { vec![0.0; s.len()] };
    let s_adv = if moving { advection(&state.s, &transport.velocity) } else { vec![0.0; s.len()] };
    let pi: Vec<f64> = (0..s.len()).map(|c| (state.pi.values()[c] - dt * (grad[c] + pi_adv[c])) / damping(c)).collect();
    let rate = 1.0 / (transport.alpha - 1.0);
    let floor = problem.floor();
    let mut clamped = 0;
    let next: Vec<f64> = (0..s.len())
        .map(|c| {
            let x = s[c] + dt * (signed_pow(pi[c], rate) - s_adv[c]);
            if x < floor {
                clamped += 1;
                floor
            } else {
                x
            }
        })
        .collect();
    if next.iter().chain(&pi).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("state after step at t = {}", state.t + dt)));
    }
    Ok(Step {
        state: PhaseState { s: state.s.with_values(next)?, pi: state.pi.with_values(pi)?, t: state.t + dt },
        clamped,
    })
}

/// One semi-implicit Euler step of the frictionless equations.
///
/// `Π ← Π − dt·δJ/δS(S)`, then `S ← S + dt·Π^{1/(α−1)}`; with moving
/// coordinates both updates also subtract the upwind `g·∇`. Cells pushed
/// below the floor are clamped and counted.
pub fn hamilton_step(
    state: &PhaseState,
    problem: &VariationalProblem,
    transport: &TransportSpec,
    dt: f64,
) -> Result<Step> {
    check_step(state, problem, transport, dt)?;
    symplectic(state, problem, transport, dt, |_| 1.0)
}

/// As [`hamilton_step`] with Rayleigh friction `−k·DS/Dt` on the momentum,
/// taken implicitly: `Π ← (Π − dt·δJ/δS) / (1 + k·dt)`. Requires `α = 2`.
pub fn damped_step(
    state: &PhaseState,
    problem: &VariationalProblem,
    transport: &TransportSpec,
    dt: f64,
) -> Result<Step> {
    check_step(state, problem, transport, dt)?;
    if transport.alpha != 2.0 {
        return Err(Error::invalid("damped dynamics are defined for α = 2"));
    }
    let k = transport.friction.values();
    symplectic(state, problem, transport, dt, |c| 1.0 + k[c] * dt)
}

/// First-order relaxation `S ← S − (dt/k)·δJ/δS`, the same kernel as a
/// functional-gradient-descent step with rate `dt/k`.
pub fn overdamped_step(
    s: &GridField,
    problem: &VariationalProblem,
    friction: &GridField,
    dt: f64,
) -> Result<(GridField, usize)> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    problem.check_candidate(s)?;
    if !s.same_lattice(friction) || friction.values().iter().any(|&k| !(k > 0.0)) {
        return Err(Error::invalid("friction must be positive on the allocation lattice"));
    }
    let k = friction.values();
    let (next, clamped) = gradient_step(problem, s.values(), &problem.multipliers, |c| dt / k[c]);
    Ok((s.with_values(next)?, clamped))
}

/// The `α = 1` limit: allocation is instantaneous, so the state is the static optimum at rest.
pub fn static_limit(problem: &VariationalProblem, init: &GridField, opts: SolveOptions) -> Result<PhaseState> {
    let sol = solve_static(problem, init, opts)?;
    PhaseState::at_rest(sol.s)
}

/// `∫ [(α−1)/α·|Π|^{α/(α−1)} + s·p·L(S) + Σ λ_i f_i(S)] dx` with the problem's multipliers.
pub fn energy(state: &PhaseState, problem: &VariationalProblem, transport: &TransportSpec) -> f64 {
    let a = transport.alpha;
    let vols = state.pi.cell_volumes();
    let kinetic: f64 = if a > 1.0 {
        state.pi.values().iter().zip(&vols).map(|(p, v)| (a - 1.0) / a * p.abs().powf(a / (a - 1.0)) * v).sum()
    } else {
        0.0
    };
    let s = state.s.values();
    let budget: f64 = problem
        .constraints
        .iter()
        .zip(&problem.multipliers)
        .map(|(c, l)| l * s.iter().zip(&vols).map(|(x, v)| c.value(*x) * v).sum::<f64>())
        .sum();
    kinetic + problem.sense.sign() * problem.expected_loss(s) + budget
}

/// Largest `|Π − (DS/Dt)^{α−1}|` over consecutive states of a trajectory.
pub fn verify_legendre(trajectory: &[PhaseState], transport: &TransportSpec) -> Result<f64> {
    let mut worst = 0.0f64;
    for w in trajectory.windows(2) {
        let ds = material_derivative(&w[1].s, &w[0].s, w[1].t - w[0].t, &transport.velocity)?;
        for (pi, d) in w[1].pi.values().iter().zip(ds.values()) {
            worst = worst.max((pi - signed_pow(*d, transport.alpha - 1.0)).abs());
        }
    }
    Ok(worst)
}
