use super::graph::UGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Weight `d` of the new iterate in `S ← (1−d)·S + d·update`.
    pub damping: f64,
    /// Target relative sup-change between sweeps.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-10, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFixedPoint {
    pub s: Vec<f64>,
    pub sweeps: usize,
    /// Largest relative violation of the scaling relation, `|S_i − T_i(S)| / S_i`.
    pub residual: f64,
}

/// `Σ_e p_e · S_u^{−γ_u} · S_v^{−γ_v}` over undirected edges `e = (u, v)`.
pub fn hot_node_objective(g: &UGraph, joint: &[f64], gamma: &[f64], s: &[f64]) -> f64 {
    g.edges().iter().zip(joint).map(|(&(u, v), p)| p * s[u].powf(-gamma[u]) * s[v].powf(-gamma[v])).sum()
}

/// The scaling relation `T_i(S) = (γ_i·Σ_j p_ij S_j^{−γ_j} / λ)^{1/(γ_i+1)}`,
/// with `λ` fixed by `Σ_i T_i = K`.
fn scaling_update(g: &UGraph, joint: &[f64], gamma: &[f64], s: &[f64], budget: f64) -> Vec<f64> {
    let drive: Vec<f64> = (0..g.node_count())
        .map(|i| gamma[i] * g.neighbours(i).iter().map(|&(j, e)| joint[e] * s[j].powf(-gamma[j])).sum::<f64>())
        .collect();
    let at = |ln_lambda: f64| -> Vec<f64> {
        drive.iter().zip(gamma).map(|(a, g)| ((a.ln() - ln_lambda) / (g + 1.0)).exp()).collect()
    };
    let total = |ln_lambda: f64| at(ln_lambda).iter().sum::<f64>();
    // Σ T_i falls monotonically in λ; bracket then bisect in ln λ
    let (mut lo, mut hi) = (-1.0, 1.0);
    while total(lo) < budget {
        lo -= 2.0 * (1.0 + lo.abs());
    }
    while total(hi) > budget {
        hi += 2.0 * (1.0 + hi.abs());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    let mut t = at(0.5 * (lo + hi));
    let z: f64 = t.iter().sum();
    for v in &mut t {
        *v *= budget / z;
    }
    t
}

fn relative_residual(s: &[f64], t: &[f64]) -> f64 {
    s.iter().zip(t).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max)
}

/// Node allocation of the HOT-on-networks model by damped fixed-point iteration.
///
/// `joint` holds the event probability of each undirected edge (summing to
/// one) and `gamma` the exponent of each node. The iterate is renormalized
/// to `Σ S_i = K` after every sweep.
pub fn hot_node_fixed_point(
    g: &UGraph,
    joint: &[f64],
    gamma: &[f64],
    budget: f64,
    opts: FixedPointOptions,
) -> Result<NodeFixedPoint> {
    let n = g.node_count();
    if joint.len() != g.edge_count() || gamma.len() != n {
        return Err(Error::invalid("one probability per edge and one exponent per node required"));
    }
    if joint.iter().any(|p| !(*p >= 0.0)) || (joint.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("edge probabilities must be non-negative and sum to 1"));
    }
    if gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) || !(budget > 0.0) {
        return Err(Error::invalid("exponents and budget must be positive"));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) || !(opts.tol > 0.0) {
        return Err(Error::invalid("damping must lie in (0, 1] and tolerance be positive"));
    }
    if let Some(i) = (0..n).find(|&i| g.neighbours(i).iter().all(|&(_, e)| joint[e] == 0.0)) {
        return Err(Error::invalid(format!("node {i} touches no edge with positive probability")));
    }
    let mut s = vec![budget / n as f64; n];
    let mut residual = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let t = scaling_update(g, joint, gamma, &s, budget);
        residual = relative_residual(&s, &t);
        if residual <= opts.tol {
            return Ok(NodeFixedPoint { s, sweeps: sweep - 1, residual });
        }
        let mut next: Vec<f64> = s.iter().zip(&t).map(|(a, b)| (1.0 - opts.damping) * a + opts.damping * b).collect();
        let z: f64 = next.iter().sum();
        for v in &mut next {
            *v *= budget / z;
        }
        s = next;
    }
    Err(Error::NonConvergence { iterations: opts.max_sweeps, residual })
}
