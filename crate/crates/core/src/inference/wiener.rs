use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// `dX = μ dt + σ dW` started at `x0` at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerSpec {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl WienerSpec {
    pub fn new(mu: f64, sigma: f64, x0: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() || !x0.is_finite() {
            return Err(Error::invalid("Wiener process needs finite drift and start, positive volatility"));
        }
        Ok(Self { mu, sigma, x0 })
    }
}

/// Transition density of the process at `(x, t)`; zero for `t ≤ 0`.
pub fn wiener_density(spec: &WienerSpec, x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let var = spec.sigma * spec.sigma * t;
    let d = x - spec.x0 - spec.mu * t;
    (-d * d / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRecord {
    pub path: usize,
    pub t: f64,
    pub x: f64,
}

/// Exact-increment paths recorded at `t = dt, 2dt, …, n·dt` with `n = round(T/dt)`.
///
/// Each path draws from its own stream derived from `seed`, so results do
/// not depend on thread scheduling. Records are grouped by path.
pub fn wiener_sample_paths(
    spec: &WienerSpec,
    n_paths: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<PathRecord>> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("time step and horizon must be positive"));
    }
    let steps = ((horizon / dt).round() as usize).max(1);
    let scale = spec.sigma * dt.sqrt();
    let records = (0..n_paths)
        .into_par_iter()
        .flat_map_iter(|path| {
            let mut rng = rng::stream(seed, "wiener_path", path as u64);
            let mut x = spec.x0;
            (1..=steps)
                .map(move |k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x += spec.mu * dt + scale * z;
                    PathRecord { path, t: k as f64 * dt, x }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(records)
}
