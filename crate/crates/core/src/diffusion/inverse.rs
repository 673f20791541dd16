use super::expansion::{cosine_expand, heat_evolve};
use crate::domain::{AxisBox, DensityField, GridField};
use crate::error::{Error, Result};

/// Candidate response model `Y ≈ c·p^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    pub exponent: f64,
}

/// Outcome of [`inverse_select`]: the winning pair and every score.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub density: usize,
    pub model: usize,
    /// `norms[i][j]` for density `i` and model `j`.
    pub norms: Vec<Vec<f64>>,
    /// Least-squares scale `c` per pair.
    pub scales: Vec<Vec<f64>>,
}

/// Diffusion horizon used for selection: `0.5·L²` with `L` the longest side.
pub fn diffusion_time(bounds: &AxisBox) -> f64 {
    let l = (0..bounds.dims()).map(|j| bounds.extent(j)).fold(0.0, f64::max);
    0.5 * l * l
}

/// Sum of absolute forward differences along every axis of a single-box field.
pub fn gradient_l1_norm(field: &GridField) -> Result<f64> {
    let [res] = field.resolution() else {
        return Err(Error::invalid("gradient norm needs a single-box field"));
    };
    let v = field.values();
    let mut total = 0.0;
    for c in 0..v.len() {
        let (_, idx) = field.cell_index(c);
        for j in 0..res.len() {
            if idx[j] + 1 < res[j] {
                let mut next = idx.clone();
                next[j] += 1;
                total += (v[field.flat_index(0, &next)] - v[c]).abs();
            }
        }
    }
    Ok(total)
}

fn signed_pow(x: f64, e: f64) -> f64 {
    x.signum() * x.abs().powf(e)
}

fn score(y: &GridField, p: &DensityField, q: &DensityField, model: PowerModel) -> (f64, f64) {
    let e = model.exponent;
    let basis: Vec<f64> = p.values().iter().map(|v| v.powf(e)).collect();
    let den: f64 = basis.iter().map(|b| b * b).sum();
    let c = y.values().iter().zip(&basis).map(|(y, b)| y * b).sum::<f64>() / den;
    if !(c.is_finite() && c != 0.0) {
        return (c, f64::INFINITY);
    }
    let w: Vec<f64> = y
        .values()
        .iter()
        .zip(p.values())
        .zip(q.values())
        .map(|((y, p), q)| if *p > 0.0 { signed_pow(y / c, 1.0 / e) * q / p } else { 0.0 })
        .collect();
    let norm = y.with_values(w).and_then(|w| gradient_l1_norm(&w)).unwrap_or(f64::INFINITY);
    (c, norm)
}

/// Picks the density and power model that best explain an observed response.
///
/// For each pair the scale `c` is fitted by least squares, the implied
/// density `(Y/c)^{1/e}` is carried into the coordinates where the
/// candidate diffuses to uniform (Jacobian `q(·,t)/p`), and the result is
/// scored by its lattice gradient L1 norm. The smallest score wins; ties go
/// to the lexicographically smallest `(density, model)`.
pub fn inverse_select(y: &GridField, candidates: &[DensityField], models: &[PowerModel]) -> Result<Selection> {
    if candidates.is_empty() || models.is_empty() {
        return Err(Error::invalid("inverse selection needs at least one density and one model"));
    }
    if let Some(m) = models.iter().find(|m| !(m.exponent.is_finite() && m.exponent != 0.0)) {
        return Err(Error::invalid(format!("model exponent {} is not usable", m.exponent)));
    }
    let mut norms = Vec::with_capacity(candidates.len());
    let mut scales = Vec::with_capacity(candidates.len());
    for (i, p) in candidates.iter().enumerate() {
        if !p.field().same_lattice(y) {
            return Err(Error::invalid(format!("candidate {i} is on a different lattice than the response")));
        }
        let modes = p.field().resolution()[0].iter().copied().min().unwrap_or(1);
        let e = cosine_expand(p, modes)?;
        let q = heat_evolve(&e, diffusion_time(e.bounds()))?;
        let (c, n): (Vec<f64>, Vec<f64>) = models.iter().map(|&m| score(y, p, &q, m)).unzip();
        scales.push(c);
        norms.push(n);
    }
    let mut best = (0, 0);
    for (i, row) in norms.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            if n < norms[best.0][best.1] {
                best = (i, j);
            }
        }
    }
    Ok(Selection { density: best.0, model: best.1, norms, scales })
}
