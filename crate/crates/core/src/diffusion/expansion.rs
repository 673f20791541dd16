use std::f64::consts::PI;

use crate::domain::{AxisBox, BoxDomain, DensityField, GridField};
use crate::error::{Error, Result};

/// Truncated cosine series of a field on one box.
///
/// `f(x) = Σ_k a_k Π_j cos(π k_j (x_j − l_j) / L_j)`; coefficients are stored
/// with the first axis slowest, like lattice cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineExpansion {
    bounds: AxisBox,
    /// Lattice the expansion was taken from, used for reconstruction.
    resolution: Vec<usize>,
    modes: Vec<usize>,
    coeffs: Vec<f64>,
}

/// `out[i] = Σ_k m[i][k] · data[.., k, ..]` along one axis of a row-major tensor.
fn apply_axis(data: &[f64], shape: &[usize], axis: usize, matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let n_in = shape[axis];
    let n_out = matrix.len();
    let mut out = vec![0.0; outer * n_out * inner];
    for o in 0..outer {
        for (i, row) in matrix.iter().enumerate() {
            let dst = &mut out[(o * n_out + i) * inner..(o * n_out + i + 1) * inner];
            for (k, &w) in row.iter().enumerate().take(n_in) {
                if w == 0.0 {
                    continue;
                }
                let src = &data[(o * n_in + k) * inner..(o * n_in + k + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = n_out;
    (out, new_shape)
}

fn single_box(field: &GridField) -> Result<(AxisBox, Vec<usize>)> {
    match (field.domain().boxes(), field.resolution()) {
        ([b], [res]) => Ok((b.clone(), res.clone())),
        _ => Err(Error::invalid("cosine expansion of a multi-box domain: expand per box")),
    }
}

/// Cosine coefficients of an arbitrary lattice field, `modes` per axis.
pub fn cosine_expand_field(field: &GridField, modes: usize) -> Result<CosineExpansion> {
    let (bounds, resolution) = single_box(field)?;
    if modes == 0 {
        return Err(Error::invalid("at least one cosine mode is required"));
    }
    if let Some(&n) = resolution.iter().find(|&&n| modes > n) {
        return Err(Error::invalid(format!("{modes} modes exceed the lattice resolution {n}")));
    }
    let mut data = field.values().to_vec();
    let mut shape = resolution.clone();
    for (axis, &n) in resolution.iter().enumerate() {
        // discrete cosine transform at cell centres
        let matrix: Vec<Vec<f64>> = (0..modes)
            .map(|k| {
                let norm = if k == 0 { 1.0 } else { 2.0 } / n as f64;
                (0..n).map(|i| norm * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()).collect()
            })
            .collect();
        (data, shape) = apply_axis(&data, &shape, axis, &matrix);
    }
    Ok(CosineExpansion { bounds, resolution, modes: shape, coeffs: data })
}

/// Cosine coefficients of a density on a single box.
pub fn cosine_expand(p: &DensityField, modes: usize) -> Result<CosineExpansion> {
    cosine_expand_field(p.field(), modes)
}

impl CosineExpansion {
    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn bounds(&self) -> &AxisBox {
        &self.bounds
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, k: &[usize]) -> f64 {
        let mut flat = 0;
        for (j, &kj) in k.iter().enumerate() {
            flat = flat * self.modes[j] + kj;
        }
        self.coeffs[flat]
    }

    fn decay(&self, axis: usize, k: usize, t: f64) -> f64 {
        let w = PI * k as f64 / self.bounds.extent(axis);
        (-w * w * t).exp()
    }

    /// Modes per axis whose decay factor at time `t` still matters.
    fn active(&self, t: f64) -> Vec<usize> {
        (0..self.modes.len())
            .map(|j| (1..self.modes[j]).find(|&k| self.decay(j, k, t) < 1e-17).unwrap_or(self.modes[j]))
            .collect()
    }

    /// Sum of `a_k Π_j v_j[k_j]` over the active modes.
    fn contract(&self, vecs: &[Vec<f64>], active: &[usize]) -> f64 {
        fn rec(
            coeffs: &[f64],
            modes: &[usize],
            vecs: &[Vec<f64>],
            active: &[usize],
            axis: usize,
            offset: usize,
        ) -> f64 {
            let stride: usize = modes[axis + 1..].iter().product();
            if axis + 1 == modes.len() {
                return (0..active[axis]).map(|k| coeffs[offset + k] * vecs[axis][k]).sum();
            }
            (0..active[axis])
                .map(|k| vecs[axis][k] * rec(coeffs, modes, vecs, active, axis + 1, offset + k * stride))
                .sum()
        }
        rec(&self.coeffs, &self.modes, vecs, active, 0, 0)
    }

    fn basis(&self, x: &[f64], t: f64, active: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut cos = Vec::with_capacity(x.len());
        let mut dcos = Vec::with_capacity(x.len());
        for (j, &xj) in x.iter().enumerate() {
            let l = self.bounds.extent(j);
            let u = xj - self.bounds.lower[j];
            let (mut c, mut d) = (Vec::with_capacity(active[j]), Vec::with_capacity(active[j]));
            for k in 0..active[j] {
                let w = PI * k as f64 / l;
                let g = self.decay(j, k, t);
                c.push(g * (w * u).cos());
                d.push(-g * w * (w * u).sin());
            }
            cos.push(c);
            dcos.push(d);
        }
        (cos, dcos)
    }

    /// Value of the diffused series at `x`, time `t`.
    pub fn evaluate(&self, x: &[f64], t: f64) -> f64 {
        let active = self.active(t);
        let (cos, _) = self.basis(x, t, &active);
        self.contract(&cos, &active)
    }

    /// Value and spatial gradient of the diffused series at `x`, time `t`.
    pub fn value_and_gradient(&self, x: &[f64], t: f64) -> (f64, Vec<f64>) {
        let active = self.active(t);
        let (cos, dcos) = self.basis(x, t, &active);
        let value = self.contract(&cos, &active);
        let grad = (0..x.len())
            .map(|j| {
                let mut v = cos.clone();
                v[j] = dcos[j].clone();
                self.contract(&v, &active)
            })
            .collect();
        (value, grad)
    }

    /// Diffused series at the centres of the original lattice.
    pub fn reconstruct(&self, t: f64) -> Result<GridField> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("diffusion time must be non-negative, got {t}")));
        }
        let mut data: Vec<f64> = self.coeffs.clone();
        let mut shape = self.modes.clone();
        for (axis, &n) in self.resolution.iter().enumerate() {
            let matrix: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..self.modes[axis])
                        .map(|k| self.decay(axis, k, t) * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos())
                        .collect()
                })
                .collect();
            (data, shape) = apply_axis(&data, &shape, axis, &matrix);
        }
        GridField::new(BoxDomain::single(self.bounds.clone()), vec![self.resolution.clone()], data)
    }
}

/// Heat flow of an arbitrary field for time `t` with zero-flux walls.
pub fn heat_evolve_field(expansion: &CosineExpansion, t: f64) -> Result<GridField> {
    expansion.reconstruct(t)
}

/// The density `q(·, t)` obtained by diffusing for time `t`.
///
/// Mass is conserved exactly by the series; small negative values left by a
/// truncated series are cut to zero and the result renormalized.
pub fn heat_evolve(expansion: &CosineExpansion, t: f64) -> Result<DensityField> {
    let q = expansion.reconstruct(t)?;
    if q.values().iter().all(|&v| v >= 0.0) {
        if let Ok(d) = DensityField::new(q.clone()) {
            return Ok(d);
        }
    }
    crate::domain::normalize_density(&q.map(|v| v.max(0.0))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{integrate, normalize_density};
    use rand::{Rng, SeedableRng};

    fn random_density(seed: u64, res: Vec<usize>) -> DensityField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dims = res.len();
        let f = GridField::from_fn(BoxDomain::unit(dims), vec![res], |_| rng.random_range(0.1..1.0)).unwrap();
        normalize_density(&f).unwrap()
    }

    #[test]
    fn uniform_density_has_only_dc() {
        let p = normalize_density(&GridField::constant(BoxDomain::unit(2), vec![vec![6, 4]], 2.0).unwrap()).unwrap();
        let e = cosine_expand(&p, 4).unwrap();
        assert!((e.coefficient(&[0, 0]) - 1.0).abs() < 1e-14);
        assert!(e.coefficients()[1..].iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn single_cosine_mode() {
        let f = GridField::from_fn(BoxDomain::unit(1), vec![vec![32]], |x| 1.0 + 0.5 * (PI * x[0]).cos()).unwrap();
        let p = DensityField::new(f).unwrap();
        let e = cosine_expand(&p, 8).unwrap();
        assert!((e.coefficient(&[0]) - 1.0).abs() < 1e-13);
        assert!((e.coefficient(&[1]) - 0.5).abs() < 1e-13);
        for k in 2..8 {
            assert!(e.coefficient(&[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn full_round_trip_is_exact() {
        let q = random_density(4, vec![8, 8]);
        let eq = cosine_expand(&q, 8).unwrap();
        let back = heat_evolve(&eq, 0.0).unwrap();
        for (a, b) in back.values().iter().zip(q.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn truncated_series_keeps_mass() {
        let p = random_density(3, vec![7, 9]);
        let e = cosine_expand(&p, 3).unwrap();
        assert!((integrate(heat_evolve(&e, 0.0).unwrap().field()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mode_decay_factor() {
        let f = GridField::from_fn(BoxDomain::unit(1), vec![vec![64]], |x| 1.0 + 0.5 * (PI * x[0]).cos()).unwrap();
        let e = cosine_expand(&DensityField::new(f).unwrap(), 64).unwrap();
        let q = heat_evolve(&e, 0.1).unwrap();
        let back = cosine_expand(&q, 4).unwrap();
        assert!((back.coefficient(&[1]) - 0.5 * (-PI * PI * 0.1).exp()).abs() < 1e-12);
    }

    #[test]
    fn pointwise_evaluation_matches_lattice() {
        let p = random_density(5, vec![6, 6]);
        let e = cosine_expand(&p, 6).unwrap();
        for t in [0.0, 0.01, 0.2] {
            let q = heat_evolve_field(&e, t).unwrap();
            for c in 0..q.len() {
                assert!((e.evaluate(&q.cell_center(c), t) - q.values()[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = random_density(6, vec![8, 8]);
        let e = cosine_expand(&p, 8).unwrap();
        let x = [0.31, 0.67];
        let (_, g) = e.value_and_gradient(&x, 0.003);
        for j in 0..2 {
            let h = 1e-6;
            let (mut a, mut b) = (x, x);
            a[j] += h;
            b[j] -= h;
            let fd = (e.evaluate(&a, 0.003) - e.evaluate(&b, 0.003)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()), "{fd} vs {}", g[j]);
        }
    }

    #[test]
    fn errors() {
        let p = random_density(1, vec![4]);
        let e = cosine_expand(&p, 4).unwrap();
        assert!(heat_evolve(&e, -1.0).is_err());
        assert!(cosine_expand(&p, 5).is_err());
        let two = BoxDomain::new(vec![
            AxisBox::new(vec![0.0], vec![1.0]).unwrap(),
            AxisBox::new(vec![2.0], vec![3.0]).unwrap(),
        ])
        .unwrap();
        let f = GridField::constant(two, vec![vec![4], vec![4]], 0.5).unwrap();
        let err = cosine_expand(&DensityField::new(f).unwrap(), 2).unwrap_err();
        assert!(err.to_string().contains("expand per box"));
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(32))]
        #[test]
        fn mass_conserved_and_uniformization_monotone(seed in 0u64..10_000) {
            let p = random_density(seed, vec![8, 8]);
            let e = cosine_expand(&p, 8).unwrap();
            let mut last = f64::INFINITY;
            for t in [0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 1.0] {
                let q = heat_evolve(&e, t).unwrap();
                proptest::prop_assert!((integrate(q.field()) - 1.0).abs() <= 1e-9);
                let dist = q.values().iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
                proptest::prop_assert!(dist <= last + 1e-12);
                last = dist;
            }
        }
    }
}
