use rayon::prelude::*;

use super::expansion::{cosine_expand, CosineExpansion};
use crate::domain::{AxisBox, DensityField};
use crate::error::{Error, Result};

fn velocity(e: &CosineExpansion, x: &[f64], t: f64) -> Vec<f64> {
    let (q, g) = e.value_and_gradient(x, t);
    let q = q.max(1e-12);
    g.into_iter().map(|d| -d / q).collect()
}

fn reflect(x: &mut [f64], b: &AxisBox) {
    for (j, v) in x.iter_mut().enumerate() {
        let (lo, hi) = (b.lower[j], b.upper[j]);
        // fold into the box; a single wall crossing is the common case
        for _ in 0..8 {
            if *v < lo {
                *v = 2.0 * lo - *v;
            } else if *v > hi {
                *v = 2.0 * hi - *v;
            } else {
                break;
            }
        }
        *v = v.clamp(lo, hi);
    }
}

fn axpy(x: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(x, v)| x + a * v).collect()
}

/// Carries points along the flux velocity `v = −∇q/q` of the diffusing density.
///
/// Classical RK4 on the time grid `t_k = t_final·(k/steps)²`, which is finer
/// early on where `q` still has sharp features. Points leaving the box are
/// reflected back in.
pub fn transform_points(p: &DensityField, points: &[Vec<f64>], t_final: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    if !(t_final >= 0.0) || steps == 0 {
        return Err(Error::invalid("need t_final ≥ 0 and at least one step"));
    }
    let modes = p.field().resolution().iter().flatten().copied().min().unwrap_or(1);
    let e = cosine_expand(p, modes)?;
    let bounds = e.bounds().clone();
    if let Some(i) = points.iter().position(|x| x.len() != bounds.dims() || !bounds.contains(x)) {
        return Err(Error::invalid(format!("point {i} lies outside the domain")));
    }
    let times: Vec<f64> = (0..=steps).map(|k| t_final * (k as f64 / steps as f64).powi(2)).collect();
    let out = points
        .par_iter()
        .map(|x0| {
            let mut x = x0.clone();
            for w in times.windows(2) {
                let (t, h) = (w[0], w[1] - w[0]);
                let k1 = velocity(&e, &x, t);
                let k2 = velocity(&e, &axpy(&x, 0.5 * h, &k1), t + 0.5 * h);
                let k3 = velocity(&e, &axpy(&x, 0.5 * h, &k2), t + 0.5 * h);
                let k4 = velocity(&e, &axpy(&x, h, &k3), t + h);
                for j in 0..x.len() {
                    x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
                reflect(&mut x, &bounds);
            }
            x
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{normalize_density, sample_density, BoxDomain, GridField};

    fn bump(res: usize) -> DensityField {
        let f = GridField::from_fn(BoxDomain::unit(2), vec![vec![res, res]], |x| {
            (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / (2.0 * 0.2 * 0.2)).exp()
        })
        .unwrap();
        normalize_density(&f).unwrap()
    }

    #[test]
    fn uniform_density_leaves_points_alone() {
        let p = normalize_density(&GridField::constant(BoxDomain::unit(2), vec![vec![8, 8]], 1.0).unwrap()).unwrap();
        let pts = vec![vec![0.1, 0.2], vec![0.7, 0.95]];
        let out = transform_points(&p, &pts, 0.5, 20).unwrap();
        for (a, b) in out.iter().flatten().zip(pts.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_symmetric_density_gives_mirrored_paths() {
        let p = bump(16);
        let pts = vec![vec![0.2, 0.3], vec![0.8, 0.3], vec![0.2, 0.7], vec![0.8, 0.7]];
        let out = transform_points(&p, &pts, 0.2, 40).unwrap();
        assert!((out[0][0] - (1.0 - out[1][0])).abs() < 1e-9);
        assert!((out[0][1] - out[1][1]).abs() < 1e-9);
        assert!((out[0][1] - (1.0 - out[2][1])).abs() < 1e-9);
        assert!((out[3][0] - (1.0 - out[2][0])).abs() < 1e-9);
    }

    #[test]
    fn binned_distance_to_uniform_shrinks() {
        let p = bump(16);
        let pts = sample_density(&p, 4000, 9).unwrap();
        let l1 = |t: f64| {
            let out = transform_points(&p, &pts, t, 60).unwrap();
            let mut counts = [0usize; 25];
            for x in &out {
                let i = ((x[0] * 5.0) as usize).min(4);
                let j = ((x[1] * 5.0) as usize).min(4);
                counts[i * 5 + j] += 1;
            }
            counts.iter().map(|&c| (c as f64 / out.len() as f64 - 0.04).abs()).sum::<f64>()
        };
        let (a, b, c) = (l1(0.0), l1(0.1), l1(0.5));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn rejects_outside_points() {
        assert!(transform_points(&bump(4), &[vec![1.5, 0.5]], 0.1, 4).is_err());
    }
}
