//! Cost of allocating for `p` when events actually follow `q`.
//!
//! The allocation is the closed-form optimum `S^(p)`; the report compares
//! its expected cost under `p` and under `q`. For isotropic 2-D Gaussians
//! with the `S^{-1}` loss the cost share has a closed form on the plane,
//! `ρ = (σ_q/σ_p)² − 1`, finite only while `σ_q < √2·σ_p`.

use std::f64::consts::{PI, SQRT_2};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::domain::{sample_uniform_in_domain, AxisBox, BoxDomain, DensityField, VariationalProblem};
use crate::error::{Error, Result};
use crate::rng;
use crate::static_solver::analytic_power_optimum;
use crate::stats::PairMoments;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integration {
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    /// `⟨C^(p)⟩_p`.
    pub cost_p_under_p: f64,
    /// `⟨C^(p)⟩_q`.
    pub cost_p_under_q: f64,
    /// `⟨C^(p)⟩_q − ⟨C^(p)⟩_p`.
    pub opportunity: f64,
    /// `1 − ⟨C^(p)⟩_p / ⟨C^(p)⟩_q`; set to 1 when divergent.
    pub rho: f64,
    pub divergent: bool,
    /// Standard error of `rho` (Monte Carlo only).
    pub stderr: Option<f64>,
}

impl CostReport {
    fn new(cost_p: f64, cost_q: f64, stderr: Option<f64>) -> Self {
        let divergent = !cost_q.is_finite();
        let rho = if divergent { 1.0 } else { 1.0 - cost_p / cost_q };
        Self { cost_p_under_p: cost_p, cost_p_under_q: cost_q, opportunity: cost_q - cost_p, rho, divergent, stderr }
    }
}

const BATCH: usize = 1 << 16;

/// Seeded Monte Carlo over `n` samples in fixed-size batches with derived streams.
fn monte_carlo<F>(n: usize, seed: u64, label: &str, draw: F) -> PairMoments
where
    F: Fn(&mut rng::StreamRng) -> (f64, f64) + Sync,
{
    let batches = n.div_ceil(BATCH);
    let parts: Vec<PairMoments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, label, b as u64);
            let mut m = PairMoments::default();
            for _ in 0..BATCH.min(n - b * BATCH) {
                let (a, v) = draw(&mut r);
                m.push(a, v);
            }
            m
        })
        .collect();
    parts.into_iter().fold(PairMoments::default(), PairMoments::merge)
}

/// Expected costs of the closed-form optimum for `problem.density` under both densities.
///
/// `q` must share the lattice of `p`. Where `q > 0` but `p = 0` the
/// allocation vanishes and the cost under `q` is reported as divergent.
pub fn misspec_report(problem: &VariationalProblem, q: &DensityField, method: Integration) -> Result<CostReport> {
    let p = &problem.density;
    if !q.field().same_lattice(p.field()) {
        return Err(Error::invalid("p and q must share one lattice"));
    }
    let sol = analytic_power_optimum(problem)?;
    let s = sol.s.values();
    let loss: Vec<f64> =
        (0..s.len()).map(|c| if p.values()[c] > 0.0 { problem.loss.value(s[c], c) } else { f64::INFINITY }).collect();
    // cells without events get no allocation; zero density times that loss contributes nothing
    let term = |d: f64, l: f64| if d == 0.0 { 0.0 } else { d * l };
    match method {
        Integration::Quadrature => {
            let vols = p.field().cell_volumes();
            let cp: f64 = (0..s.len()).map(|c| term(p.values()[c], loss[c]) * vols[c]).sum();
            let cq: f64 = (0..s.len()).map(|c| term(q.values()[c], loss[c]) * vols[c]).sum();
            Ok(CostReport::new(cp, cq, None))
        }
        Integration::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::invalid("Monte Carlo needs at least two samples"));
            }
            let field = p.field();
            let volume = field.domain().volume();
            let m = monte_carlo(samples, seed, "misspec_report", |r| {
                let x = sample_uniform_in_domain(field.domain(), r);
                let c = field.locate(&x).expect("sample lies in the domain");
                (volume * term(p.values()[c], loss[c]), volume * term(q.values()[c], loss[c]))
            });
            if !m.mean_b.is_finite() {
                return Ok(CostReport::new(m.mean_a, f64::INFINITY, None));
            }
            let (ratio, se) = m.ratio();
            let mut rep = CostReport::new(m.mean_a, m.mean_b, Some(se));
            rep.rho = 1.0 - ratio;
            Ok(rep)
        }
    }
}

/// One row of a cost-share curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoPoint {
    /// `σ_q / σ_p`.
    pub ratio: f64,
    /// Closed form on the plane, otherwise the Monte Carlo estimate.
    pub rho: f64,
    pub stderr: Option<f64>,
    pub divergent: bool,
    /// Monte Carlo cross-check of the plane closed form.
    pub mc_rho: Option<f64>,
}

/// Region for [`gaussian_rho_curve`].
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Gaussians centred at the origin on all of ℝ².
    Plane,
    /// Gaussians centred at `center`, truncated to the boxes and renormalized.
    Compact { domain: BoxDomain, center: Vec<f64> },
}

impl Region {
    /// `[0.05, 0.45] × [0.05, 0.95] ∪ [0.55, 0.95] × [0.05, 0.95]`.
    pub fn default_compact_domain() -> BoxDomain {
        BoxDomain::new(vec![
            AxisBox::new(vec![0.05, 0.05], vec![0.45, 0.95]).expect("valid box"),
            AxisBox::new(vec![0.55, 0.05], vec![0.95, 0.95]).expect("valid box"),
        ])
        .expect("disjoint boxes")
    }

    /// Two disjoint boxes in the unit square, Gaussians centred at (0.5, 0.5).
    pub fn default_compact() -> Self {
        Region::Compact { domain: Self::default_compact_domain(), center: vec![0.5, 0.5] }
    }
}

/// `ρ = (σ_q/σ_p)² − 1` for the `S^{-1}` loss on the plane; `None` when `σ_q ≥ √2·σ_p`.
pub fn plane_rho(ratio: f64) -> Option<f64> {
    if ratio == 1.0 {
        return Some(0.0);
    }
    let r2 = ratio * ratio;
    if ratio >= SQRT_2 || r2 >= 2.0 {
        None
    } else {
        Some(r2 - 1.0)
    }
}

fn gauss2(r2: f64, var: f64) -> f64 {
    (-r2 / (2.0 * var)).exp() / (2.0 * PI * var)
}

fn ln_gauss2(r2: f64, var: f64) -> f64 {
    -r2 / (2.0 * var) - (2.0 * PI * var).ln()
}

/// Mass of an isotropic Gaussian inside a box.
fn box_mass(b: &AxisBox, center: &[f64], sigma: f64) -> f64 {
    (0..b.dims())
        .map(|j| {
            let z = |v: f64| (v - center[j]) / (sigma * SQRT_2);
            0.5 * (erf(z(b.upper[j])) - erf(z(b.lower[j])))
        })
        .product()
}

/// Cost share `ρ` of the `S^{-1}` optimum for a Gaussian `p` (width `σ_p`)
/// under wider Gaussians `q = σ_p·ratio`.
///
/// On the plane the closed form is used and, when `n_mc > 0`, cross-checked
/// by importance sampling from a Gaussian of variance `1/(3a)` with
/// `a = 1/(2σ_q²) − 1/(4σ_p²)`. On a compact region the estimate is Monte
/// Carlo with uniform sampling over the boxes.
pub fn gaussian_rho_curve(
    sigma_p: f64,
    ratios: &[f64],
    region: &Region,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<RhoPoint>> {
    if !(sigma_p > 0.0) {
        return Err(Error::invalid("σ_p must be positive"));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r >= 1.0 && r.is_finite())) {
        return Err(Error::invalid(format!("ratio {r} must be at least 1")));
    }
    ratios
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let sigma_q = sigma_p * ratio;
            let (vp, vq) = (sigma_p * sigma_p, sigma_q * sigma_q);
            match region {
                Region::Plane => {
                    let Some(rho) = plane_rho(ratio) else {
                        return Ok(RhoPoint { ratio, rho: 1.0, stderr: None, divergent: true, mc_rho: None });
                    };
                    if n_mc < 2 || ratio == 1.0 {
                        return Ok(RhoPoint { ratio, rho, stderr: None, divergent: false, mc_rho: None });
                    }
                    let a = 1.0 / (2.0 * vq) - 1.0 / (4.0 * vp);
                    let vs = 1.0 / (3.0 * a);
                    let m = monte_carlo(n_mc, seed, &format!("rho_plane/{i}"), |r| {
                        let x: f64 = StandardNormal.sample(r);
                        let y: f64 = StandardNormal.sample(r);
                        let r2 = (x * x + y * y) * vs;
                        // log space: far-out draws underflow √p long before the ratio does
                        let ln_w = -ln_gauss2(r2, vs);
                        let ln_sp = 0.5 * ln_gauss2(r2, vp);
                        ((ln_sp + ln_w).exp(), (ln_gauss2(r2, vq) - ln_sp + ln_w).exp())
                    });
                    let (q, se) = m.ratio();
                    Ok(RhoPoint { ratio, rho, stderr: Some(se), divergent: false, mc_rho: Some(1.0 - q) })
                }
                Region::Compact { domain, center } => {
                    if ratio == 1.0 {
                        return Ok(RhoPoint { ratio, rho: 0.0, stderr: None, divergent: false, mc_rho: None });
                    }
                    if n_mc < 2 {
                        return Err(Error::invalid("compact regions need Monte Carlo samples"));
                    }
                    let zp: f64 = domain.boxes().iter().map(|b| box_mass(b, center, sigma_p)).sum();
                    let zq: f64 = domain.boxes().iter().map(|b| box_mass(b, center, sigma_q)).sum();
                    let volume = domain.volume();
                    let m = monte_carlo(n_mc, seed, &format!("rho_compact/{i}"), |r| {
                        let x = sample_uniform_in_domain(domain, r);
                        let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum();
                        let sp = (gauss2(r2, vp) / zp).sqrt();
                        (volume * sp, volume * gauss2(r2, vq) / zq / sp)
                    });
                    let (q, se) = m.ratio();
                    Ok(RhoPoint { ratio, rho: 1.0 - q, stderr: Some(se), divergent: false, mc_rho: Some(1.0 - q) })
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{normalize_density, GridField, LossFamily};

    fn cells(values: Vec<f64>) -> DensityField {
        let n = values.len();
        let dom = BoxDomain::single(AxisBox::new(vec![0.0], vec![n as f64]).unwrap());
        DensityField::new(GridField::new(dom, vec![vec![n]], values).unwrap()).unwrap()
    }

    fn hot(p: DensityField, k: f64) -> VariationalProblem {
        VariationalProblem::budgeted(p, LossFamily::PowerLaw { gamma: 1.0 }, k).unwrap()
    }

    #[test]
    fn near_threshold_estimate_stays_finite() {
        let pts = gaussian_rho_curve(1.0, &[1.41], &Region::Plane, 200_000, 4).unwrap();
        let (mc, se) = (pts[0].mc_rho.unwrap(), pts[0].stderr.unwrap());
        assert!(mc.is_finite() && se > 0.0);
        assert!((mc - pts[0].rho).abs() <= 4.0 * se);
    }

    #[test]
    fn same_density_costs_nothing_extra() {
        let p = cells(vec![0.2, 0.3, 0.5]);
        let r = misspec_report(&hot(p.clone(), 1.0), &p, Integration::Quadrature).unwrap();
        assert_eq!(r.opportunity, 0.0);
        assert_eq!(r.rho, 0.0);
    }

    #[test]
    fn symmetric_two_cell_coincidence() {
        let r =
            misspec_report(&hot(cells(vec![0.5, 0.5]), 1.0), &cells(vec![0.8, 0.2]), Integration::Quadrature).unwrap();
        assert!((r.cost_p_under_p - 2.0).abs() < 1e-12);
        assert!((r.cost_p_under_q - 2.0).abs() < 1e-12);
        assert!(r.opportunity.abs() < 1e-12);
    }

    #[test]
    fn asymmetric_three_cell_sum() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.3, 0.5];
        let r = misspec_report(&hot(cells(p.to_vec()), 2.0), &cells(q.to_vec()), Integration::Quadrature).unwrap();
        // direct finite sums with S = K √p / Σ√p
        let z: f64 = p.iter().map(|v| v.sqrt()).sum();
        let s: Vec<f64> = p.iter().map(|v| 2.0 * v.sqrt() / z).collect();
        let cp: f64 = (0..3).map(|i| p[i] / s[i]).sum();
        let cq: f64 = (0..3).map(|i| q[i] / s[i]).sum();
        assert!((r.cost_p_under_p - cp).abs() < 1e-12);
        assert!((r.cost_p_under_q - cq).abs() < 1e-12);
        assert!((r.rho - (1.0 - cp / cq)).abs() < 1e-12);
        assert_eq!(r.opportunity, r.cost_p_under_q - r.cost_p_under_p);
    }

    #[test]
    fn unsupported_events_diverge() {
        let r =
            misspec_report(&hot(cells(vec![1.0, 0.0]), 1.0), &cells(vec![0.5, 0.5]), Integration::Quadrature).unwrap();
        assert!(r.divergent);
        assert_eq!(r.rho, 1.0);
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let f =
            GridField::from_fn(Region::default_compact_domain(), vec![vec![8, 8]; 2], |x| 1.0 + x[0] * x[1]).unwrap();
        let g = GridField::from_fn(Region::default_compact_domain(), vec![vec![8, 8]; 2], |x| 2.0 - x[0]).unwrap();
        let (p, q) = (normalize_density(&f).unwrap(), normalize_density(&g).unwrap());
        let prob = hot(p, 1.0);
        let exact = misspec_report(&prob, &q, Integration::Quadrature).unwrap();
        let mc = misspec_report(&prob, &q, Integration::MonteCarlo { samples: 200_000, seed: 7 }).unwrap();
        let se = mc.stderr.unwrap();
        assert!((mc.rho - exact.rho).abs() <= 3.0 * se, "{} vs {} ± {se}", mc.rho, exact.rho);
    }

    #[test]
    fn plane_closed_form_and_divergence() {
        assert_eq!(plane_rho(1.0), Some(0.0));
        assert!(plane_rho(SQRT_2).is_none());
        assert!(plane_rho(1.5).is_none());
        let r = plane_rho(1.2).unwrap();
        assert!(r > 0.0 && r < 1.0);
    }

    #[test]
    fn plane_rho_matches_polar_quadrature() {
        // oracle: radial midpoint quadrature of ∫√p and ∫q/√p in polar coordinates
        let (sp, ratio) = (0.7, 1.25);
        let sq = sp * ratio;
        let (mut i1, mut i2) = (0.0, 0.0);
        let dr = 1e-4;
        for k in 0..120_000 {
            let r = (k as f64 + 0.5) * dr;
            let p = gauss2(r * r, sp * sp);
            i1 += p.sqrt() * 2.0 * PI * r * dr;
            i2 += gauss2(r * r, sq * sq) / p.sqrt() * 2.0 * PI * r * dr;
        }
        assert!((plane_rho(ratio).unwrap() - (1.0 - i1 / i2)).abs() < 1e-8);
    }

    #[test]
    fn plane_monte_carlo_cross_check() {
        let pts = gaussian_rho_curve(0.5, &[1.1, 1.2, 1.3], &Region::Plane, 200_000, 3).unwrap();
        for p in pts {
            let se = p.stderr.unwrap();
            assert!((p.mc_rho.unwrap() - p.rho).abs() <= 3.0 * se, "{p:?}");
        }
    }

    #[test]
    fn compact_curve_is_finite_and_increasing() {
        let pts = gaussian_rho_curve(0.5, &[1.0, 1.5, 2.0, 3.0], &Region::default_compact(), 100_000, 5).unwrap();
        assert_eq!(pts[0].rho, 0.0);
        for w in pts.windows(2) {
            let tol = 3.0 * (w[0].stderr.unwrap_or(0.0) + w[1].stderr.unwrap_or(0.0));
            assert!(w[1].rho >= w[0].rho - tol);
            assert!(!w[1].divergent && w[1].rho < 1.0);
        }
    }

    #[test]
    fn rejects_ratios_below_one() {
        assert!(gaussian_rho_curve(1.0, &[0.9], &Region::Plane, 0, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn plane_rho_monotone(a in 1.0f64..1.414, b in 1.0f64..1.414) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(plane_rho(lo).unwrap() <= plane_rho(hi).unwrap());
        }
    }
}
