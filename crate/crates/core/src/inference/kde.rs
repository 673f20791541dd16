use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default `c` in `h = c·N^{-1/3}`.
pub const DEFAULT_BANDWIDTH_SCALE: f64 = 0.5;

/// Kernel variance for `n` observed paths: `scale·n^{-1/3}`.
pub fn bandwidth_schedule(n: usize, scale: f64) -> Result<f64> {
    if n == 0 || !(scale > 0.0) {
        return Err(Error::invalid("bandwidth schedule needs n ≥ 1 and a positive scale"));
    }
    Ok(scale * (n as f64).powf(-1.0 / 3.0))
}

/// Gaussian kernel estimate over pooled `(x, t)` samples.
///
/// `h` is the kernel variance on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeKDE {
    samples: Vec<(f64, f64)>,
    h: f64,
}

/// Beyond this many kernel variances a term is below 1e-35 of the peak and skipped.
const CUTOFF: f64 = 160.0;
const SUM_CHUNK: usize = 4096;

impl SpacetimeKDE {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self { samples: Vec::new(), h })
    }

    pub fn with_samples(h: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        let mut kde = Self::new(h)?;
        kde.samples = samples;
        Ok(kde)
    }

    pub fn insert(&mut self, x: f64, t: f64) {
        self.samples.push((x, t));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    fn check(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid("kernel estimate has no samples"));
        }
        Ok(())
    }

    /// Sums of `f` over the samples in fixed-size chunks, added in chunk
    /// order so the result does not depend on the thread count.
    fn chunked_sums(&self, f: impl Fn(f64, f64) -> (f64, f64) + Sync) -> (f64, f64) {
        let parts: Vec<(f64, f64)> = self
            .samples
            .par_chunks(SUM_CHUNK)
            .map(|c| {
                c.iter().fold((0.0, 0.0), |acc, &(xk, tk)| {
                    let (a, b) = f(xk, tk);
                    (acc.0 + a, acc.1 + b)
                })
            })
            .collect();
        parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
    }

    /// `(1/N) Σ_k (1/2πh)·exp(−((x−x_k)² + (t−t_k)²)/2h)`.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        self.check()?;
        let h = self.h;
        let (sum, _) = self.chunked_sums(|xk, tk| {
            let r2 = (x - xk).powi(2) + (t - tk).powi(2);
            (if r2 > CUTOFF * h { 0.0 } else { (-r2 / (2.0 * h)).exp() }, 0.0)
        });
        Ok(sum / (2.0 * PI * h * self.samples.len() as f64))
    }

    /// Estimate of the density of `x` given `t`: the joint estimate divided
    /// by its own time marginal, i.e. a time-weighted mixture of spatial kernels.
    pub fn eval_conditional(&self, x: f64, t: f64) -> Result<f64> {
        self.check()?;
        let h = self.h;
        let (num, den) = self.chunked_sums(|xk, tk| {
            let dt2 = (t - tk).powi(2);
            if dt2 > CUTOFF * h {
                return (0.0, 0.0);
            }
            let w = (-dt2 / (2.0 * h)).exp();
            let dx2 = (x - xk).powi(2);
            let k = if dx2 > CUTOFF * h { 0.0 } else { (-dx2 / (2.0 * h)).exp() };
            (w * k, w)
        });
        if den == 0.0 {
            return Err(Error::Degenerate(format!("time marginal: no samples near t = {t}")));
        }
        Ok(num / (den * (2.0 * PI * h).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_peak() {
        let mut k = SpacetimeKDE::new(0.2).unwrap();
        k.insert(1.0, 2.0);
        assert!((k.eval(1.0, 2.0).unwrap() - 1.0 / (2.0 * PI * 0.2)).abs() < 1e-15);
        assert!(k.eval(1.0 + 10.0 * 0.2f64.sqrt(), 2.0).unwrap() <= 1e-20);
    }

    #[test]
    fn empty_estimate_errors() {
        assert!(SpacetimeKDE::new(0.1).unwrap().eval(0.0, 0.0).is_err());
        assert!(SpacetimeKDE::new(0.0).is_err());
    }

    #[test]
    fn integrates_to_one() {
        let samples = vec![(0.0, 0.0), (1.0, 0.5), (-0.5, 2.0), (0.3, 1.1)];
        let k = SpacetimeKDE::with_samples(0.05, samples).unwrap();
        let d = 0.01;
        let mut total = 0.0;
        for i in 0..=400 {
            for j in 0..=500 {
                total += k.eval(-1.5 + i as f64 * d, -1.0 + j as f64 * d).unwrap() * d * d;
            }
        }
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn conditional_integrates_to_one_in_x() {
        let samples = vec![(0.0, 0.0), (1.0, 0.5), (-0.5, 0.7)];
        let k = SpacetimeKDE::with_samples(0.05, samples).unwrap();
        let d = 0.001;
        let total: f64 = (0..6000).map(|i| k.eval_conditional(-3.0 + i as f64 * d, 0.4).unwrap() * d).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn schedule() {
        assert_eq!(bandwidth_schedule(1, 0.5).unwrap(), 0.5);
        let a = bandwidth_schedule(1000, 0.5).unwrap();
        let b = bandwidth_schedule(2000, 0.5).unwrap();
        assert!((b / a - 2f64.powf(-1.0 / 3.0)).abs() < 1e-14);
        assert!(bandwidth_schedule(1_000_000_000, 0.5).unwrap() < 1e-3);
    }
}
