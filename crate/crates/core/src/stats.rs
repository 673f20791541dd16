//! Small statistics helpers used by solvers and tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail p-value of Pearson's chi-square test against equal cell probabilities.
pub fn chi_square_uniform_pvalue(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("at least two bins");
    1.0 - dist.cdf(stat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. `None` when `x` has no spread.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Running means, variances and covariance of paired samples `(a, b)`.
///
/// Batches can be merged, so parallel Monte Carlo reduces deterministically
/// when merged in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairMoments {
    pub n: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    m2a: f64,
    m2b: f64,
    cab: f64,
}

impl PairMoments {
    pub fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        let n = self.n as f64;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / n;
        self.mean_b += db / n;
        self.m2a += da * (a - self.mean_a);
        self.m2b += db * (b - self.mean_b);
        self.cab += da * (b - self.mean_b);
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = (self.n + other.n) as f64;
        let (na, nb) = (self.n as f64, other.n as f64);
        let da = other.mean_a - self.mean_a;
        let db = other.mean_b - self.mean_b;
        Self {
            n: self.n + other.n,
            mean_a: self.mean_a + da * nb / n,
            mean_b: self.mean_b + db * nb / n,
            m2a: self.m2a + other.m2a + da * da * na * nb / n,
            m2b: self.m2b + other.m2b + db * db * na * nb / n,
            cab: self.cab + other.cab + da * db * na * nb / n,
        }
    }

    fn denom(&self) -> f64 {
        (self.n.max(2) - 1) as f64
    }

    pub fn var_a(&self) -> f64 {
        self.m2a / self.denom()
    }

    pub fn var_b(&self) -> f64 {
        self.m2b / self.denom()
    }

    pub fn cov(&self) -> f64 {
        self.cab / self.denom()
    }

    /// Standard error of `mean_a` and `mean_b`.
    pub fn stderr_a(&self) -> f64 {
        (self.var_a() / self.n as f64).sqrt()
    }

    pub fn stderr_b(&self) -> f64 {
        (self.var_b() / self.n as f64).sqrt()
    }

    /// `mean_a / mean_b` with its delta-method standard error.
    pub fn ratio(&self) -> (f64, f64) {
        let r = self.mean_a / self.mean_b;
        let v = (self.var_a() - 2.0 * r * self.cov() + r * r * self.var_b()) / (self.mean_b * self.mean_b);
        (r, (v.max(0.0) / self.n as f64).sqrt())
    }
}
