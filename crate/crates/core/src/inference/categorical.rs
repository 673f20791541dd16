use serde::{Deserialize, Serialize};

use crate::domain::POSITIVITY_FLOOR;
use crate::error::{Error, Result};

/// Dirichlet prior `α` with the category counts seen so far. Categories are `0..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    alpha: Vec<f64>,
    counts: Vec<u64>,
}

impl DirichletPosterior {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("Dirichlet concentrations must be positive and finite"));
        }
        let counts = vec![0; alpha.len()];
        Ok(Self { alpha, counts })
    }

    /// Symmetric prior with every concentration equal to `a`.
    pub fn symmetric(categories: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; categories])
    }

    pub fn categories(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn observe(&mut self, category: usize) -> Result<()> {
        let m = self.categories();
        let slot = self
            .counts
            .get_mut(category)
            .ok_or_else(|| Error::invalid(format!("category {category} outside 0..{m}")))?;
        *slot += 1;
        Ok(())
    }

    /// `(α_i + n_i) / (N + Σ α)`.
    pub fn predictive(&self) -> Vec<f64> {
        let denom = self.total() as f64 + self.alpha.iter().sum::<f64>();
        self.alpha.iter().zip(&self.counts).map(|(a, &n)| (a + n as f64) / denom).collect()
    }
}

pub fn posterior_update(post: &DirichletPosterior, category: usize) -> Result<DirichletPosterior> {
    let mut next = post.clone();
    next.observe(category)?;
    Ok(next)
}

pub fn posterior_predictive(post: &DirichletPosterior) -> Vec<f64> {
    post.predictive()
}

/// Time-ordered observations `(x_k, t_k)` with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationStream<T> {
    records: Vec<(T, f64)>,
}

impl<T> ObservationStream<T> {
    pub fn new() -> Self {
        Self { records: Vec::new() }
    }

    pub fn push(&mut self, x: T, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("observation time {t}")));
        }
        if let Some(&(_, last)) = self.records.last() {
            if t <= last {
                return Err(Error::invalid(format!("observation at t = {t} does not follow t = {last}")));
            }
        }
        self.records.push((x, t));
        Ok(())
    }

    pub fn records(&self) -> &[(T, f64)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// One explicit Euler step of `dS/dt = p̂·S^{-2} − ((1/K) Σ √p̂)²`.
///
/// Returns the new allocation and the number of entries clamped at the floor.
pub fn dynamic_allocation_step(s: &[f64], predictive: &[f64], k: f64, dt: f64) -> Result<(Vec<f64>, usize)> {
    if s.len() != predictive.len() || s.is_empty() {
        return Err(Error::invalid("allocation and predictive must have the same non-zero length"));
    }
    if !(k > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("budget and time step must be positive"));
    }
    if let Some(i) = s.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::invalid(format!("allocation entry {i} is not positive")));
    }
    let price = (predictive.iter().map(|p| p.sqrt()).sum::<f64>() / k).powi(2);
    let mut clamped = 0;
    let next: Vec<f64> = s
        .iter()
        .zip(predictive)
        .map(|(&v, &p)| {
            let x = v + dt * (p / (v * v) - price);
            if x < POSITIVITY_FLOOR {
                clamped += 1;
                POSITIVITY_FLOOR
            } else {
                x
            }
        })
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("allocation after Euler step".into()));
    }
    Ok((next, clamped))
}

/// Posterior predictive and allocation after each observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationSnapshot {
    pub t: f64,
    pub predictive: Vec<f64>,
    pub allocation: Vec<f64>,
    pub clamped: usize,
}

/// Feeds a categorical stream through the posterior, taking `steps_per_obs`
/// Euler steps against the current predictive between observations.
///
/// The first snapshot is the prior state at `t = 0` (before any Euler step).
pub fn replay_allocation(
    prior: &DirichletPosterior,
    stream: &ObservationStream<usize>,
    init: &[f64],
    k: f64,
    dt: f64,
    steps_per_obs: usize,
) -> Result<Vec<AllocationSnapshot>> {
    let mut post = prior.clone();
    let mut s = init.to_vec();
    let mut out = vec![AllocationSnapshot { t: 0.0, predictive: post.predictive(), allocation: s.clone(), clamped: 0 }];
    for &(cat, t) in stream.records() {
        post.observe(cat)?;
        let p = post.predictive();
        let mut clamped = 0;
        for _ in 0..steps_per_obs {
            let (next, c) = dynamic_allocation_step(&s, &p, k, dt)?;
            s = next;
            clamped += c;
        }
        out.push(AllocationSnapshot { t, predictive: p, allocation: s.clone(), clamped });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn counting_update() {
        let post = DirichletPosterior::symmetric(2, 1.0).unwrap();
        let post = posterior_update(&post, 0).unwrap();
        assert_eq!(post.counts(), &[1, 0]);
        assert_eq!(post.total(), 1);
        assert!(posterior_update(&post, 2).is_err());
        let mut a = DirichletPosterior::symmetric(4, 0.5).unwrap();
        for c in 0..4 {
            a.observe(c).unwrap();
        }
        assert_eq!(a.total(), 4);
    }

    #[test]
    fn update_order_is_irrelevant() {
        let mut a = DirichletPosterior::new(vec![1.0, 2.0, 0.5]).unwrap();
        let mut b = a.clone();
        for c in [0, 2, 2, 1, 0] {
            a.observe(c).unwrap();
        }
        for c in [2, 1, 0, 0, 2] {
            b.observe(c).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn predictive_values() {
        let prior = DirichletPosterior::symmetric(2, 1.0).unwrap();
        assert_eq!(posterior_predictive(&prior), vec![0.5, 0.5]);
        let mut post = prior.clone();
        for c in [0, 0, 0, 1] {
            post.observe(c).unwrap();
        }
        let pred = post.predictive();
        // oracle: marginal likelihood ratio of the Dirichlet-multinomial, P(n + e_i) / P(n)
        let beta = |a: f64, b: f64| {
            // Beta(a, b) for integer arguments via factorials
            let f = |n: f64| (1..n as u64).map(|k| k as f64).product::<f64>();
            f(a) * f(b) / f(a + b)
        };
        let base = beta(1.0 + 3.0, 1.0 + 1.0);
        let next0 = beta(1.0 + 4.0, 1.0 + 1.0) / base;
        let next1 = beta(1.0 + 3.0, 1.0 + 2.0) / base;
        assert!((pred[0] - next0).abs() < 1e-12 && (pred[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pred[1] - next1).abs() < 1e-12 && (pred[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn predictive_tracks_frequencies() {
        let truth = [0.5, 0.3, 0.2];
        let mut rng = crate::rng::stream(4, "categorical_test", 0);
        let mut post = DirichletPosterior::symmetric(3, 1.0).unwrap();
        for _ in 0..10_000 {
            let u: f64 = rng.random();
            let c = if u < 0.5 {
                0
            } else if u < 0.8 {
                1
            } else {
                2
            };
            post.observe(c).unwrap();
        }
        let l1: f64 = post.predictive().iter().zip(truth).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 0.02, "{l1}");
    }

    #[test]
    fn static_optimum_is_fixed_point() {
        let p = [0.75, 0.25];
        let z: f64 = p.iter().map(|v: &f64| v.sqrt()).sum();
        let s: Vec<f64> = p.iter().map(|v| v.sqrt() / z).collect();
        assert!((s[0] - 0.633_974_596_215_561_3).abs() < 1e-12);
        let (next, _) = dynamic_allocation_step(&s, &p, 1.0, 1e-3).unwrap();
        for (a, b) in next.iter().zip(&s) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_start_relaxes_to_optimum() {
        let p = [0.6, 0.3, 0.1];
        let k = 2.0;
        let mut s = vec![0.05, 0.1, 4.0];
        for _ in 0..200_000 {
            s = dynamic_allocation_step(&s, &p, k, 1e-3).unwrap().0;
        }
        let z: f64 = p.iter().map(|v| v.sqrt()).sum();
        for (v, p) in s.iter().zip(p) {
            let target = k * p.sqrt() / z;
            assert!((v - target).abs() <= 0.01 * target);
        }
        assert!((s.iter().sum::<f64>() - k).abs() < 1e-6);
    }

    #[test]
    fn stream_rejects_time_reversal() {
        let mut s = ObservationStream::new();
        s.push(1usize, 0.5).unwrap();
        assert!(s.push(0, 0.5).is_err());
        assert!(s.push(0, 0.4).is_err());
    }

    #[test]
    fn replay_is_deterministic() {
        let mut stream = ObservationStream::new();
        for (i, c) in [0usize, 1, 1, 2, 0, 0].into_iter().enumerate() {
            stream.push(c, i as f64 + 1.0).unwrap();
        }
        let prior = DirichletPosterior::symmetric(3, 1.0).unwrap();
        let a = replay_allocation(&prior, &stream, &[1.0, 1.0, 1.0], 3.0, 1e-3, 50).unwrap();
        let b = replay_allocation(&prior, &stream, &[1.0, 1.0, 1.0], 3.0, 1e-3, 50).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
    }

    proptest::proptest! {
        #[test]
        fn predictive_sums_to_one(alpha in proptest::collection::vec(0.01f64..10.0, 1..8), obs in proptest::collection::vec(0usize..8, 0..50)) {
            let mut post = DirichletPosterior::new(alpha.clone()).unwrap();
            for o in obs {
                let _ = post.observe(o % alpha.len());
            }
            let s: f64 = post.predictive().iter().sum();
            proptest::prop_assert!((s - 1.0).abs() <= 1e-15);
        }
    }
}
