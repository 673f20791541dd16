//! Simulated annealing over arbitrary state sets.
//!
//! A [`StateSpace`] supplies the energy, a perturbation kernel and an optional
//! projection back onto a feasible set. [`anneal`] runs one Metropolis chain
//! under an increasing inverse-temperature schedule and logs every step.

use std::collections::VecDeque;
use std::fmt::Debug;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

pub trait StateSpace {
    type State: Clone + Debug;

    fn energy(&self, x: &Self::State) -> f64;

    /// Propose a nearby state, modifying at most `n_max` elements.
    fn perturb(&self, x: &Self::State, n_max: usize, rng: &mut StreamRng) -> Self::State;

    /// Map a state onto the feasible set. Must be idempotent.
    fn project(&self, x: Self::State) -> Self::State {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `β ← r·β`
    Geometric { ratio: f64 },
    /// `β ← β + increment`
    Linear { increment: f64 },
}

impl Schedule {
    pub fn next(&self, beta: f64) -> f64 {
        match *self {
            Schedule::Geometric { ratio } => beta * ratio,
            Schedule::Linear { increment } => beta + increment,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub beta0: f64,
    pub schedule: Schedule,
    /// Stop once `β` reaches this value.
    pub beta_max: f64,
    /// Stop once the energy has moved by at most this much over `tau` iterations.
    pub epsilon: f64,
    pub tau: usize,
    pub max_iters: usize,
    /// Upper bound on the number of elements touched by one proposal.
    pub n_max: usize,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            beta0: 0.1,
            schedule: Schedule::Geometric { ratio: 1.003 },
            beta_max: 1e6,
            epsilon: 0.0,
            tau: 1000,
            max_iters: 100_000,
            n_max: 1,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::invalid("beta0 must be positive and finite"));
        }
        match self.schedule {
            Schedule::Geometric { ratio } if !(ratio > 1.0 && ratio.is_finite()) => {
                return Err(Error::invalid("geometric ratio must exceed 1"));
            }
            Schedule::Linear { increment } if !(increment > 0.0 && increment.is_finite()) => {
                return Err(Error::invalid("linear increment must be positive"));
            }
            _ => {}
        }
        if !(self.beta_max > self.beta0) {
            return Err(Error::invalid("beta_max must exceed beta0"));
        }
        if !(self.epsilon >= 0.0) || self.tau == 0 {
            return Err(Error::invalid("epsilon must be non-negative and tau at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealRecord {
    pub iter: usize,
    /// Energy of the chain after the accept/reject decision.
    pub energy: f64,
    pub best: f64,
    pub beta: f64,
    pub accepted: bool,
    /// Energy of the proposal and the uniform draw it was tested against.
    pub proposed: f64,
    pub uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnealHistory {
    pub records: Vec<AnnealRecord>,
}

impl AnnealHistory {
    pub fn best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best)
    }
}

fn checked_energy<S: StateSpace>(space: &S, x: &S::State) -> Result<f64> {
    let e = space.energy(x);
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::NonFinite(format!("energy {e} at state {x:?}")))
    }
}

/// Run one annealing chain from `x0`.
///
/// A proposal with energy `E'` replaces the current state when `E' < E` or
/// `exp(−β(E'−E)) ≥ u` for a fresh uniform `u`. The chain stops when `β`
/// reaches `beta_max`, when the energy is within `epsilon` of its value
/// `tau` iterations earlier, or after `max_iters` iterations.
pub fn anneal<S: StateSpace>(space: &S, config: &AnnealConfig, x0: S::State) -> Result<(S::State, AnnealHistory)> {
    chain(space, config, x0, 0)
}

fn chain<S: StateSpace>(
    space: &S,
    config: &AnnealConfig,
    x0: S::State,
    restart: u64,
) -> Result<(S::State, AnnealHistory)> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, "anneal", restart);
    let mut x = space.project(x0);
    let mut e = checked_energy(space, &x)?;
    let (mut best_x, mut best) = (x.clone(), e);
    let mut beta = config.beta0;
    let mut window: VecDeque<f64> = VecDeque::with_capacity(config.tau + 1);
    window.push_back(e);
    let mut records = Vec::new();
    for iter in 0..config.max_iters {
        if beta >= config.beta_max {
            break;
        }
        let candidate = space.project(space.perturb(&x, config.n_max, &mut rng));
        let proposed = checked_energy(space, &candidate)?;
        let uniform: f64 = rng.random();
        let accepted = proposed < e || (-beta * (proposed - e)).exp() >= uniform;
        if accepted {
            x = candidate;
            e = proposed;
            if e < best {
                best = e;
                best_x = x.clone();
            }
        }
        records.push(AnnealRecord { iter, energy: e, best, beta, accepted, proposed, uniform });
        beta = config.schedule.next(beta);
        window.push_back(e);
        if window.len() > config.tau {
            let then = window.pop_front().unwrap_or(e);
            if (e - then).abs() <= config.epsilon {
                break;
            }
        }
    }
    Ok((best_x, AnnealHistory { records }))
}

/// Independent chains from the same start with seeds derived per restart,
/// run in parallel. Returns the lowest-energy state (earliest restart on ties)
/// and every chain's history. Restart 0 reproduces [`anneal`].
pub fn anneal_restarts<S>(
    space: &S,
    config: &AnnealConfig,
    x0: S::State,
    restarts: usize,
) -> Result<(S::State, Vec<AnnealHistory>)>
where
    S: StateSpace + Sync,
    S::State: Send + Sync,
{
    if restarts == 0 {
        return Err(Error::invalid("at least one restart required"));
    }
    let runs: Vec<(S::State, AnnealHistory)> =
        (0..restarts as u64).into_par_iter().map(|r| chain(space, config, x0.clone(), r)).collect::<Result<_>>()?;
    let mut winner = 0;
    let mut best = f64::INFINITY;
    for (i, (x, _)) in runs.iter().enumerate() {
        let e = space.energy(x);
        if e < best {
            best = e;
            winner = i;
        }
    }
    let mut histories = Vec::with_capacity(restarts);
    let mut best_x = None;
    for (i, (x, h)) in runs.into_iter().enumerate() {
        if i == winner {
            best_x = Some(x);
        }
        histories.push(h);
    }
    Ok((best_x.expect("winner index in range"), histories))
}

/// Population standard deviation of the elements, or 1.0 when they are all equal.
fn element_scale(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = x.clone().count() as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mean = x.clone().sum::<f64>() / n;
    let var = x.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 0.0 && sd.is_finite() {
        sd
    } else {
        1.0
    }
}

/// Draw `k ~ U{0..=n_max}` distinct element positions.
fn select_indices(len: usize, n_max: usize, rng: &mut StreamRng) -> Vec<usize> {
    let n_max = n_max.min(len);
    let k = rng.random_range(0..=n_max);
    index::sample(rng, len, k).into_vec()
}

/// Gaussian kick `N(0, σ(x))` to `k ~ U{0..=n_max}` randomly chosen elements,
/// `σ(x)` being the spread of the elements. Works on flattened matrices too.
pub fn perturb_real(x: &[f64], n_max: usize, rng: &mut StreamRng) -> Vec<f64> {
    let sigma = element_scale(x.iter().copied());
    let kick = Normal::new(0.0, sigma).expect("positive finite scale");
    let mut out = x.to_vec();
    for i in select_indices(x.len(), n_max, rng) {
        out[i] += kick.sample(rng);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ring {
    /// Entries in {0, 1}; chosen entries are flipped.
    Binary,
    /// Integer entries; chosen entries shift by `round(σ(x)·p)`.
    Integer,
}

/// Shift distribution for [`Ring::Integer`]: symmetric on {−2..2} with unit variance.
const SHIFTS: [(i64, f64); 5] = [(-2, 1.0 / 12.0), (-1, 1.0 / 6.0), (0, 0.5), (1, 1.0 / 6.0), (2, 1.0 / 12.0)];

fn draw_shift(rng: &mut StreamRng) -> i64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(p, w) in &SHIFTS {
        acc += w;
        if u < acc {
            return p;
        }
    }
    SHIFTS[SHIFTS.len() - 1].0
}

pub fn perturb_ring(x: &[i64], ring: Ring, n_max: usize, rng: &mut StreamRng) -> Vec<i64> {
    let mut out = x.to_vec();
    let picks = select_indices(x.len(), n_max, rng);
    match ring {
        Ring::Binary => {
            for i in picks {
                out[i] = 1 - out[i];
            }
        }
        Ring::Integer => {
            let sigma = element_scale(x.iter().map(|&v| v as f64));
            for i in picks {
                out[i] += (sigma * draw_shift(rng) as f64).round() as i64;
            }
        }
    }
    out
}

/// Componentwise clamp: the Euclidean-nearest point of `[lower, upper]`.
pub fn project_box(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter().zip(lower).zip(upper).map(|((v, lo), hi)| v.max(*lo).min(*hi)).collect()
}

/// Real-vector state space with the Gaussian kernel and an optional box.
pub struct RealSpace<F> {
    pub energy: F,
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl<F: Fn(&[f64]) -> f64> StateSpace for RealSpace<F> {
    type State = Vec<f64>;

    fn energy(&self, x: &Vec<f64>) -> f64 {
        (self.energy)(x)
    }

    fn perturb(&self, x: &Vec<f64>, n_max: usize, rng: &mut StreamRng) -> Vec<f64> {
        perturb_real(x, n_max, rng)
    }

    fn project(&self, x: Vec<f64>) -> Vec<f64> {
        match &self.bounds {
            Some((lo, hi)) => project_box(&x, lo, hi),
            None => x,
        }
    }
}

/// Integer or binary state space (flattened matrix).
pub struct RingSpace<F> {
    pub energy: F,
    pub ring: Ring,
}

impl<F: Fn(&[i64]) -> f64> StateSpace for RingSpace<F> {
    type State = Vec<i64>;

    fn energy(&self, x: &Vec<i64>) -> f64 {
        (self.energy)(x)
    }

    fn perturb(&self, x: &Vec<i64>, n_max: usize, rng: &mut StreamRng) -> Vec<i64> {
        perturb_ring(x, self.ring, n_max, rng)
    }
}
