//! Per-arm observation records and mean estimators.
//!
//! Only rewards collected in exploration slots are ever recorded here.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{ensure, Error, Result};
use crate::schedule::DivergingFn;

/// Exploration observations of one arm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmStats {
    count: u64,
    sum: f64,
    samples: Option<Vec<f64>>,
}

impl ArmStats {
    /// Empty record; `retain` keeps every sample for the truncated estimator.
    pub fn new(retain: bool) -> Self {
        Self {
            count: 0,
            sum: 0.0,
            samples: retain.then(Vec::new),
        }
    }

    pub fn record(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        if let Some(samples) = &mut self.samples {
            samples.push(x);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Samples in arrival order, when retained.
    pub fn samples(&self) -> Option<&[f64]> {
        self.samples.as_deref()
    }

    pub fn sample_mean(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::NoObservations);
        }
        Ok(self.sum / self.count as f64)
    }
}

/// `a = 4^(p/(1-p)) * u^(1/(1-p))`, the exponent rate paired with the
/// truncated mean for `E|X|^p <= u`.
pub fn truncated_mean_rate(u: f64, p: f64) -> f64 {
    4f64.powf(p / (1.0 - p)) * u.powf(1.0 / (1.0 - p))
}

/// Confidence level `min(exp(-a * delta^(p/(p-1)) * tau), 1/2)`.
pub fn epsilon_schedule(tau: u64, a: f64, delta: f64, p: f64) -> Result<f64> {
    ensure(p > 1.0 && p <= 2.0, "p", p, "must lie in (1, 2]")?;
    ensure(a > 0.0, "a", a, "must be positive")?;
    ensure(delta > 0.0, "delta", delta, "must be positive")?;
    if tau == 0 {
        return Err(Error::NoObservations);
    }
    let raw = (-a * delta.powf(p / (p - 1.0)) * tau as f64).exp();
    Ok(raw.min(0.5))
}

/// Truncation level `(u k / ln(1/eps))^(1/p)` for the `k`-th sample (1-based).
pub fn truncation_threshold(k: u64, u: f64, p: f64, eps: f64) -> f64 {
    (u * k as f64 / (1.0 / eps).ln()).powf(1.0 / p)
}

/// Mean of the retained samples, each zeroed when its magnitude exceeds
/// `truncation_threshold` at its arrival index.
pub fn truncated_mean(stats: &ArmStats, u: f64, p: f64, eps: f64) -> Result<f64> {
    let samples = stats.samples().ok_or(Error::SamplesNotRetained)?;
    ensure(eps > 0.0 && eps <= 0.5, "eps", eps, "must lie in (0, 1/2]")?;
    ensure(u > 0.0, "u", u, "must be positive")?;
    ensure(p > 1.0 && p <= 2.0, "p", p, "must lie in (1, 2]")?;
    if samples.is_empty() {
        return Err(Error::NoObservations);
    }
    let kept: f64 = samples
        .iter()
        .enumerate()
        .filter(|(i, x)| x.abs() <= truncation_threshold(*i as u64 + 1, u, p, eps))
        .map(|(_, x)| x)
        .sum();
    Ok(kept / samples.len() as f64)
}

/// How exploitation decisions turn an `ArmStats` into an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    PlainMean,
    TruncatedMean(TruncatedMeanConfig),
}

impl Estimator {
    pub fn retains_samples(&self) -> bool {
        matches!(self, Estimator::TruncatedMean(_))
    }
}

/// Parameters of the truncated-mean estimator.
///
/// `u` and `p` are stored after reduction to `p <= 2`: a bound
/// `E|X|^p <= u` with `p > 2` implies `E|X|^2 <= u + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMeanConfig {
    u: f64,
    p: f64,
    delta: f64,
    gamma: Option<f64>,
}

impl TruncatedMeanConfig {
    /// `delta` sets the confidence schedule. With `gamma` set, `delta` is
    /// replaced at time `t` by `f(t)^gamma` for the rule's diverging `f`;
    /// `gamma` must then lie in `((1-p)/p, 0)`.
    pub fn new(u: f64, p: f64, delta: f64, gamma: Option<f64>) -> Result<Self> {
        ensure(u > 0.0 && u.is_finite(), "u", u, "must be positive")?;
        ensure(p > 1.0 && p.is_finite(), "p", p, "must exceed 1")?;
        ensure(delta > 0.0 && delta.is_finite(), "delta", delta, "must be positive")?;
        let (u, p) = if p > 2.0 { (u + 1.0, 2.0) } else { (u, p) };
        if let Some(g) = gamma {
            ensure(g > (1.0 - p) / p && g < 0.0, "gamma", g, "must lie in ((1-p)/p, 0)")?;
        }
        Ok(Self { u, p, delta, gamma })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn rate(&self) -> f64 {
        truncated_mean_rate(self.u, self.p)
    }

    /// Deviation level used in the confidence schedule at time `t`.
    pub fn delta_at(&self, t: u64, f: Option<&DivergingFn>) -> f64 {
        match (self.gamma, f) {
            (Some(g), Some(f)) => f.value(t as f64).powf(g),
            _ => self.delta,
        }
    }
}

/// Incremental truncated mean for one arm.
///
/// Sample `k` survives truncation iff `L <= u k / |X_k|^p` with
/// `L = ln(1/eps)`. While `L` only grows, samples only ever drop out, so a
/// min-heap over those critical levels gives amortised `O(log n)` updates.
/// A decrease of `L` triggers a rebuild.
#[derive(Debug, Clone, Default)]
pub(crate) struct TruncationCache {
    level: f64,
    seen: usize,
    kept_sum: f64,
    heap: BinaryHeap<Reverse<Critical>>,
}

#[derive(Debug, Clone, Copy)]
struct Critical(f64, f64);

impl PartialEq for Critical {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Critical {}
impl PartialOrd for Critical {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Critical {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TruncationCache {
    pub(crate) fn mean(&mut self, samples: &[f64], u: f64, p: f64, eps: f64) -> f64 {
        let level = (1.0 / eps).ln();
        if level < self.level {
            *self = Self::default();
        }
        self.level = level;
        while let Some(Reverse(Critical(crit, x))) = self.heap.peek().copied() {
            if crit >= level {
                break;
            }
            self.heap.pop();
            self.kept_sum -= x;
        }
        for (i, &x) in samples.iter().enumerate().skip(self.seen) {
            let crit = u * (i + 1) as f64 / x.abs().powf(p);
            if level <= crit {
                self.heap.push(Reverse(Critical(crit, x)));
                self.kept_sum += x;
            }
        }
        self.seen = samples.len();
        if self.heap.is_empty() {
            // Avoid carrying accumulated rounding once nothing is kept.
            self.kept_sum = 0.0;
        }
        self.kept_sum / samples.len() as f64
    }
}
