//! Deterministic exploration sequences.
//!
//! A slot is an exploration slot when the number of exploration slots
//! strictly before it is below a target that grows with `t`. The first `N`
//! exploration slots are unconditional (so slot `t = 1` is always explored and
//! every arm has an observation before the first exploitation slot).
//! Exploration slots cycle through the arms round-robin, optionally shifted
//! by a per-player offset.
//!
//! Everything here is a pure function of the rule, the time and the count
//! handed in; the caller owns the counter.

use crate::error::{ensure, Error, Result};

/// A slowly diverging sequence `f(t)` used to inflate the logarithmic target
/// when no gap information is available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergingFn {
    /// `f(t) = ln ln max(t, 3)`
    LogLog,
    /// `f(t) = t^gamma`, `0 < gamma < 1`
    Power { gamma: f64 },
}

impl DivergingFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DivergingFn::LogLog => Ok(()),
            DivergingFn::Power { gamma } => {
                ensure(gamma > 0.0 && gamma < 1.0, "gamma", gamma, "must lie in (0, 1)")
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            DivergingFn::LogLog => t.max(3.0).ln().ln(),
            DivergingFn::Power { gamma } => t.powf(gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExplorationRule {
    /// Target `N * ceil(w ln t)`.
    Log { w: f64 },
    /// Target `N * ceil(f(t) ln t)`.
    Diverging { f: DivergingFn },
    /// Target `v * t^e` with `e = 1/p` for `p <= 2` and `e = 1/(1 + p/2)` above.
    Poly { v: f64, p: f64 },
}

impl ExplorationRule {
    pub fn log(w: f64) -> Result<Self> {
        let rule = ExplorationRule::Log { w };
        rule.validate()?;
        Ok(rule)
    }

    pub fn diverging(f: DivergingFn) -> Result<Self> {
        let rule = ExplorationRule::Diverging { f };
        rule.validate()?;
        Ok(rule)
    }

    pub fn poly(v: f64, p: f64) -> Result<Self> {
        let rule = ExplorationRule::Poly { v, p };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ExplorationRule::Log { w } => ensure(w > 0.0 && w.is_finite(), "w", w, "must be positive"),
            ExplorationRule::Diverging { f } => f.validate(),
            ExplorationRule::Poly { v, p } => {
                ensure(v > 0.0 && v.is_finite(), "v", v, "must be positive")?;
                ensure(p > 1.0 && p.is_finite(), "p", p, "must exceed 1")
            }
        }
    }

    /// Exploration-count target at time `t` for `n_arms` arms.
    pub fn target(&self, t: u64, n_arms: usize) -> f64 {
        let t = t as f64;
        let n = n_arms as f64;
        match *self {
            ExplorationRule::Log { w } => n * (w * t.ln()).ceil(),
            ExplorationRule::Diverging { f } => n * (f.value(t) * t.ln()).ceil(),
            ExplorationRule::Poly { v, p } => v * t.powf(poly_exponent(p)),
        }
    }
}

/// Growth exponent of the polynomial rule for moment order `p`.
pub fn poly_exponent(p: f64) -> f64 {
    if p <= 2.0 {
        1.0 / p
    } else {
        1.0 / (1.0 + p / 2.0)
    }
}

/// Whether slot `t` is an exploration slot given `count` exploration slots
/// before it.
pub fn is_exploration(rule: &ExplorationRule, t: u64, count: u64, n_arms: usize) -> Result<bool> {
    if t == 0 {
        return Err(Error::Usage("time slots start at t = 1".into()));
    }
    if t == 1 || count < n_arms as u64 {
        return Ok(true);
    }
    Ok((count as f64) < rule.target(t, n_arms))
}

/// Arm (0-based) played in the `k`-th exploration slot (1-based).
pub fn arm_for_slot(k: u64, n_arms: usize, offset: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Usage("exploration slots are numbered from 1".into()));
    }
    if n_arms == 0 {
        return Err(Error::EmptyBandit);
    }
    if offset >= n_arms {
        return Err(Error::Usage(format!(
            "offset {offset} must be smaller than the number of arms {n_arms}"
        )));
    }
    Ok(((k - 1 + offset as u64) % n_arms as u64) as usize)
}

/// Every exploration slot up to `horizon` with the arm it plays.
pub fn schedule_prefix(
    rule: &ExplorationRule,
    n_arms: usize,
    horizon: u64,
    offset: usize,
) -> Result<Vec<(u64, usize)>> {
    let mut slots = Vec::new();
    for t in 1..=horizon {
        if is_exploration(rule, t, slots.len() as u64, n_arms)? {
            let arm = arm_for_slot(slots.len() as u64 + 1, n_arms, offset)?;
            slots.push((t, arm));
        }
    }
    Ok(slots)
}
