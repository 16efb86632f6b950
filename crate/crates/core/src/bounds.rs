//! Closed-form finite-time regret bounds and Monte Carlo checks of the
//! concentration inequalities behind them.
//!
//! Every bound takes `losses`, the per-rank loss vector: `losses[r-1]` is
//! what one pull of the rank-`r` arm costs, with `losses[0] == 0` for the
//! target. For the best-arm objective this is [`GapProfile::gaps`]; for rank
//! objectives it is the cost vector sorted ascending.
//!
//! [`GapProfile::gaps`]: crate::env::GapProfile

use rayon::prelude::*;

use crate::env::ArmSpec;
use crate::error::{ensure, Error, Result};
use crate::estimate::{truncated_mean, ArmStats};
use crate::policy::validate_concentration_window;
use crate::rng::substream;

/// Marcinkiewicz-Zygmund constant `(3 sqrt 2)^p p^(p/2)`.
pub fn mz_constant(p: f64) -> f64 {
    (3.0 * 2f64.sqrt()).powf(p) * p.powf(p / 2.0)
}

fn check_losses(losses: &[f64]) -> Result<()> {
    if losses.is_empty() {
        return Err(Error::EmptyBandit);
    }
    for &l in losses {
        ensure(l >= 0.0 && l.is_finite(), "loss", l, "must be finite and non-negative")?;
    }
    Ok(())
}

fn ln_t(t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::Usage("horizon must be at least 1".into()));
    }
    Ok((t as f64).ln())
}

/// `sum_n ceil(w ln T) loss_n + 2 N loss_N (1 + 1/(margin - 1))`.
fn log_shape(losses: &[f64], margin: f64, w: f64, t: u64) -> Result<f64> {
    check_losses(losses)?;
    ensure(w > 0.0, "w", w, "must be positive")?;
    if margin <= 1.0 {
        return Err(Error::Usage(format!(
            "the bound needs a delta^q w > 1, got {margin}"
        )));
    }
    let n = losses.len() as f64;
    let sum: f64 = losses.iter().skip(1).sum();
    let last = *losses.last().unwrap_or(&0.0);
    Ok((w * ln_t(t)?).ceil() * sum + 2.0 * n * last * (1.0 + 1.0 / (margin - 1.0)))
}

/// Regret bound of the logarithmic exploration rule with the plain mean.
pub fn bound_log(losses: &[f64], a: f64, delta: f64, w: f64, t: u64) -> Result<f64> {
    log_shape(losses, a * delta * delta * w, w, t)
}

/// Regret bound of the logarithmic rule with the truncated mean.
pub fn bound_truncated(losses: &[f64], a: f64, delta: f64, p: f64, w: f64, t: u64) -> Result<f64> {
    ensure(p > 1.0 && p <= 2.0, "p", p, "must lie in (1, 2]")?;
    log_shape(losses, a * delta.powf(p / (p - 1.0)) * w, w, t)
}

/// Doubling limit used when searching for `t0`.
pub const DEFAULT_SCAN_LIMIT: u64 = 1 << 62;

/// `min { t >= 1 : a delta^2 f(t) >= b }` for non-decreasing `f`.
pub fn diverging_t0(f: impl Fn(f64) -> f64, a: f64, delta: f64, b: f64, limit: u64) -> Result<u64> {
    let hit = |t: u64| a * delta * delta * f(t as f64) >= b;
    if hit(1) {
        return Ok(1);
    }
    let mut hi = 2u64;
    while !hit(hi) {
        if hi >= limit {
            return Err(Error::ScanLimit { limit });
        }
        hi = hi.saturating_mul(2).min(limit);
    }
    let mut lo = hi / 2;
    // Invariant: !hit(lo), hit(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if hit(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Regret bound of the diverging rule `N ceil(f(t) ln t)`:
/// `sum_n ceil(f(T) ln T) loss_n + t0 + t0^(1-b)/(b-1)`.
pub fn bound_diverging(
    losses: &[f64],
    f: impl Fn(f64) -> f64,
    a: f64,
    delta: f64,
    b: f64,
    t: u64,
) -> Result<f64> {
    check_losses(losses)?;
    ensure(b > 1.0, "b", b, "must exceed 1")?;
    ensure(a > 0.0 && delta > 0.0, "a delta", a * delta, "must be positive")?;
    let t0 = diverging_t0(&f, a, delta, b, DEFAULT_SCAN_LIMIT)? as f64;
    let sum: f64 = losses.iter().skip(1).sum();
    let tf = t as f64;
    Ok((f(tf) * ln_t(t)?).ceil() * sum + t0 + t0.powf(1.0 - b) / (b - 1.0))
}

/// Regret bound of the polynomial rule with target `v t^e`, as printed:
/// `loss_N B_p m_p (gap_2/2)^(-p) v^(-p/2) [k (T^e - 1) + 1] + ceil(v T^e)`
/// with `(e, k) = (1/p, p)` for `p <= 2` and `(1/(1+p/2), 1+p/2)` above.
pub fn bound_heavy(losses: &[f64], p: f64, central_moment: f64, v: f64, t: u64) -> Result<f64> {
    check_losses(losses)?;
    ensure(p > 1.0 && p.is_finite(), "p", p, "must exceed 1")?;
    ensure(v > 0.0, "v", v, "must be positive")?;
    ensure(central_moment >= 0.0 && central_moment.is_finite(), "m_p", central_moment, "must be finite")?;
    if losses.len() < 2 || losses[1] <= 0.0 {
        return Err(Error::Usage("the heavy-tail bound needs a positive second gap".into()));
    }
    ln_t(t)?;
    let (e, k) = if p <= 2.0 { (1.0 / p, p) } else { (1.0 / (1.0 + p / 2.0), 1.0 + p / 2.0) };
    let last = *losses.last().unwrap_or(&0.0);
    let lead = last * mz_constant(p) * central_moment * (losses[1] / 2.0).powf(-p) * v.powf(-p / 2.0);
    let te = (t as f64).powf(e);
    Ok(lead * (k * (te - 1.0) + 1.0) + (v * te).ceil())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The bound is at least 1, so there is nothing to check.
    Vacuous,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Vacuous => "skipped",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    Hoeffding,
    MarcinkiewiczZygmund,
    TruncatedMean,
}

impl std::fmt::Display for Inequality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Inequality::Hoeffding => "hoeffding",
            Inequality::MarcinkiewiczZygmund => "mz",
            Inequality::TruncatedMean => "truncated",
        })
    }
}

/// One grid point. `param` is `delta`, or `eps` for the truncated mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub size: u64,
    pub param: f64,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error of `empirical`.
    pub se: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub inequality: Inequality,
    pub reps: u64,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }
}

fn judge(size: u64, param: f64, hits: u64, reps: u64, bound: f64) -> ReportRow {
    let empirical = hits as f64 / reps as f64;
    let se = (empirical * (1.0 - empirical) / reps as f64).sqrt();
    let status = if bound >= 1.0 {
        Status::Vacuous
    } else if empirical <= bound + 3.0 * se {
        Status::Pass
    } else {
        Status::Fail
    };
    ReportRow {
        size,
        param,
        empirical,
        bound,
        se,
        status,
    }
}

fn check_grid(sizes: &[u64], reps: u64) -> Result<()> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Usage("sample sizes must be non-empty and positive".into()));
    }
    if reps == 0 {
        return Err(Error::Usage("at least one replication is needed".into()));
    }
    Ok(())
}

/// For each size `s` and replication, draws a fresh sample of `s` rewards
/// and counts, per parameter, whether `event(sample, param)` holds.
fn count_events<E>(spec: &ArmSpec, sizes: &[u64], params: &[f64], reps: u64, seed: u64, event: E) -> Result<Vec<Vec<u64>>>
where
    E: Fn(&[f64], u64, f64) -> Result<bool> + Sync,
{
    let bandit = crate::env::Bandit::new(vec![*spec])?;
    sizes
        .iter()
        .enumerate()
        .map(|(lane, &s)| {
            let per_rep = (0..reps)
                .into_par_iter()
                .map(|rep| -> Result<Vec<u64>> {
                    let mut rng = substream(seed, rep, lane as u16);
                    let xs = (0..s)
                        .map(|_| bandit.sample_reward(0, &mut rng))
                        .collect::<Result<Vec<f64>>>()?;
                    params.iter().map(|&q| Ok(u64::from(event(&xs, s, q)?))).collect()
                })
                .collect::<Result<Vec<Vec<u64>>>>()?;
            Ok((0..params.len()).map(|i| per_rep.iter().map(|h| h[i]).sum()).collect())
        })
        .collect()
}

fn rows(sizes: &[u64], params: &[f64], hits: &[Vec<u64>], reps: u64, bound: impl Fn(u64, f64) -> f64) -> Vec<ReportRow> {
    let mut out = Vec::with_capacity(sizes.len() * params.len());
    for (i, &s) in sizes.iter().enumerate() {
        for (j, &q) in params.iter().enumerate() {
            out.push(judge(s, q, hits[i][j], reps, bound(s, q)));
        }
    }
    out
}

/// Frequency of `|mean_s - theta| >= delta` for a light-tailed arm against
/// `2 exp(-a delta^2 s)`. `(a, delta)` must lie in the window set by `u0`
/// and the arm's mgf curvature.
pub fn verify_hoeffding(
    spec: &ArmSpec,
    u0: f64,
    a: f64,
    deltas: &[f64],
    sizes: &[u64],
    reps: u64,
    seed: u64,
) -> Result<Report> {
    check_grid(sizes, reps)?;
    let zeta = spec.mgf_curvature_sup(u0)?;
    for &d in deltas {
        validate_concentration_window(a, d, zeta, u0)?;
    }
    let theta = spec.mean();
    let hits = count_events(spec, sizes, deltas, reps, seed, |xs, s, d| {
        Ok((xs.iter().sum::<f64>() / s as f64 - theta).abs() >= d)
    })?;
    Ok(Report {
        inequality: Inequality::Hoeffding,
        reps,
        rows: rows(sizes, deltas, &hits, reps, |s, d| 2.0 * (-a * d * d * s as f64).exp()),
    })
}

/// `B_p m_p delta^(-p) t^(1-p)` for `p <= 2`, `B_p m_p delta^(-p) t^(-p/2)` above.
pub fn mz_bound(p: f64, central_moment: f64, delta: f64, t: u64) -> f64 {
    let decay = if p <= 2.0 { 1.0 - p } else { -p / 2.0 };
    mz_constant(p) * central_moment * delta.powf(-p) * (t as f64).powf(decay)
}

/// Frequency of `|mean_t - theta| >= delta` against [`mz_bound`].
pub fn verify_mz(spec: &ArmSpec, p: f64, deltas: &[f64], sizes: &[u64], reps: u64, seed: u64) -> Result<Report> {
    check_grid(sizes, reps)?;
    ensure(p > 1.0, "p", p, "must exceed 1")?;
    for &d in deltas {
        ensure(d > 0.0, "delta", d, "must be positive")?;
    }
    let m_p = spec
        .moments(p)?
        .ok_or_else(|| Error::MomentUnavailable {
            distribution: spec.to_string(),
            order: p,
        })?
        .central;
    let theta = spec.mean();
    let hits = count_events(spec, sizes, deltas, reps, seed, |xs, s, d| {
        Ok((xs.iter().sum::<f64>() / s as f64 - theta).abs() >= d)
    })?;
    Ok(Report {
        inequality: Inequality::MarcinkiewiczZygmund,
        reps,
        rows: rows(sizes, deltas, &hits, reps, |s, d| mz_bound(p, m_p, d, s)),
    })
}

/// Deviation radius `4 u^(1/p) (ln(1/eps) / s)^((p-1)/p)` of the truncated mean.
pub fn truncated_radius(u: f64, p: f64, eps: f64, s: u64) -> f64 {
    4.0 * u.powf(1.0 / p) * ((1.0 / eps).ln() / s as f64).powf((p - 1.0) / p)
}

/// Frequency of the truncated mean missing `theta` by more than
/// [`truncated_radius`], against `2 eps`. Needs `E|X|^p <= u`.
pub fn verify_truncated(
    spec: &ArmSpec,
    u: f64,
    p: f64,
    epsilons: &[f64],
    sizes: &[u64],
    reps: u64,
    seed: u64,
) -> Result<Report> {
    check_grid(sizes, reps)?;
    ensure(p > 1.0 && p <= 2.0, "p", p, "must lie in (1, 2]")?;
    for &e in epsilons {
        ensure(e > 0.0 && e <= 0.5, "eps", e, "must lie in (0, 1/2]")?;
    }
    let raw = spec
        .moments(p)?
        .ok_or_else(|| Error::MomentUnavailable {
            distribution: spec.to_string(),
            order: p,
        })?
        .raw;
    // Moments may come from quadrature; allow for its rounding.
    if raw > u * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!("E|X|^{p} = {raw} exceeds u = {u}")));
    }
    let theta = spec.mean();
    let hits = count_events(spec, sizes, epsilons, reps, seed, |xs, s, eps| {
        let mut stats = ArmStats::new(true);
        for &x in xs {
            stats.record(x);
        }
        Ok((truncated_mean(&stats, u, p, eps)? - theta).abs() > truncated_radius(u, p, eps, s))
    })?;
    Ok(Report {
        inequality: Inequality::TruncatedMean,
        reps,
        rows: rows(sizes, epsilons, &hits, reps, |_, eps| 2.0 * eps),
    })
}
