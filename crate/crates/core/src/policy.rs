//! Arm-selection policies.
//!
//! [`Dsee`] interleaves a deterministic exploration sequence with greedy
//! exploitation on exploration-only estimates. The regret
//! guarantee that applies is decided by the (rule, estimator) pair:
//!
//! | rule        | estimator     |
//! |-------------|---------------|
//! | `Log`       | plain mean    | light tails, log regret
//! | `Diverging` | plain mean    | no prior knowledge, near-log regret
//! | `Poly`      | plain mean    | heavy tails, sublinear regret
//! | `Log`       | truncated     | heavy tails, log regret
//!
//! [`Ucb1`] is the index-policy baseline.

use crate::env::{descending_order, GapProfile};
use crate::error::{ensure, Error, Result};
use crate::estimate::{epsilon_schedule, ArmStats, Estimator, TruncationCache};
use crate::multiplayer::fair_share_arm;
use crate::schedule::{arm_for_slot, is_exploration, ExplorationRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Explore,
    Exploit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub arm: usize,
    pub kind: SlotKind,
}

/// Which arm (or arms) exploitation should target. Ranks are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Best,
    MthBest { m: usize },
    TopSet { size: usize, position: TopSetPosition },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopSetPosition {
    /// Always play the arm with this estimated rank (within the set).
    FixedRank(usize),
    /// Rotate over the set with the exploitation-slot counter.
    External,
}

impl Objective {
    pub fn validate(&self, n_arms: usize) -> Result<()> {
        match *self {
            Objective::Best => Ok(()),
            Objective::MthBest { m } => {
                if (1..=n_arms).contains(&m) {
                    Ok(())
                } else {
                    Err(Error::Usage(format!("rank m = {m} outside 1..={n_arms}")))
                }
            }
            Objective::TopSet { size, position } => {
                if !(1..=n_arms).contains(&size) {
                    return Err(Error::Usage(format!("top-set size {size} outside 1..={n_arms}")));
                }
                if let TopSetPosition::FixedRank(r) = position {
                    if !(1..=size).contains(&r) {
                        return Err(Error::Usage(format!("rank {r} outside the top {size}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Mean separation the estimates must resolve for this objective:
    /// `Delta_2` for the best arm, the smaller neighbour gap around rank `m`,
    /// and `Delta_{M+1} - Delta_M` for a top-`M` set.
    pub fn separation(&self, gaps: &GapProfile) -> Result<f64> {
        let n = gaps.gaps.len();
        self.validate(n)?;
        let g = |rank: usize| gaps.gaps[rank - 1];
        let sep = match *self {
            Objective::Best | Objective::MthBest { m: 1 } => {
                if n < 2 {
                    f64::INFINITY
                } else {
                    g(2)
                }
            }
            Objective::MthBest { m } => {
                let below = g(m) - g(m - 1);
                if m < n {
                    below.min(g(m + 1) - g(m))
                } else {
                    below
                }
            }
            Objective::TopSet { size, .. } => {
                if size < n {
                    g(size + 1) - g(size)
                } else {
                    f64::INFINITY
                }
            }
        };
        Ok(sep)
    }

    /// Whether playing the arm of true rank `rank` meets the objective.
    pub fn is_target_rank(&self, rank: usize) -> bool {
        match *self {
            Objective::Best => rank == 1,
            Objective::MthBest { m } => rank == m,
            Objective::TopSet { size, .. } => rank <= size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankChoice {
    Arm(usize),
    /// Top-`M` arms, sorted by ascending arm index.
    Set(Vec<usize>),
}

/// Arm (or arm set) selected by `objective` from `estimates`; ties go to the
/// lower arm index.
pub fn rank_select(estimates: &[f64], objective: &Objective) -> RankChoice {
    let order = descending_order(estimates);
    match *objective {
        Objective::Best => RankChoice::Arm(order[0]),
        Objective::MthBest { m } => RankChoice::Arm(order[m - 1]),
        Objective::TopSet { position: TopSetPosition::FixedRank(r), .. } => RankChoice::Arm(order[r - 1]),
        Objective::TopSet { size, position: TopSetPosition::External } => {
            let mut set = order[..size].to_vec();
            set.sort_unstable();
            RankChoice::Set(set)
        }
    }
}

/// `mean + sqrt(2 ln t / tau)`.
pub fn ucb1_index(mean: f64, tau: u64, t: u64) -> Result<f64> {
    if tau == 0 {
        return Err(Error::NoObservations);
    }
    if t == 0 {
        return Err(Error::Usage("time slots start at t = 1".into()));
    }
    Ok(mean + (2.0 * (t as f64).ln() / tau as f64).sqrt())
}

/// Single-player decision loop. Call `select_arm` then `observe` once per
/// slot, with `t` running 1, 2, ...
pub trait Policy {
    fn num_arms(&self) -> usize;

    fn select_arm(&mut self, t: u64) -> Result<Decision>;

    fn observe(&mut self, t: u64, decision: Decision, reward: f64) -> Result<()>;

    /// Pulls of each arm made in exploration slots so far.
    fn exploration_pulls(&self) -> Vec<u64>;
}

/// Tracks the select/observe handshake shared by every policy.
#[derive(Debug, Clone)]
struct Clock {
    next_t: u64,
    pending: Option<Decision>,
}

impl Clock {
    fn new() -> Self {
        Self {
            next_t: 1,
            pending: None,
        }
    }

    fn begin(&self, t: u64) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::MismatchedObservation(format!(
                "slot {} was selected but never observed",
                self.next_t
            )));
        }
        if t != self.next_t {
            return Err(Error::TimeOrder {
                expected: self.next_t,
                got: t,
            });
        }
        Ok(())
    }

    fn finish(&mut self, t: u64, decision: Decision) -> Result<()> {
        match self.pending {
            Some(p) if p == decision && t == self.next_t => {
                self.pending = None;
                self.next_t += 1;
                Ok(())
            }
            Some(p) => Err(Error::MismatchedObservation(format!(
                "expected {p:?} at t = {}, got {decision:?} at t = {t}",
                self.next_t
            ))),
            None => Err(Error::MismatchedObservation(format!("nothing selected at t = {t}"))),
        }
    }
}

/// Full configuration of one DSEE player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DseeConfig {
    pub rule: ExplorationRule,
    pub estimator: Estimator,
    pub objective: Objective,
}

impl DseeConfig {
    pub fn new(rule: ExplorationRule, estimator: Estimator, objective: Objective) -> Result<Self> {
        rule.validate()?;
        if let Estimator::TruncatedMean(cfg) = estimator {
            if cfg.gamma().is_some() && !matches!(rule, ExplorationRule::Diverging { .. }) {
                return Err(Error::Usage(
                    "a gamma-scaled truncated mean needs a diverging exploration rule".into(),
                ));
            }
        }
        Ok(Self {
            rule,
            estimator,
            objective,
        })
    }
}

/// State of one DSEE player.
#[derive(Debug, Clone)]
pub struct Dsee {
    config: DseeConfig,
    offset: usize,
    stats: Vec<ArmStats>,
    caches: Vec<TruncationCache>,
    estimates: Vec<f64>,
    stale: Vec<bool>,
    explored: u64,
    exploit_slots: u64,
    clock: Clock,
}

impl Dsee {
    pub fn new(config: DseeConfig, n_arms: usize) -> Result<Self> {
        Self::with_offset(config, n_arms, 0)
    }

    /// A player whose round-robin exploration is shifted by `offset`. With a
    /// `TopSet` rotation objective the offset also shifts the rotation phase.
    pub fn with_offset(config: DseeConfig, n_arms: usize, offset: usize) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::EmptyBandit);
        }
        config.objective.validate(n_arms)?;
        if offset >= n_arms {
            return Err(Error::Usage(format!("offset {offset} must be below {n_arms}")));
        }
        let retain = config.estimator.retains_samples();
        Ok(Self {
            config,
            offset,
            stats: vec![ArmStats::new(retain); n_arms],
            caches: vec![TruncationCache::default(); n_arms],
            estimates: vec![0.0; n_arms],
            stale: vec![true; n_arms],
            explored: 0,
            exploit_slots: 0,
            clock: Clock::new(),
        })
    }

    pub fn config(&self) -> &DseeConfig {
        &self.config
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    /// `|A(t-1)|`
    pub fn explored(&self) -> u64 {
        self.explored
    }

    pub fn exploit_slots(&self) -> u64 {
        self.exploit_slots
    }

    /// Current estimates used at exploitation slot `t`.
    pub fn estimates(&mut self, t: u64) -> Result<&[f64]> {
        match self.config.estimator {
            Estimator::PlainMean => {
                for (i, s) in self.stats.iter().enumerate() {
                    if self.stale[i] {
                        self.estimates[i] = s.sample_mean()?;
                        self.stale[i] = false;
                    }
                }
            }
            Estimator::TruncatedMean(cfg) => {
                let f = match &self.config.rule {
                    ExplorationRule::Diverging { f } => Some(f),
                    _ => None,
                };
                let delta = cfg.delta_at(t, f);
                let time_varying = cfg.gamma().is_some();
                for (i, s) in self.stats.iter().enumerate() {
                    if self.stale[i] || time_varying {
                        let eps = epsilon_schedule(s.count(), cfg.rate(), delta, cfg.p())?;
                        let samples = s.samples().ok_or(Error::SamplesNotRetained)?;
                        self.estimates[i] = self.caches[i].mean(samples, cfg.u(), cfg.p(), eps);
                        self.stale[i] = false;
                    }
                }
            }
        }
        Ok(&self.estimates)
    }

    /// Arms by decreasing current estimate (ties by index).
    pub fn estimated_order(&mut self, t: u64) -> Result<Vec<usize>> {
        Ok(descending_order(self.estimates(t)?))
    }

    fn exploit_arm(&mut self, t: u64) -> Result<usize> {
        let objective = self.config.objective;
        let choice = rank_select(self.estimates(t)?, &objective);
        match choice {
            RankChoice::Arm(a) => Ok(a),
            RankChoice::Set(set) => {
                let player = self.offset % set.len();
                fair_share_arm(&set, self.exploit_slots, player)
            }
        }
    }
}

impl Policy for Dsee {
    fn num_arms(&self) -> usize {
        self.stats.len()
    }

    fn select_arm(&mut self, t: u64) -> Result<Decision> {
        self.clock.begin(t)?;
        let n = self.stats.len();
        let decision = if is_exploration(&self.config.rule, t, self.explored, n)? {
            Decision {
                arm: arm_for_slot(self.explored + 1, n, self.offset)?,
                kind: SlotKind::Explore,
            }
        } else {
            Decision {
                arm: self.exploit_arm(t)?,
                kind: SlotKind::Exploit,
            }
        };
        self.clock.pending = Some(decision);
        Ok(decision)
    }

    fn observe(&mut self, t: u64, decision: Decision, reward: f64) -> Result<()> {
        self.clock.finish(t, decision)?;
        match decision.kind {
            SlotKind::Explore => {
                self.stats[decision.arm].record(reward);
                self.stale[decision.arm] = true;
                self.explored += 1;
            }
            SlotKind::Exploit => self.exploit_slots += 1,
        }
        Ok(())
    }

    fn exploration_pulls(&self) -> Vec<u64> {
        self.stats.iter().map(ArmStats::count).collect()
    }
}

/// UCB1: play every arm once, then the arm with the largest `ucb1_index`.
#[derive(Debug, Clone)]
pub struct Ucb1 {
    stats: Vec<ArmStats>,
    clock: Clock,
}

impl Ucb1 {
    pub fn new(n_arms: usize) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::EmptyBandit);
        }
        Ok(Self {
            stats: vec![ArmStats::new(false); n_arms],
            clock: Clock::new(),
        })
    }
}

impl Policy for Ucb1 {
    fn num_arms(&self) -> usize {
        self.stats.len()
    }

    fn select_arm(&mut self, t: u64) -> Result<Decision> {
        self.clock.begin(t)?;
        let decision = match self.stats.iter().position(|s| s.count() == 0) {
            Some(arm) => Decision {
                arm,
                kind: SlotKind::Explore,
            },
            None => {
                let mut best = (0, f64::NEG_INFINITY);
                for (i, s) in self.stats.iter().enumerate() {
                    let idx = ucb1_index(s.sample_mean()?, s.count(), t)?;
                    if idx > best.1 {
                        best = (i, idx);
                    }
                }
                Decision {
                    arm: best.0,
                    kind: SlotKind::Exploit,
                }
            }
        };
        self.clock.pending = Some(decision);
        Ok(decision)
    }

    fn observe(&mut self, t: u64, decision: Decision, reward: f64) -> Result<()> {
        self.clock.finish(t, decision)?;
        self.stats[decision.arm].record(reward);
        Ok(())
    }

    fn exploration_pulls(&self) -> Vec<u64> {
        // Only the initial round counts as forced exploration.
        self.stats.iter().map(|s| s.count().min(1)).collect()
    }
}

/// A buildable policy description, so replications can create fresh state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Dsee(DseeConfig),
    Ucb1,
}

impl PolicySpec {
    pub fn objective(&self) -> Objective {
        match self {
            PolicySpec::Dsee(c) => c.objective,
            PolicySpec::Ucb1 => Objective::Best,
        }
    }

    pub fn build(&self, n_arms: usize) -> Result<AnyPolicy> {
        match self {
            PolicySpec::Dsee(c) => Ok(AnyPolicy::Dsee(Dsee::new(*c, n_arms)?)),
            PolicySpec::Ucb1 => Ok(AnyPolicy::Ucb1(Ucb1::new(n_arms)?)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum AnyPolicy {
    Dsee(Dsee),
    Ucb1(Ucb1),
}

impl Policy for AnyPolicy {
    fn num_arms(&self) -> usize {
        match self {
            AnyPolicy::Dsee(p) => p.num_arms(),
            AnyPolicy::Ucb1(p) => p.num_arms(),
        }
    }

    fn select_arm(&mut self, t: u64) -> Result<Decision> {
        match self {
            AnyPolicy::Dsee(p) => p.select_arm(t),
            AnyPolicy::Ucb1(p) => p.select_arm(t),
        }
    }

    fn observe(&mut self, t: u64, decision: Decision, reward: f64) -> Result<()> {
        match self {
            AnyPolicy::Dsee(p) => p.observe(t, decision, reward),
            AnyPolicy::Ucb1(p) => p.observe(t, decision, reward),
        }
    }

    fn exploration_pulls(&self) -> Vec<u64> {
        match self {
            AnyPolicy::Dsee(p) => p.exploration_pulls(),
            AnyPolicy::Ucb1(p) => p.exploration_pulls(),
        }
    }
}

// Parameter validation. These checks mirror the conditions under which the
// closed-form regret bounds hold; callers decide whether a failure is fatal.

/// Deviation level `min(c/2, zeta * u0)` for a separation margin `c`.
pub fn light_tail_delta(c: f64, zeta: f64, u0: f64) -> f64 {
    (c / 2.0).min(zeta * u0)
}

/// Checks `a in (0, 1/(2 zeta)]` and `delta in [0, zeta u0]`.
pub fn validate_concentration_window(a: f64, delta: f64, zeta: f64, u0: f64) -> Result<()> {
    ensure(zeta > 0.0, "zeta", zeta, "must be positive")?;
    ensure(u0 > 0.0, "u0", u0, "must be positive")?;
    if !(a > 0.0 && a <= 1.0 / (2.0 * zeta)) {
        return Err(Error::Precondition(format!(
            "a = {a} outside (0, 1/(2 zeta)] = (0, {}]",
            1.0 / (2.0 * zeta)
        )));
    }
    if !(0.0..=zeta * u0).contains(&delta) {
        return Err(Error::Precondition(format!(
            "delta = {delta} outside [0, zeta u0] = [0, {}]",
            zeta * u0
        )));
    }
    Ok(())
}

/// Checks the logarithmic-rule constants: `c in (0, separation)`.
pub fn validate_margin(c: f64, separation: f64) -> Result<()> {
    if c > 0.0 && c < separation {
        Ok(())
    } else {
        Err(Error::Precondition(format!("c = {c} outside (0, {separation})")))
    }
}

/// Checks `delta in (0, separation/2)` and `a delta^q w > 1` where
/// `q = p/(p-1)`; `p = 2` gives the plain-mean condition `a delta^2 w > 1`.
pub fn validate_log_rule(a: f64, delta: f64, w: f64, p: f64, separation: f64) -> Result<()> {
    if !(delta > 0.0 && delta < separation / 2.0) {
        return Err(Error::Precondition(format!(
            "delta = {delta} outside (0, {})",
            separation / 2.0
        )));
    }
    let q = p / (p - 1.0);
    let margin = a * delta.powf(q) * w;
    if margin > 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "w = {w} must exceed 1/(a delta^{q}) = {} (a delta^{q} w = {margin})",
            1.0 / (a * delta.powf(q))
        )))
    }
}
