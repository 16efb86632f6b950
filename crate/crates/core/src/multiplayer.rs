//! Decentralized DSEE with several players sharing the arms.
//!
//! Players never communicate. They share a time axis and one exploration
//! rule, explore round-robin with their player index as offset (so
//! exploration slots never collide), and at exploitation slots either target
//! a fixed rank each or rotate over their estimated top-`M` set. A player
//! only sees its own, possibly collision-reduced, reward and never learns
//! whether a collision happened.

use rand::Rng;

use crate::env::Bandit;
use crate::error::{ensure, Error, Result};
use crate::estimate::Estimator;
use crate::policy::{Decision, Dsee, DseeConfig, Objective, Policy, SlotKind, TopSetPosition};
use crate::schedule::ExplorationRule;

/// Reward received by players that pick the same arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionModel {
    /// Every collider receives 0.
    ZeroOnCollision,
    /// The collider with the lowest player index receives the full reward.
    WinnerTakesAll,
    /// Colliders split `efficiency * X` equally; `efficiency` in `[0, 1]`.
    FractionalShare { efficiency: f64 },
}

impl CollisionModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CollisionModel::FractionalShare { efficiency } => ensure(
                (0.0..=1.0).contains(&efficiency),
                "efficiency",
                efficiency,
                "must lie in [0, 1]",
            ),
            _ => Ok(()),
        }
    }

    /// Fraction of the arm's reward collected in total by `k >= 1` occupants.
    pub fn retained_fraction(&self, k: usize) -> f64 {
        if k <= 1 {
            return 1.0;
        }
        match *self {
            CollisionModel::ZeroOnCollision => 0.0,
            CollisionModel::WinnerTakesAll => 1.0,
            CollisionModel::FractionalShare { efficiency } => efficiency,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    /// Reward seen by each player.
    pub rewards: Vec<f64>,
    /// Sum of `rewards`.
    pub system: f64,
    /// Number of arms chosen by two or more players.
    pub collided_arms: usize,
}

/// Rewards each player receives given everyone's choices and the raw arm
/// rewards `X_n(t)` of this slot.
pub fn resolve_collisions(choices: &[usize], raw: &[f64], model: &CollisionModel) -> Result<Resolution> {
    let mut occupancy = vec![0usize; raw.len()];
    for &arm in choices {
        *occupancy.get_mut(arm).ok_or(Error::ArmOutOfRange {
            arm,
            arms: raw.len(),
        })? += 1;
    }
    let mut winner_taken = vec![false; raw.len()];
    let rewards: Vec<f64> = choices
        .iter()
        .map(|&arm| {
            let k = occupancy[arm];
            let x = raw[arm];
            if k == 1 {
                return x;
            }
            match *model {
                CollisionModel::ZeroOnCollision => 0.0,
                CollisionModel::WinnerTakesAll => {
                    // Players are visited in index order, so the first one wins.
                    if winner_taken[arm] {
                        0.0
                    } else {
                        winner_taken[arm] = true;
                        x
                    }
                }
                CollisionModel::FractionalShare { efficiency } => efficiency * x / k as f64,
            }
        })
        .collect();
    Ok(Resolution {
        system: rewards.iter().sum(),
        collided_arms: occupancy.iter().filter(|&&k| k > 1).count(),
        rewards,
    })
}

/// Arm played by `player` (0-based) at the `exploit_slot`-th exploitation
/// slot (0-based) when everyone rotates over the same `top_set`.
pub fn fair_share_arm(top_set: &[usize], exploit_slot: u64, player: usize) -> Result<usize> {
    if top_set.is_empty() {
        return Err(Error::Usage("top set is empty".into()));
    }
    let m = top_set.len();
    if player >= m {
        return Err(Error::Usage(format!(
            "player {player} cannot share a top set of size {m}"
        )));
    }
    let mut sorted = top_set.to_vec();
    sorted.sort_unstable();
    let idx = ((exploit_slot % m as u64) as usize + player) % m;
    Ok(sorted[idx])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sharing {
    /// Player `m` (0-based) always targets rank `m + 1`.
    Prioritized,
    /// Players rotate over their estimated top-`M` set.
    FairRotation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecentralizedConfig {
    pub players: usize,
    pub sharing: Sharing,
    pub collision: CollisionModel,
    pub rule: ExplorationRule,
    pub estimator: Estimator,
}

impl DecentralizedConfig {
    pub fn validate(&self, n_arms: usize) -> Result<()> {
        if self.players == 0 || self.players > n_arms {
            return Err(Error::Usage(format!(
                "{} players need between 1 and {n_arms} arms",
                self.players
            )));
        }
        self.collision.validate()?;
        self.rule.validate()
    }

    /// DSEE configuration of player `m`; its offset is `m`.
    pub fn player_config(&self, m: usize) -> Result<DseeConfig> {
        let objective = match self.sharing {
            Sharing::Prioritized => Objective::MthBest { m: m + 1 },
            Sharing::FairRotation => Objective::TopSet {
                size: self.players,
                position: TopSetPosition::External,
            },
        };
        DseeConfig::new(self.rule, self.estimator, objective)
    }
}

/// Cumulative counters at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DecentralizedRecord {
    pub t: u64,
    pub system_reward: f64,
    pub pseudo_regret: f64,
    /// Slots in which at least one collision happened.
    pub collision_slots: u64,
    pub exploration_collisions: u64,
    pub exploitation_collisions: u64,
    /// Exploitation slots where some player's target estimate was wrong.
    pub misidentified_slots: u64,
    pub explorations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecentralizedStep {
    pub t: u64,
    pub kind: SlotKind,
    pub choices: Vec<usize>,
    pub system_reward: f64,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecentralizedTrajectory {
    pub records: Vec<DecentralizedRecord>,
    pub steps: Option<Vec<DecentralizedStep>>,
}

/// Simulates `horizon` slots of `config.players` independent DSEE players.
pub fn run_decentralized<R: Rng + ?Sized>(
    bandit: &Bandit,
    config: &DecentralizedConfig,
    horizon: u64,
    checkpoints: &[u64],
    rng: &mut R,
    log_steps: bool,
) -> Result<DecentralizedTrajectory> {
    let n = bandit.num_arms();
    config.validate(n)?;
    crate::sim::check_checkpoints(checkpoints, horizon)?;
    let m_players = config.players;
    let means = bandit.true_means();
    let gaps = bandit.gaps();
    let optimal: f64 = gaps.order[..m_players].iter().map(|&a| means[a]).sum();
    if gaps.order[..m_players].iter().any(|&a| means[a] <= 0.0) {
        log::warn!("some of the {m_players} best arms have a non-positive mean");
    }
    let mut true_top: Vec<usize> = gaps.order[..m_players].to_vec();
    true_top.sort_unstable();

    let mut players = (0..m_players)
        .map(|m| Dsee::with_offset(config.player_config(m)?, n, m))
        .collect::<Result<Vec<_>>>()?;

    let mut rec = DecentralizedRecord {
        t: 0,
        system_reward: 0.0,
        pseudo_regret: 0.0,
        collision_slots: 0,
        exploration_collisions: 0,
        exploitation_collisions: 0,
        misidentified_slots: 0,
        explorations: 0,
    };
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut steps = log_steps.then(Vec::new);
    let mut next_cp = 0;
    let mut decisions: Vec<Decision> = Vec::with_capacity(m_players);
    let mut choices = vec![0usize; m_players];
    let mut raw = vec![0.0; n];
    let mut occupancy = vec![0usize; n];

    for t in 1..=horizon {
        decisions.clear();
        for p in players.iter_mut() {
            decisions.push(p.select_arm(t)?);
        }
        let kind = decisions[0].kind;
        if decisions.iter().any(|d| d.kind != kind) {
            return Err(Error::Precondition(format!(
                "players disagree on the slot kind at t = {t}"
            )));
        }
        let mut misidentified = false;
        if kind == SlotKind::Exploit {
            for (m, p) in players.iter_mut().enumerate() {
                let order = p.estimated_order(t)?;
                let wrong = match config.sharing {
                    Sharing::Prioritized => order[m] != gaps.order[m],
                    Sharing::FairRotation => {
                        let mut est: Vec<usize> = order[..m_players].to_vec();
                        est.sort_unstable();
                        est != true_top
                    }
                };
                misidentified |= wrong;
            }
        }

        for (c, d) in choices.iter_mut().zip(&decisions) {
            *c = d.arm;
        }
        for (arm, x) in raw.iter_mut().enumerate() {
            *x = bandit.sample_reward(arm, rng)?;
        }
        let res = resolve_collisions(&choices, &raw, &config.collision)?;

        occupancy.iter_mut().for_each(|k| *k = 0);
        for &c in &choices {
            occupancy[c] += 1;
        }
        let achieved: f64 = occupancy
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(arm, &k)| means[arm] * config.collision.retained_fraction(k))
            .sum();

        for ((p, d), y) in players.iter_mut().zip(&decisions).zip(&res.rewards) {
            p.observe(t, *d, *y)?;
        }

        let collided = res.collided_arms > 0;
        rec.t = t;
        rec.system_reward += res.system;
        rec.pseudo_regret += optimal - achieved;
        if collided {
            rec.collision_slots += 1;
            match kind {
                SlotKind::Explore => rec.exploration_collisions += 1,
                SlotKind::Exploit => rec.exploitation_collisions += 1,
            }
        }
        if misidentified {
            rec.misidentified_slots += 1;
        }
        if kind == SlotKind::Explore {
            rec.explorations += 1;
        }
        if let Some(steps) = &mut steps {
            steps.push(DecentralizedStep {
                t,
                kind,
                choices: choices.clone(),
                system_reward: res.system,
                collided,
            });
        }
        if next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            records.push(rec.clone());
            next_cp += 1;
        }
    }
    Ok(DecentralizedTrajectory { records, steps })
}
