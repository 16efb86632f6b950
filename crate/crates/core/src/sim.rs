//! Single-player episodes, regret accounting and Monte Carlo aggregation.

use rand::Rng;
use rayon::prelude::*;

use crate::env::Bandit;
use crate::error::{Error, Result};
use crate::numeric::quantile_sorted;
use crate::policy::{Decision, Objective, Policy, PolicySpec, SlotKind};
use crate::rng::substream;

/// Losses charged when the objective is not the best arm. `rank_costs[r-1]`
/// is charged for playing rank `r` under a rank objective, `flat` for any arm
/// outside a top set.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub rank_costs: Vec<f64>,
    pub flat: f64,
}

impl CostModel {
    /// Unit cost for every wrong arm.
    pub fn unit(n_arms: usize) -> Self {
        Self {
            rank_costs: vec![1.0; n_arms],
            flat: 1.0,
        }
    }
}

/// Loss of playing the arm of true rank `rank` (1-based) under `objective`.
pub fn objective_cost(rank: usize, objective: &Objective, costs: &CostModel) -> f64 {
    if objective.is_target_rank(rank) {
        return 0.0;
    }
    match objective {
        Objective::TopSet { .. } => costs.flat,
        _ => costs.rank_costs.get(rank - 1).copied().unwrap_or(costs.flat),
    }
}

/// How each slot is charged.
#[derive(Debug, Clone, PartialEq)]
pub enum Scoring {
    /// Mean gap to the best arm.
    Gaps,
    /// `objective_cost` of the played rank.
    Costs(CostModel),
}

impl Scoring {
    /// Gaps for the best-arm objective, unit costs otherwise.
    pub fn default_for(objective: &Objective, n_arms: usize) -> Self {
        match objective {
            Objective::Best => Scoring::Gaps,
            _ => Scoring::Costs(CostModel::unit(n_arms)),
        }
    }
}

/// Cumulative state after slot `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub cumulative_reward: f64,
    pub pseudo_regret: f64,
    /// `t * best mean - cumulative_reward`
    pub realized_regret: f64,
    /// `|A(t)|`
    pub explorations: u64,
    /// Exploration pulls of each arm.
    pub tau: Vec<u64>,
    /// Part of `pseudo_regret` charged in exploration slots.
    pub exploration_regret: f64,
    pub exploit_slots: u64,
    /// Exploitation slots that missed the objective.
    pub exploit_mistakes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Checkpoint>,
    /// Every decision, when requested.
    pub choices: Option<Vec<Decision>>,
}

/// Errors unless `checkpoints` is strictly increasing within `[1, horizon]`.
pub fn check_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<()> {
    if checkpoints.iter().any(|&t| t == 0 || t > horizon) {
        return Err(Error::Usage(format!("checkpoints must lie in [1, {horizon}]")));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("checkpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// `floor(10^(k/4))` for `k = 0, 1, ...` up to `horizon`, plus `horizon`.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for k in 0.. {
        let x = 10f64.powf(k as f64 / 4.0);
        // Exact powers of ten can land a hair below the integer.
        let t = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.floor() } as u64;
        if t > horizon {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

/// Plays `policy` on `bandit` for `horizon` slots.
#[allow(clippy::too_many_arguments)]
pub fn run_single<P: Policy + ?Sized, R: Rng + ?Sized>(
    bandit: &Bandit,
    policy: &mut P,
    objective: &Objective,
    scoring: &Scoring,
    horizon: u64,
    checkpoints: &[u64],
    rng: &mut R,
    keep_choices: bool,
) -> Result<Trajectory> {
    check_checkpoints(checkpoints, horizon)?;
    let n = bandit.num_arms();
    if policy.num_arms() != n {
        return Err(Error::Usage(format!(
            "policy has {} arms, bandit has {n}",
            policy.num_arms()
        )));
    }
    objective.validate(n)?;
    let gaps = bandit.gaps();
    let ranks = gaps.ranks();
    let best_mean = bandit.true_means()[gaps.best_arm()];
    let charge: Vec<f64> = (0..n)
        .map(|arm| match scoring {
            Scoring::Gaps => gaps.gaps[ranks[arm] - 1],
            Scoring::Costs(c) => objective_cost(ranks[arm], objective, c),
        })
        .collect();

    let mut records = Vec::with_capacity(checkpoints.len());
    let mut choices = keep_choices.then(|| Vec::with_capacity(horizon as usize));
    let mut reward = 0.0;
    let mut regret = 0.0;
    let mut explore_regret = 0.0;
    let mut explorations = 0;
    let mut exploit_slots = 0;
    let mut mistakes = 0;
    let mut next_cp = 0;
    for t in 1..=horizon {
        let d = policy.select_arm(t)?;
        let x = bandit.sample_reward(d.arm, rng)?;
        policy.observe(t, d, x)?;
        reward += x;
        regret += charge[d.arm];
        match d.kind {
            SlotKind::Explore => {
                explorations += 1;
                explore_regret += charge[d.arm];
            }
            SlotKind::Exploit => {
                exploit_slots += 1;
                if !objective.is_target_rank(ranks[d.arm]) {
                    mistakes += 1;
                }
            }
        }
        if let Some(c) = &mut choices {
            c.push(d);
        }
        if next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            records.push(Checkpoint {
                t,
                cumulative_reward: reward,
                pseudo_regret: regret,
                realized_regret: t as f64 * best_mean - reward,
                explorations,
                tau: policy.exploration_pulls(),
                exploration_regret: explore_regret,
                exploit_slots,
                exploit_mistakes: mistakes,
            });
            next_cp += 1;
        }
    }
    Ok(Trajectory { records, choices })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: u64,
    pub mean: f64,
    pub std: f64,
    pub q05: f64,
    pub q95: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub points: Vec<CurvePoint>,
}

impl RegretCurve {
    pub fn mean_at(&self, t: u64) -> Option<f64> {
        self.points.iter().find(|p| p.t == t).map(|p| p.mean)
    }
}

/// Pointwise statistics of `series[rep][i]` observed at `ts[i]`.
pub fn aggregate_series(ts: &[u64], series: &[Vec<f64>]) -> Result<RegretCurve> {
    if series.is_empty() {
        return Err(Error::Usage("nothing to aggregate".into()));
    }
    if series.iter().any(|s| s.len() != ts.len()) {
        return Err(Error::MismatchedCheckpoints);
    }
    let reps = series.len();
    let points = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut xs: Vec<f64> = series.iter().map(|s| s[i]).collect();
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let std = if reps > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
            } else {
                0.0
            };
            xs.sort_by(f64::total_cmp);
            CurvePoint {
                t,
                mean,
                std,
                q05: quantile_sorted(&xs, 0.05),
                q95: quantile_sorted(&xs, 0.95),
                reps,
            }
        })
        .collect();
    Ok(RegretCurve { points })
}

/// Pseudo-regret curve over replications.
pub fn aggregate(trajectories: &[Trajectory]) -> Result<RegretCurve> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Usage("nothing to aggregate".into()))?;
    let ts: Vec<u64> = first.records.iter().map(|r| r.t).collect();
    let mut series = Vec::with_capacity(trajectories.len());
    for tr in trajectories {
        if tr.records.len() != ts.len() || tr.records.iter().zip(&ts).any(|(r, &t)| r.t != t) {
            return Err(Error::MismatchedCheckpoints);
        }
        series.push(tr.records.iter().map(|r| r.pseudo_regret).collect());
    }
    aggregate_series(&ts, &series)
}

/// Runs `job(rep)` for `rep in 0..reps`, in parallel or in order. Results
/// come back in replication order either way.
pub fn replicate<T, F>(reps: u64, parallel: bool, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if parallel {
        (0..reps).into_par_iter().map(&job).collect()
    } else {
        (0..reps).map(job).collect()
    }
}

/// A single-player Monte Carlo experiment. Replication `r` draws rewards
/// from `substream(seed, r, 0)`.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub bandit: Bandit,
    pub policy: PolicySpec,
    pub scoring: Scoring,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    pub reps: u64,
    pub seed: u64,
}

impl Experiment {
    pub fn run_one(&self, rep: u64, keep_choices: bool) -> Result<Trajectory> {
        let mut policy = self.policy.build(self.bandit.num_arms())?;
        let mut rng = substream(self.seed, rep, 0);
        run_single(
            &self.bandit,
            &mut policy,
            &self.policy.objective(),
            &self.scoring,
            self.horizon,
            &self.checkpoints,
            &mut rng,
            keep_choices,
        )
    }

    pub fn run(&self, parallel: bool) -> Result<Vec<Trajectory>> {
        replicate(self.reps, parallel, |r| self.run_one(r, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ArmSpec;
    use crate::estimate::Estimator;
    use crate::policy::{Dsee, DseeConfig};
    use crate::schedule::ExplorationRule;

    /// Plays a fixed arm sequence.
    struct Scripted {
        arms: Vec<usize>,
        n: usize,
    }

    impl Policy for Scripted {
        fn num_arms(&self) -> usize {
            self.n
        }
        fn select_arm(&mut self, t: u64) -> Result<Decision> {
            Ok(Decision {
                arm: self.arms[(t - 1) as usize],
                kind: SlotKind::Exploit,
            })
        }
        fn observe(&mut self, _: u64, _: Decision, _: f64) -> Result<()> {
            Ok(())
        }
        fn exploration_pulls(&self) -> Vec<u64> {
            vec![0; self.n]
        }
    }

    fn bernoulli(qs: &[f64]) -> Bandit {
        Bandit::new(qs.iter().map(|&q| ArmSpec::Bernoulli { q }).collect()).unwrap()
    }

    fn dsee(w: f64, objective: Objective) -> PolicySpec {
        PolicySpec::Dsee(DseeConfig::new(ExplorationRule::log(w).unwrap(), Estimator::PlainMean, objective).unwrap())
    }

    #[test]
    fn single_arm_has_no_regret() {
        let bandit = bernoulli(&[0.3]);
        let mut p = dsee(1.0, Objective::Best).build(1).unwrap();
        let mut rng = substream(0, 0, 0);
        let tr = run_single(&bandit, &mut p, &Objective::Best, &Scoring::Gaps, 500, &[10, 500], &mut rng, false)
            .unwrap();
        assert!(tr.records.iter().all(|r| r.pseudo_regret == 0.0));
    }

    #[test]
    fn scripted_plays_sum_gaps() {
        let bandit = bernoulli(&[0.9, 0.5]);
        let mut p = Scripted { arms: vec![0, 1, 0], n: 2 };
        let mut rng = substream(0, 0, 0);
        let tr = run_single(&bandit, &mut p, &Objective::Best, &Scoring::Gaps, 3, &[3], &mut rng, false).unwrap();
        assert!((tr.records[0].pseudo_regret - 0.4).abs() < 1e-12);
    }

    #[test]
    fn objective_costs() {
        let c = CostModel::unit(3);
        assert_eq!(objective_cost(2, &Objective::MthBest { m: 2 }, &c), 0.0);
        assert_eq!(objective_cost(1, &Objective::MthBest { m: 2 }, &c), 1.0);
        let top = Objective::TopSet {
            size: 2,
            position: crate::policy::TopSetPosition::External,
        };
        assert_eq!(objective_cost(3, &top, &c), 1.0);
        assert_eq!(objective_cost(2, &top, &c), 0.0);
        let c = CostModel {
            rank_costs: vec![2.0, 0.0, 5.0],
            flat: 1.0,
        };
        assert_eq!(objective_cost(3, &Objective::MthBest { m: 2 }, &c), 5.0);
    }

    #[test]
    fn exploration_regret_is_tau_weighted_gaps() {
        let bandit = bernoulli(&[0.9, 0.5, 0.3]);
        let gaps = bandit.gaps();
        let exp = Experiment {
            bandit: bandit.clone(),
            policy: dsee(3.0, Objective::Best),
            scoring: Scoring::Gaps,
            horizon: 5000,
            checkpoints: default_checkpoints(5000),
            reps: 4,
            seed: 11,
        };
        for tr in exp.run(false).unwrap() {
            for r in &tr.records {
                let expected: f64 = (0..3).map(|arm| r.tau[arm] as f64 * gaps.gaps[gaps.rank_of(arm) - 1]).sum();
                assert!((r.exploration_regret - expected).abs() < 1e-9);
                assert_eq!(r.tau.iter().sum::<u64>(), r.explorations);
            }
            for w in tr.records.windows(2) {
                assert!(w[1].pseudo_regret >= w[0].pseudo_regret);
            }
        }
    }

    #[test]
    fn pseudo_regret_matches_choice_log() {
        let bandit = bernoulli(&[0.9, 0.5]);
        let mut p = Dsee::new(
            DseeConfig::new(ExplorationRule::log(2.0).unwrap(), Estimator::PlainMean, Objective::Best).unwrap(),
            2,
        )
        .unwrap();
        let mut rng = substream(5, 0, 0);
        let tr = run_single(&bandit, &mut p, &Objective::Best, &Scoring::Gaps, 2000, &[2000], &mut rng, true).unwrap();
        let log = tr.choices.unwrap();
        let pulls_of_1 = log.iter().filter(|d| d.arm == 1).count();
        assert!((tr.records[0].pseudo_regret - 0.4 * pulls_of_1 as f64).abs() < 1e-9);
    }

    #[test]
    fn default_checkpoint_grid() {
        assert_eq!(default_checkpoints(100), vec![1, 3, 5, 10, 17, 31, 56, 100]);
        assert_eq!(default_checkpoints(120), vec![1, 3, 5, 10, 17, 31, 56, 100, 120]);
        assert!(default_checkpoints(100_000).contains(&10_000));
    }

    #[test]
    fn checkpoint_validation() {
        assert!(check_checkpoints(&[1, 5, 10], 10).is_ok());
        assert!(check_checkpoints(&[0, 5], 10).is_err());
        assert!(check_checkpoints(&[5, 5], 10).is_err());
        assert!(check_checkpoints(&[11], 10).is_err());
    }

    #[test]
    fn aggregate_statistics() {
        let curve = aggregate_series(&[10], &[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(curve.points[0].mean, 2.0);
        assert!((curve.points[0].std - 2f64.sqrt()).abs() < 1e-15);
        let same = aggregate_series(&[1, 2], &vec![vec![4.0, 5.0]; 3]).unwrap();
        assert!(same.points.iter().all(|p| p.std == 0.0 && p.reps == 3));
        assert_eq!(same.points[1].mean, 5.0);
        assert!(aggregate_series(&[1, 2], &[vec![1.0]]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn mismatched_trajectories_rejected() {
        let rec = |t| Checkpoint {
            t,
            cumulative_reward: 0.0,
            pseudo_regret: 0.0,
            realized_regret: 0.0,
            explorations: 0,
            tau: vec![],
            exploration_regret: 0.0,
            exploit_slots: 0,
            exploit_mistakes: 0,
        };
        let a = Trajectory {
            records: vec![rec(1), rec(2)],
            choices: None,
        };
        let b = Trajectory {
            records: vec![rec(1), rec(3)],
            choices: None,
        };
        assert_eq!(aggregate(&[a, b]), Err(Error::MismatchedCheckpoints));
    }

    #[test]
    fn parallel_equals_sequential() {
        let exp = Experiment {
            bandit: bernoulli(&[0.7, 0.6, 0.2]),
            policy: dsee(2.0, Objective::Best),
            scoring: Scoring::Gaps,
            horizon: 3000,
            checkpoints: default_checkpoints(3000),
            reps: 16,
            seed: 99,
        };
        let par = exp.run(true).unwrap();
        let seq = exp.run(false).unwrap();
        assert_eq!(par, seq);
        assert_eq!(aggregate(&par).unwrap(), aggregate(&seq).unwrap());
    }

    #[test]
    fn ucb_runs_in_harness() {
        let exp = Experiment {
            bandit: bernoulli(&[0.9, 0.5]),
            policy: PolicySpec::Ucb1,
            scoring: Scoring::Gaps,
            horizon: 2000,
            checkpoints: vec![2000],
            reps: 8,
            seed: 1,
        };
        let curve = aggregate(&exp.run(true).unwrap()).unwrap();
        assert!(curve.points[0].mean > 0.0 && curve.points[0].mean < 100.0);
    }
}
