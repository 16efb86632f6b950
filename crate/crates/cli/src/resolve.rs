//! Turns a parsed config into library objects, checks the constants a bound
//! relies on, and prepares the analytic bound overlay.

use dsee::bounds::{bound_diverging, bound_heavy, bound_log, bound_truncated};
use dsee::env::Bandit;
use dsee::estimate::Estimator;
use dsee::multiplayer::DecentralizedConfig;
use dsee::policy::{
    light_tail_delta, validate_concentration_window, validate_log_rule, validate_margin, DseeConfig, Objective,
    PolicySpec,
};
use dsee::schedule::{DivergingFn, ExplorationRule};
use dsee::sim::{check_checkpoints, default_checkpoints, CostModel, Scoring};

use crate::config::{to_estimator, ExperimentConfig, PolicyConfig, PolicyKind};

/// Closed-form bound attached to a policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Log { losses: Vec<f64>, a: f64, delta: f64, w: f64 },
    Diverging { losses: Vec<f64>, f: DivergingFn, a: f64, delta: f64, b: f64 },
    Heavy { losses: Vec<f64>, p: f64, m_p: f64, v: f64 },
    Truncated { losses: Vec<f64>, a: f64, delta: f64, p: f64, w: f64 },
}

impl Bound {
    pub fn at(&self, t: u64) -> Option<f64> {
        let v = match self {
            Bound::Log { losses, a, delta, w } => bound_log(losses, *a, *delta, *w, t),
            Bound::Diverging { losses, f, a, delta, b } => bound_diverging(losses, |x| f.value(x), *a, *delta, *b, t),
            Bound::Heavy { losses, p, m_p, v } => bound_heavy(losses, *p, *m_p, *v, t),
            Bound::Truncated { losses, a, delta, p, w } => bound_truncated(losses, *a, *delta, *p, *w, t),
        };
        v.ok()
    }

    pub fn describe(&self) -> String {
        match self {
            Bound::Log { a, delta, w, .. } => format!("log-rule bound (a = {a}, delta = {delta}, w = {w})"),
            Bound::Diverging { a, delta, b, .. } => {
                format!("diverging-rule bound (a = {a}, delta = {delta}, b = {b})")
            }
            Bound::Heavy { p, m_p, v, .. } => format!("polynomial-rule bound (p = {p}, m_p = {m_p}, v = {v})"),
            Bound::Truncated { a, delta, p, w, .. } => {
                format!("truncated-mean bound (a = {a}, delta = {delta}, p = {p}, w = {w})")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedPolicy {
    pub name: String,
    pub spec: PolicySpec,
    pub scoring: Scoring,
    pub bound: Option<Bound>,
    /// Constants that fail their preconditions.
    pub issues: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub bandit: Bandit,
    pub checkpoints: Vec<u64>,
    pub policies: Vec<ResolvedPolicy>,
    pub multiplayer: Option<(String, DecentralizedConfig)>,
}

/// Checkpoints for `horizon`: the configured ones up to the horizon, or the
/// default grid.
pub fn checkpoints_for(config: &ExperimentConfig) -> Result<Vec<u64>, String> {
    let cps = match &config.checkpoints {
        Some(c) => c.iter().copied().filter(|&t| t <= config.horizon).collect(),
        None => default_checkpoints(config.horizon),
    };
    check_checkpoints(&cps, config.horizon).map_err(|e| format!("checkpoints: {e}"))?;
    if cps.is_empty() {
        return Err("checkpoints: none within the horizon".into());
    }
    Ok(cps)
}

pub fn bandit_of(config: &ExperimentConfig) -> Result<Bandit, String> {
    if config.bandit.arms.len() < 2 {
        return Err("bandit.arms: at least two arms are needed".into());
    }
    Bandit::new(config.bandit.arms.iter().map(|&a| a.into()).collect()).map_err(|e| format!("bandit.arms: {e}"))
}

/// Parse-level errors (exit 2) come back as `Err`; precondition problems are
/// collected per policy.
pub fn resolve(config: &ExperimentConfig) -> Result<Resolved, String> {
    if config.horizon == 0 {
        return Err("horizon must be at least 1".into());
    }
    if config.reps == 0 {
        return Err("reps must be at least 1".into());
    }
    let bandit = bandit_of(config)?;
    let checkpoints = checkpoints_for(config)?;
    let mut names = std::collections::HashSet::new();
    let mut policies = Vec::new();
    for (i, p) in config.policies.iter().enumerate() {
        if !names.insert(p.name.as_str()) {
            return Err(format!("policy[{i}]: duplicate name `{}`", p.name));
        }
        if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(format!(
                "policy[{i}]: name `{}` must be non-empty and use only letters, digits, '-', '_' or '.'",
                p.name
            ));
        }
        policies.push(resolve_policy(p, &bandit).map_err(|e| format!("policy[{i}] `{}`: {e}", p.name))?);
    }
    let multiplayer = match &config.multiplayer {
        None => None,
        Some(m) => {
            let rule = m.rule.to_rule().map_err(|e| format!("multiplayer.rule: {e}"))?;
            let u_default = default_u(&m.estimator, &bandit);
            let estimator =
                to_estimator(&m.estimator, u_default, m.delta).map_err(|e| format!("multiplayer.estimator: {e}"))?;
            let cfg = DecentralizedConfig {
                players: m.players,
                sharing: m.sharing.into(),
                collision: m.collision.into(),
                rule,
                estimator,
            };
            cfg.validate(bandit.num_arms()).map_err(|e| format!("multiplayer: {e}"))?;
            Some((m.name.clone(), cfg))
        }
    };
    if policies.is_empty() && multiplayer.is_none() {
        return Err("nothing to run: add a [[policy]] or [multiplayer] block".into());
    }
    Ok(Resolved {
        bandit,
        checkpoints,
        policies,
        multiplayer,
    })
}

fn default_u(e: &crate::config::EstimatorConfig, bandit: &Bandit) -> Option<f64> {
    match *e {
        crate::config::EstimatorConfig::Truncated { p, .. } => bandit.max_raw_moment(p).ok().flatten(),
        _ => None,
    }
}

fn scoring_of(p: &PolicyConfig, objective: &Objective, n: usize) -> Result<Scoring, String> {
    if p.costs.is_none() && p.flat_cost.is_none() {
        return Ok(Scoring::default_for(objective, n));
    }
    let rank_costs = p.costs.clone().unwrap_or_else(|| vec![1.0; n]);
    if rank_costs.len() != n {
        return Err(format!("costs: expected {n} entries, got {}", rank_costs.len()));
    }
    let flat = p.flat_cost.unwrap_or(1.0);
    if rank_costs.iter().chain([&flat]).any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err("costs must be finite and non-negative".into());
    }
    Ok(Scoring::Costs(CostModel { rank_costs, flat }))
}

/// Per-rank losses for the bound: gaps, or the non-target costs sorted
/// ascending behind zeros for the target ranks.
fn losses_of(scoring: &Scoring, objective: &Objective, bandit: &Bandit) -> Vec<f64> {
    let gaps = bandit.gaps();
    match scoring {
        Scoring::Gaps => gaps.gaps,
        Scoring::Costs(costs) => {
            let n = gaps.gaps.len();
            let mut wrong: Vec<f64> = (1..=n)
                .filter(|&r| !objective.is_target_rank(r))
                .map(|r| dsee::sim::objective_cost(r, objective, costs))
                .collect();
            wrong.sort_by(f64::total_cmp);
            let mut losses = vec![0.0; n - wrong.len()];
            losses.extend(wrong);
            losses
        }
    }
}

fn resolve_policy(p: &PolicyConfig, bandit: &Bandit) -> Result<ResolvedPolicy, String> {
    let n = bandit.num_arms();
    let objective: Objective = p.objective.into();
    objective.validate(n).map_err(|e| format!("objective: {e}"))?;
    let scoring = scoring_of(p, &objective, n)?;
    if p.kind == PolicyKind::Ucb1 {
        if p.rule.is_some() || p.objective != Default::default() {
            return Err("ucb1 takes no rule and only the best-arm objective".into());
        }
        return Ok(ResolvedPolicy {
            name: p.name.clone(),
            spec: PolicySpec::Ucb1,
            scoring,
            bound: None,
            issues: Vec::new(),
        });
    }
    let rule = p.rule.as_ref().ok_or("dsee needs a `rule`")?.to_rule()?;
    let k = &p.constants;
    let estimator = to_estimator(&p.estimator, default_u(&p.estimator, bandit), k.delta)
        .map_err(|e| format!("estimator: {e}"))?;
    let config = DseeConfig::new(rule, estimator, objective).map_err(|e| e.to_string())?;
    let losses = losses_of(&scoring, &objective, bandit);
    let separation = objective.separation(&bandit.gaps()).map_err(|e| e.to_string())?;
    let mut issues = Vec::new();
    let mut bound = None;

    match (rule, estimator) {
        (ExplorationRule::Log { .. } | ExplorationRule::Diverging { .. }, Estimator::PlainMean) => {
            let zeta = match (k.zeta, k.u0) {
                (Some(z), _) => Some(z),
                (None, Some(u0)) => match bandit.mgf_curvature_sup(u0) {
                    Ok(z) => Some(z),
                    Err(e) => {
                        issues.push(e.to_string());
                        None
                    }
                },
                (None, None) => None,
            };
            let a = k.a.or(zeta.map(|z| 1.0 / (2.0 * z)));
            let delta = k.delta.or(match (k.c, zeta, k.u0) {
                (Some(c), Some(z), Some(u0)) => Some(light_tail_delta(c, z, u0)),
                _ => None,
            });
            if let Some(c) = k.c {
                if let Err(e) = validate_margin(c, separation) {
                    issues.push(e.to_string());
                }
            }
            match (a, delta) {
                (Some(a), Some(delta)) => {
                    if let (Some(z), Some(u0)) = (zeta, k.u0) {
                        if let Err(e) = validate_concentration_window(a, delta, z, u0) {
                            issues.push(e.to_string());
                        }
                    } else {
                        issues.push("u0 (or zeta with u0) not given; the concentration window is unchecked".into());
                    }
                    match rule {
                        ExplorationRule::Log { w } => {
                            if let Err(e) = validate_log_rule(a, delta, w, 2.0, separation) {
                                issues.push(e.to_string());
                            }
                            bound = Some(Bound::Log { losses, a, delta, w });
                        }
                        ExplorationRule::Diverging { f } => {
                            let b = k.b.unwrap_or(2.0);
                            if b <= 1.0 {
                                issues.push(format!("b = {b} must exceed 1"));
                            } else {
                                bound = Some(Bound::Diverging { losses, f, a, delta, b });
                            }
                        }
                        ExplorationRule::Poly { .. } => unreachable!(),
                    }
                }
                _ => issues.push("constants a and delta (or u0 and c) are needed to check this rule".into()),
            }
        }
        (ExplorationRule::Poly { v, p: order }, Estimator::PlainMean) => {
            let m_p = k.m_p.or(bandit.max_central_moment(order).ok().flatten());
            match m_p {
                Some(m_p) => bound = Some(Bound::Heavy { losses, p: order, m_p, v }),
                None => issues.push(format!("the {order}-th central moment is infinite for some arm")),
            }
        }
        (ExplorationRule::Log { w }, Estimator::TruncatedMean(t)) => {
            let a = k.a.unwrap_or(t.rate());
            let delta = t.delta();
            for (i, arm) in bandit.arms().iter().enumerate() {
                match arm.moments(t.p()) {
                    Ok(Some(m)) if m.raw <= t.u() * (1.0 + 1e-9) => {}
                    Ok(Some(m)) => issues.push(format!("arm {i}: E|X|^{} = {} exceeds u = {}", t.p(), m.raw, t.u())),
                    _ => issues.push(format!("arm {i}: E|X|^{} is infinite", t.p())),
                }
            }
            if let Err(e) = validate_log_rule(a, delta, w, t.p(), separation) {
                issues.push(e.to_string());
            }
            bound = Some(Bound::Truncated {
                losses,
                a,
                delta,
                p: t.p(),
                w,
            });
        }
        _ => issues.push("no closed-form bound for this rule/estimator pair".into()),
    }

    Ok(ResolvedPolicy {
        name: p.name.clone(),
        spec: PolicySpec::Dsee(config),
        scoring,
        bound,
        issues,
    })
}
