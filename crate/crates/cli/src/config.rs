//! Experiment configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! horizon = 100000
//! reps = 500
//! checkpoints = [1000, 10000, 100000]   # optional, default 10^(k/4) grid plus horizon
//! strict = false                        # optional, same as --strict
//! out = "results"                       # optional, same as --out
//!
//! [bandit]
//! arms = [
//!   { kind = "bernoulli", q = 0.9 },
//!   { kind = "gaussian", mean = 0.5, std = 1.0 },
//! ]
//!
//! [[policy]]
//! name = "dsee-log"
//! kind = "dsee"                        # dsee | ucb1
//! rule = { type = "log", w = 60.0 }    # log{w} | diverging{f, gamma?} | poly{v, p}
//! estimator = { type = "plain" }       # plain | truncated{p, u?, delta?, gamma?}
//! objective = { type = "best" }        # best | mth_best{m} | top_set{size, rank?}
//! costs = [0.0, 1.0]                   # optional cost per true rank
//! flat_cost = 1.0                      # optional cost outside a top set
//! [policy.constants]                   # all optional; used for checks and bounds
//! a = 1.9
//! delta = 0.1
//! c = 0.2
//! u0 = 0.4
//! zeta = 0.26
//! b = 2.0
//! m_p = 3.0
//!
//! [multiplayer]                        # optional
//! players = 2
//! sharing = "fair_rotation"            # fair_rotation | prioritized
//! collision = { type = "zero_on_collision" }  # | winner_takes_all | fractional_share{efficiency}
//! rule = { type = "log", w = 10.0 }
//!
//! [[verify]]                           # used by `dsee verify`
//! inequality = "hoeffding"             # hoeffding | mz | truncated
//! arm = { kind = "gaussian", mean = 0.0, std = 1.0 }
//! sizes = [10, 100, 1000]
//! deltas = [0.1, 0.3, 0.5]             # hoeffding, mz
//! a = 0.15                             # hoeffding
//! u0 = 1.0                             # hoeffding
//! p = 2.0                              # mz, truncated
//! u = 3.0                              # truncated
//! eps = [0.01]                         # truncated
//! reps = 100000                        # optional, defaults to the top-level reps
//! ```

use serde::{Deserialize, Serialize};

use dsee::env::ArmSpec;
use dsee::estimate::{Estimator, TruncatedMeanConfig};
use dsee::multiplayer::{CollisionModel, Sharing};
use dsee::policy::{Objective, TopSetPosition};
use dsee::schedule::{DivergingFn, ExplorationRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Unused by `verify`, so it may be left out there.
    #[serde(default)]
    pub horizon: u64,
    #[serde(default)]
    pub reps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub bandit: BanditConfig,
    #[serde(default, rename = "policy", skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<PolicyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplayer: Option<MultiplayerConfig>,
    #[serde(default, rename = "verify", skip_serializing_if = "Vec::is_empty")]
    pub verify: Vec<VerifyConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditConfig {
    pub arms: Vec<ArmConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArmConfig {
    Bernoulli { q: f64 },
    Gaussian { mean: f64, std: f64 },
    Exponential { rate: f64 },
    Pareto { shape: f64, scale: f64 },
    StudentT {
        dof: f64,
        #[serde(default)]
        location: f64,
    },
}

impl From<ArmConfig> for ArmSpec {
    fn from(a: ArmConfig) -> Self {
        match a {
            ArmConfig::Bernoulli { q } => ArmSpec::Bernoulli { q },
            ArmConfig::Gaussian { mean, std } => ArmSpec::Gaussian { mean, std },
            ArmConfig::Exponential { rate } => ArmSpec::Exponential { rate },
            ArmConfig::Pareto { shape, scale } => ArmSpec::Pareto { shape, scale },
            ArmConfig::StudentT { dof, location } => ArmSpec::StudentT { dof, location },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Dsee,
    Ucb1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub name: String,
    #[serde(default)]
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleConfig>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Constants::is_empty")]
    pub constants: Constants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    Log {
        w: f64,
    },
    Diverging {
        f: DivergingName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Poly {
        v: f64,
        p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergingName {
    Loglog,
    Power,
}

impl RuleConfig {
    pub fn to_rule(&self) -> Result<ExplorationRule, String> {
        let rule = match *self {
            RuleConfig::Log { w } => ExplorationRule::log(w),
            RuleConfig::Poly { v, p } => ExplorationRule::poly(v, p),
            RuleConfig::Diverging { f, gamma } => {
                let f = match (f, gamma) {
                    (DivergingName::Loglog, None) => DivergingFn::LogLog,
                    (DivergingName::Power, Some(gamma)) => DivergingFn::Power { gamma },
                    (DivergingName::Loglog, Some(_)) => return Err("`loglog` takes no gamma".into()),
                    (DivergingName::Power, None) => return Err("`power` needs a gamma".into()),
                };
                ExplorationRule::diverging(f)
            }
        };
        rule.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    #[default]
    Plain,
    Truncated {
        p: f64,
        /// Bound on `E|X|^p`; defaults to the largest raw moment among the arms.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u: Option<f64>,
        /// Defaults to `constants.delta`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    #[default]
    Best,
    MthBest {
        m: usize,
    },
    TopSet {
        size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank: Option<usize>,
    },
}

impl From<ObjectiveConfig> for Objective {
    fn from(o: ObjectiveConfig) -> Self {
        match o {
            ObjectiveConfig::Best => Objective::Best,
            ObjectiveConfig::MthBest { m } => Objective::MthBest { m },
            ObjectiveConfig::TopSet { size, rank } => Objective::TopSet {
                size,
                position: rank.map_or(TopSetPosition::External, TopSetPosition::FixedRank),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_p: Option<f64>,
}

impl Constants {
    pub fn is_empty(&self) -> bool {
        *self == Constants::default()
    }
}

/// Builds the estimator; `delta` falls back to the policy constants.
pub fn to_estimator(e: &EstimatorConfig, u_default: Option<f64>, delta_default: Option<f64>) -> Result<Estimator, String> {
    match *e {
        EstimatorConfig::Plain => Ok(Estimator::PlainMean),
        EstimatorConfig::Truncated { p, u, delta, gamma } => {
            let u = u
                .or(u_default)
                .ok_or("truncated estimator needs `u` (no finite arm moment to default to)")?;
            let delta = delta
                .or(delta_default)
                .ok_or("truncated estimator needs `delta` (or constants.delta)")?;
            TruncatedMeanConfig::new(u, p, delta, gamma)
                .map(Estimator::TruncatedMean)
                .map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingConfig {
    FairRotation,
    Prioritized,
}

impl From<SharingConfig> for Sharing {
    fn from(s: SharingConfig) -> Self {
        match s {
            SharingConfig::FairRotation => Sharing::FairRotation,
            SharingConfig::Prioritized => Sharing::Prioritized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CollisionConfig {
    ZeroOnCollision,
    WinnerTakesAll,
    FractionalShare { efficiency: f64 },
}

impl From<CollisionConfig> for CollisionModel {
    fn from(c: CollisionConfig) -> Self {
        match c {
            CollisionConfig::ZeroOnCollision => CollisionModel::ZeroOnCollision,
            CollisionConfig::WinnerTakesAll => CollisionModel::WinnerTakesAll,
            CollisionConfig::FractionalShare { efficiency } => CollisionModel::FractionalShare { efficiency },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplayerConfig {
    #[serde(default = "multiplayer_name")]
    pub name: String,
    pub players: usize,
    pub sharing: SharingConfig,
    pub collision: CollisionConfig,
    pub rule: RuleConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn multiplayer_name() -> String {
    "multiplayer".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityName {
    Hoeffding,
    Mz,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub inequality: InequalityName,
    pub arm: ArmConfig,
    pub sizes: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Parses a config; the error text carries toml's line and column.
pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn to_toml(config: &ExperimentConfig) -> Result<String, String> {
    toml::to_string(config).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
horizon = 1000
reps = 10

[bandit]
arms = [{ kind = "bernoulli", q = 0.9 }, { kind = "bernoulli", q = 0.5 }]

[[policy]]
name = "dsee"
rule = { type = "log", w = 60.0 }
"#;

    #[test]
    fn parses_minimal() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.policies.len(), 1);
        assert_eq!(c.policies[0].kind, PolicyKind::Dsee);
        assert_eq!(c.policies[0].estimator, EstimatorConfig::Plain);
        assert_eq!(c.policies[0].objective, ObjectiveConfig::Best);
        assert_eq!(c.bandit.arms[1], ArmConfig::Bernoulli { q: 0.5 });
    }

    #[test]
    fn round_trips() {
        let mut c = parse(MINIMAL).unwrap();
        c.checkpoints = Some(vec![1, 10, 1000]);
        c.policies[0].constants.a = Some(1.5);
        c.policies[0].estimator = EstimatorConfig::Truncated {
            p: 2.0,
            u: None,
            delta: Some(0.2),
            gamma: None,
        };
        c.multiplayer = Some(MultiplayerConfig {
            name: "mp".into(),
            players: 2,
            sharing: SharingConfig::FairRotation,
            collision: CollisionConfig::FractionalShare { efficiency: 0.5 },
            rule: RuleConfig::Diverging {
                f: DivergingName::Power,
                gamma: Some(0.3),
            },
            estimator: EstimatorConfig::Plain,
            delta: None,
        });
        let text = to_toml(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = MINIMAL.replace("w = 60.0", "w = \"sixty\"");
        let err = parse(&bad).unwrap_err();
        assert!(err.contains("line 11"), "{err}");
        let unknown = MINIMAL.replace("q = 0.9", "q = 0.9, mean = 1.0");
        let err = parse(&unknown).unwrap_err();
        assert!(err.contains("line 7"), "{err}");
    }

    #[test]
    fn diverging_names() {
        assert!(RuleConfig::Diverging {
            f: DivergingName::Power,
            gamma: None
        }
        .to_rule()
        .is_err());
        assert_eq!(
            RuleConfig::Diverging {
                f: DivergingName::Loglog,
                gamma: None
            }
            .to_rule()
            .unwrap(),
            ExplorationRule::Diverging { f: DivergingFn::LogLog }
        );
    }
}
