//! Deterministic sequencing of exploration and exploitation (DSEE) for
//! multi-armed bandits.
//!
//! The crate covers the arm models ([`env`]), the deterministic exploration
//! schedules ([`schedule`]), exploration-only mean estimators ([`estimate`]),
//! the single-player policies ([`policy`]), decentralized multi-player play
//! ([`multiplayer`]), a Monte Carlo regret harness ([`sim`]) and the
//! closed-form regret bounds plus empirical checks of the underlying
//! concentration inequalities ([`bounds`]).
//!
//! ```
//! use dsee::prelude::*;
//!
//! let bandit = Bandit::new(vec![
//!     ArmSpec::Bernoulli { q: 0.9 },
//!     ArmSpec::Bernoulli { q: 0.5 },
//! ])?;
//! let config = DseeConfig::new(ExplorationRule::log(60.0)?, Estimator::PlainMean, Objective::Best)?;
//! let experiment = Experiment {
//!     bandit,
//!     policy: PolicySpec::Dsee(config),
//!     scoring: Scoring::Gaps,
//!     horizon: 1000,
//!     checkpoints: default_checkpoints(1000),
//!     reps: 10,
//!     seed: 1,
//! };
//! let curve = aggregate(&experiment.run(true)?)?;
//! assert_eq!(curve.points.last().unwrap().t, 1000);
//! # Ok::<(), dsee::Error>(())
//! ```

pub mod bounds;
pub mod env;
pub mod error;
pub mod estimate;
pub mod multiplayer;
mod numeric;
pub mod policy;
pub mod rng;
pub mod schedule;
pub mod sim;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::env::{ArmSpec, Bandit, GapProfile};
    pub use crate::error::{Error, Result};
    pub use crate::estimate::{Estimator, TruncatedMeanConfig};
    pub use crate::multiplayer::{CollisionModel, DecentralizedConfig, Sharing};
    pub use crate::policy::{Dsee, DseeConfig, Objective, Policy, PolicySpec, TopSetPosition};
    pub use crate::schedule::{DivergingFn, ExplorationRule};
    pub use crate::sim::{aggregate, default_checkpoints, Experiment, RegretCurve, Scoring};
}
