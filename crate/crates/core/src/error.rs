use thiserror::Error;

/// Errors raised by the library.
///
/// Everything here is a usage error in the sense that it is caused by the
/// arguments handed in, not by the randomness of a simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("arm index {arm} out of range for a bandit with {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("bandit must have at least one arm")]
    EmptyBandit,

    #[error("estimate requested for an arm with no observations")]
    NoObservations,

    #[error("samples were not retained for this arm")]
    SamplesNotRetained,

    #[error("the {order}-th moment of {distribution} is infinite")]
    MomentUnavailable { distribution: String, order: f64 },

    #[error("distribution {0} is heavy-tailed; no moment-generating function")]
    HeavyTailed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time must start at 1 and advance by one per slot (expected {expected}, got {got})")]
    TimeOrder { expected: u64, got: u64 },

    #[error("observation does not match the pending decision: {0}")]
    MismatchedObservation(String),

    #[error("no t <= {limit} satisfies the crossing condition")]
    ScanLimit { limit: u64 },

    #[error("checkpoints differ between trajectories")]
    MismatchedCheckpoints,

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
