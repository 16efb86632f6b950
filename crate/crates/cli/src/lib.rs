//! Batch experiment runner behind the `dsee` binary.
//!
//! The three commands are plain functions so tests can drive them without a
//! subprocess. Each returns an [`Outcome`] or a [`CliError`]; both map onto
//! the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, all verifications passed |
//! | 1 | a verification failed |
//! | 2 | unreadable or malformed config, bad flags, I/O error |
//! | 3 | constants violate a precondition (strict mode, or any `verify`) |

pub mod commands;
pub mod config;
pub mod output;
pub mod resolve;

use std::path::PathBuf;

pub use commands::{cmd_run, cmd_sweep, cmd_verify};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict: bool,
    pub reps: Option<u64>,
    pub horizon: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("precondition violated:\n{0}")]
    Precondition(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Library(#[from] dsee::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Precondition(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// False when a verification failed.
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}
