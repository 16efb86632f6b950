use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dsee_cli::{cmd_run, cmd_sweep, cmd_verify, Overrides};

/// DSEE bandit experiments: regret curves, parameter sweeps and
/// concentration-inequality checks.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy in the config and write regret-curve CSVs.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat `run` over a grid such as "w=5,10,20;horizon=1000,10000".
    Sweep {
        config: PathBuf,
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the [[verify]] blocks of the config.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refuse to run when constants violate their preconditions.
    #[arg(long)]
    strict: bool,
    /// Replications (overrides the config).
    #[arg(long)]
    reps: Option<u64>,
    /// Horizon T (overrides the config).
    #[arg(long)]
    horizon: Option<u64>,
}

impl From<Common> for Overrides {
    fn from(c: Common) -> Self {
        Overrides {
            seed: c.seed,
            out: c.out,
            strict: c.strict,
            reps: c.reps,
            horizon: c.horizon,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { config, common } => cmd_run(&config, &common.into()),
        Command::Sweep { config, grid, common } => cmd_sweep(&config, &grid, &common.into()),
        Command::Verify { config, common } => cmd_verify(&config, &common.into()),
    };
    match result {
        Ok(outcome) => {
            if !outcome.passed {
                eprintln!("verification failed; see {}", outcome.out_dir.display());
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
