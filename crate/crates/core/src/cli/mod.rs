//! The `ordfb` command line: dataset labeling, experiments, property
//! verification and plotting.
//!
//! Exit codes: 0 on success, 1 when a verification property fails, 2 on
//! input or configuration errors.

pub mod experiment;
pub mod plot;
pub mod records;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::rng::RngSeed;
use crate::scale::FeedbackSystem;
use crate::world::DEFAULT_TEMPERATURE;

pub use experiment::{cmd_experiment, ExperimentConfig, ExperimentOutputs, SweepKind};
pub use plot::cmd_plot;
pub use records::{cmd_label, read_records, write_records, LabelSummary, PreferenceRecord};
pub use verify::{cmd_verify, CouplingFixture, VerifyReport, VerifySuite};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ORDFB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("record {0} has neither an oracle nor both scores")]
    MissingOracle(usize),
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Domain(#[from] crate::error::Error),
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::VerificationFailed => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ordfb", version, about = "Ordinal preference feedback toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill in labels for a JSONL dataset by sampling from each record's oracle.
    Label {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// `oracle`, a preset (`binary`, `three_level`, `five_level`) or a comma-separated level list.
        #[arg(long, default_value = "three_level")]
        scale: String,
        #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
        temperature: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a sweep described by a TOML config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run property suites and print a JSON verdict.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: VerifySuite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON coupling fixture to validate in the coupling suite.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Draw seed-averaged eval curves from an experiment CSV as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "oracle_ce")]
        metric: String,
    },
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable report")
}

/// Executes a parsed command, returning what to print on stdout.
pub fn run(cli: Cli) -> Result<String, (CliError, Option<String>)> {
    match cli.command {
        Command::Label {
            input,
            output,
            scale,
            temperature,
            seed,
        } => {
            let system: FeedbackSystem = scale.parse().map_err(|e| {
                (
                    CliError::Config {
                        field: "scale".into(),
                        reason: format!("{e}"),
                    },
                    None,
                )
            })?;
            let summary = cmd_label(&input, &output, &system, temperature, RngSeed(seed)).map_err(|e| (e, None))?;
            Ok(to_json(&summary))
        }
        Command::Experiment { config } => {
            let out = cmd_experiment(&config).map_err(|e| (e, None))?;
            Ok(to_json(&out))
        }
        Command::Verify { suite, seed, fixture } => {
            let report = cmd_verify(suite, RngSeed(seed), fixture.as_deref()).map_err(|e| (e, None))?;
            let text = to_json(&report);
            if report.pass {
                Ok(text)
            } else {
                Err((CliError::VerificationFailed, Some(text)))
            }
        }
        Command::Plot { input, output, metric } => {
            let n = cmd_plot(&input, &output, &metric).map_err(|e| (e, None))?;
            Ok(format!("wrote {} with {n} curves", output.display()))
        }
    }
}

/// Sizes the global thread pool from `ORDFB_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| CliError::Config {
        field: THREADS_ENV.into(),
        reason: format!("expected a positive integer, got `{v}`"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config {
            field: THREADS_ENV.into(),
            reason: e.to_string(),
        })
}
