//! Command-line front end.

pub mod commands;
pub mod config;
pub mod demo;
mod runtime;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::{RunConfig, RunFlags};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "scam-agent", version, about = "Classify websites as scam or legitimate with a tool-using LLM agent")]
pub struct Cli {
    #[command(flatten)]
    pub flags: RunFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum StrategyArg {
    #[default]
    React,
    SingleTurn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze one URL and print the session as JSON
    Analyze {
        url: String,
        #[arg(long, value_enum, default_value_t)]
        strategy: StrategyArg,
    },
    /// Analyze every retained entry of a dataset, appending sessions to --output
    Batch {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        strategy: StrategyArg,
    },
    /// Score sessions against a dataset; reports go to stdout and --output (a directory)
    Eval { dataset: PathBuf, sessions: PathBuf },
    /// Dataset construction steps
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Inspect recorded tool fixtures
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Exclude entries whose domain is in the top list
    Filter {
        input: PathBuf,
        #[arg(long)]
        toplist: PathBuf,
        #[arg(long, default_value_t = scam_agent::dataset::DEFAULT_TOPLIST_CUTOFF)]
        cutoff: u32,
    },
    /// Exclude entries that do not answer with HTTP 200
    Check { input: PathBuf },
    /// Apply manual review annotations (JSONL)
    Merge {
        input: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Draw the same number of entries from every (label, type, language) cell
    Sample {
        input: PathBuf,
        #[arg(long)]
        per_cell: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// One line per fixture: tool, input, fetch time, outcome
    List,
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
