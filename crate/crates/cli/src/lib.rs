//! `issuebert` command line: data preparation, vocabulary building, training
//! of the transformer and the baseline, evaluation, prediction and an HTTP
//! prediction service.

pub mod commands;
pub mod config;
pub mod serve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config, data or checkpoint.
    Input(anyhow::Error),
    /// Training diverged.
    Numerical(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => EXIT_INPUT,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Input(e) | Self::Numerical(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self::Input(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "issuebert", version, about = "Issue type prediction (bug / enhancement / question)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Transformer,
    Baseline,
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Transformer => "transformer",
            Self::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a labelled CSV and split it into train/validation JSONL.
    Prep {
        /// CSV with `label`, `title` and `body` columns.
        #[arg(long)]
        input: PathBuf,
        /// Output directory for train.jsonl, validation.jsonl and summary.txt.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = issuebert::rng::DEFAULT_SEED)]
        seed: u64,
        /// Share of examples that go to the training set.
        #[arg(long, default_value_t = 0.8)]
        fraction: f64,
        /// Split each class separately so both parts keep the class ratios.
        #[arg(long)]
        stratified: bool,
    },
    /// Build a WordPiece vocabulary from a JSONL training set.
    BuildVocab {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2000)]
        size: usize,
    },
    /// Train the transformer or the baseline from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        model: ModelChoice,
    },
    /// Evaluate one checkpoint, or compare two, on labelled JSONL data.
    Eval {
        /// Checkpoint file; give it twice for a side-by-side comparison.
        #[arg(long = "checkpoint", required = true, num_args = 1)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Predict the label of one text or of every line of a JSONL file.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        text: Option<String>,
        /// JSONL with `text`, or `title` and `body`, per line.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Serve predictions over HTTP until interrupted.
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match commands::execute(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
