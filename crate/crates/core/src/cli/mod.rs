//! The `autkc` command-line tool.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, every internal check passed |
//! | 1 | a check failed (consistency rate, hinge gap, closed form, Lipschitz bound) |
//! | 2 | usage error: bad flag value, unknown loss, infeasible request |
//! | 3 | I/O or parse error in an input or output file |
//! | 4 | training diverged |

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::TrainFile;
pub use output::RunManifest;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "autkc", version, about = "AUTKC metric, surrogate losses, theory checks and a small trainer")]
pub struct Cli {
    /// Worker threads for independent sweep points, trials and restarts.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a CSV of per-class scores: AUTKC↑ per K and the top-k curve.
    Eval(EvalArgs),
    /// Train on synthetic or CSV data; several losses, seeds or learning
    /// rates make a sweep.
    Train(TrainArgs),
    /// Check Bayes optimality of surrogate conditional-risk minimizers.
    Consistency(ConsistencyArgs),
    /// Pair counts of AUTKC against top-k accuracy.
    CompareMetrics(CompareArgs),
    /// Sample the Lipschitz bound of an AUTKC surrogate loss.
    Lipschitz(LipschitzArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV with C score columns then a label column (or scores only with --labels).
    pub scores: PathBuf,
    /// One integer label per row of the scores file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Cutoffs K for AUTKC↑, comma separated.
    #[arg(long = "K", value_delimiter = ',', required = true)]
    pub big_k: Vec<usize>,
    /// Length of the top-k curve (default C).
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long, default_value = "out/eval")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Loss specs, comma separated; a cutoff-taking loss without `@K` uses
    /// the largest evaluated K.
    #[arg(long, value_delimiter = ',')]
    pub loss: Vec<String>,
    /// Evaluated cutoffs K, comma separated.
    #[arg(long = "K", value_delimiter = ',')]
    pub k_eval: Vec<usize>,
    /// Cross-entropy warm-up epochs.
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Learning rates, comma separated; the best per loss and seed is kept
    /// by held-out AUTKC.
    #[arg(long, value_delimiter = ',')]
    pub lr: Vec<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hidden layer widths, comma separated; `0` trains a linear model.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
    /// Training CSV (`f0,...,label`); the last 20% of rows is the test set.
    /// Without it, synthetic data is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synthetic classes.
    #[arg(long = "C")]
    pub classes: Option<usize>,
    /// Synthetic feature dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Teacher softmax temperature; smaller is less ambiguous.
    #[arg(long)]
    pub tau: Option<f64>,
    /// TOML file with `[data]`, `[train]` and `[sweep]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out/train")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    /// square, exp, logit or hinge.
    #[arg(long)]
    pub family: String,
    #[arg(long = "C")]
    pub classes: usize,
    #[arg(long = "K")]
    pub big_k: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out/consistency")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "C")]
    pub classes: usize,
    /// Top-k cutoff; omit together with --K to sweep every 1 <= k < K <= C.
    #[arg(long = "k")]
    pub k: Option<usize>,
    #[arg(long = "K")]
    pub big_k: Option<usize>,
    #[arg(long, default_value = "out/compare-metrics")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LipschitzArgs {
    /// `autkc-sq@2`, or a bare surrogate (`square`, `exp`, `logit`) with --K.
    #[arg(long)]
    pub family: String,
    #[arg(long = "C", default_value_t = 5)]
    pub classes: usize,
    #[arg(long = "K")]
    pub big_k: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out/lipschitz")]
    pub out: PathBuf,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CHECK_FAILED,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse { .. } | Error::Json(_) => EXIT_IO,
            Error::Diverged { .. } => EXIT_DIVERGED,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Runs the parsed command inside a pool of `--jobs` threads. `argv` is
/// echoed into the manifest.
pub fn run(cli: &Cli, argv: &[String]) -> Result<(), Failure> {
    if cli.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    pool.install(|| match &cli.command {
        Command::Eval(a) => commands::eval(a, argv),
        Command::Train(a) => commands::train(a, argv),
        Command::Consistency(a) => commands::consistency(a, argv),
        Command::CompareMetrics(a) => commands::compare_metrics(a, argv),
        Command::Lipschitz(a) => commands::lipschitz(a, argv),
    })
}
