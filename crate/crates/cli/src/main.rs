mod commands;
mod error;
mod parse;
mod runfile;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult, Exit};

pub const THREADS_ENV: &str = "COLLAPSE_LAB_THREADS";

/// Measure diversity, select subsets and run self-consuming training loops
/// on point-cloud datasets.
#[derive(Debug, Parser)]
#[command(name = "collapse-lab", version)]
pub struct Cli {
    /// Omit timestamps and host details so reruns are byte-identical.
    #[arg(long, global = true)]
    pub canonical: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset file (.csv, or .bin/.rawbin for the binary format).
    #[arg(long, short)]
    pub input: PathBuf,

    /// Override the format inferred from the file extension.
    #[arg(long, value_parser = ["csv", "rawbin"])]
    pub format: Option<String>,

    /// Feature map applied before measuring: identity or randproj:DIM:SEED.
    #[arg(long)]
    pub feature: Option<String>,

    /// euclidean (default) or squared.
    #[arg(long)]
    pub metric: Option<String>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "policy")]
pub struct PolicyFlags {
    /// Farthest-point selection.
    #[arg(long)]
    pub greedy: bool,
    /// Threshold decay filter; needs --tau0.
    #[arg(long)]
    pub threshold: bool,
    /// Uniform subset without replacement.
    #[arg(long)]
    pub random: bool,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    /// key = value run file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Real dataset.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "rawbin"])]
    pub format: Option<String>,
    /// replace, accumulate or accumulate-subsample.
    #[arg(long)]
    pub paradigm: Option<String>,
    #[arg(long)]
    pub iterations: Option<String>,
    /// Training set size N (defaults to the size of the real dataset).
    #[arg(long)]
    pub train_size: Option<String>,
    /// gaussian, gmm:K[:MAX_ITERS[:TOL]] or bootstrap[:SIGMA].
    #[arg(long)]
    pub generator: Option<String>,
    /// none, greedy, random or threshold:TAU0[:ALPHA].
    #[arg(long)]
    pub selection: Option<String>,
    /// Candidate pool size factor for the replace paradigm.
    #[arg(long)]
    pub generation_multiplier: Option<String>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub feature: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub pool_limit: Option<String>,
    /// Trace JSON path.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Trace CSV path (defaults to the JSON path with a .csv extension).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    Compare,
    Correlate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nearest-neighbour differential entropy estimate.
    Entropy {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1)]
        gamma: usize,
    },
    /// Mean distance from each generated point to its nearest reference point.
    Gs {
        #[command(flatten)]
        input: InputArgs,
        /// Training set the generated points are scored against.
        #[arg(long)]
        reference: PathBuf,
    },
    /// Mean nearest-neighbour distance within a dataset.
    Mnnd {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Fréchet distance between Gaussians fitted to two datasets.
    Frechet {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Pick a diverse or random subset.
    Select {
        #[command(flatten)]
        input: InputArgs,
        /// Subset size.
        #[arg(short = 'n', long = "size")]
        n: usize,
        #[command(flatten)]
        policy: PolicyFlags,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Force the first selected index instead of drawing it.
        #[arg(long)]
        initial: Option<usize>,
        /// Write the selected rows here, in the input's format.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit a generator to a dataset and sample from it.
    Gen {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "gaussian")]
        generator: String,
        /// Number of samples (defaults to the training size).
        #[arg(long, short = 'm')]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Synthetic generation number stamped on the samples.
        #[arg(long, default_value_t = 1)]
        tag: u32,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run a self-consuming loop and write its trace.
    Loop(Box<LoopArgs>),
    /// Compare two traces or correlate entropy with generalization.
    Analyze {
        #[arg(long, value_enum)]
        mode: AnalyzeMode,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = parse::positive(THREADS_ENV, &raw)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size the worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Exit::Config as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match configure_threads().and_then(|()| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("collapse-lab: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
