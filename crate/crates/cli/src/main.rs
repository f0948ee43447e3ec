mod commands;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use tdp_risk::{FeatureSelection, Grouping, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tdp-risk",
    version,
    about = "Fit and evaluate a three-class TdP risk classifier on wedge-assay features"
)]
struct Cli {
    /// Worker threads for resampling; results do not depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset against the schema and summarize it.
    Validate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model on the whole dataset and write it as JSON.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-row class probabilities and predicted class as CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV with drug, replicate and the model's predictor columns.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit on a random training split and score the held-out part.
    EvalSplit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        resample: ResampleArgs,
        #[arg(long, default_value_t = 0.8, value_parser = open_unit)]
        train_frac: f64,
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        stratified: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation accuracy.
    EvalCv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        resample: ResampleArgs,
        #[command(flatten)]
        folds: FoldArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bootstrap accuracy distribution with a percentile interval.
    Bootstrap {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        resample: ResampleArgs,
        #[command(flatten)]
        folds: FoldArgs,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: u64,
        #[arg(long, default_value_t = 0.95, value_parser = open_unit)]
        level: f64,
        /// Equal-width histogram bins over [0, 1].
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..=1000))]
        bins: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Permutation predictor importance, sorted by decreasing importance.
    Importance {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        resample: ResampleArgs,
        #[command(flatten)]
        folds: FoldArgs,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        repeats: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset with the assay schema as CSV.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        high: u64,
        #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u64).range(1..))]
        medium: u64,
        #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u64).range(1..))]
        low: u64,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        replicates_per_drug: u64,
        #[arg(long, default_value_t = 1.0, value_parser = nonnegative)]
        separation: f64,
        #[arg(long, default_value_t = 1.0, value_parser = nonnegative)]
        drug_spread: f64,
        #[arg(long, default_value_t = 0.3, value_parser = nonnegative)]
        noise: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Labelled CSV; `-` reads standard input.
    #[arg(long)]
    data: PathBuf,
    /// Predictor columns: `all` or a comma-separated list.
    #[arg(long, default_value = "all", value_parser = features)]
    features: FeatureSelection,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 1e-4, value_parser = nonnegative)]
    ridge: f64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    standardize: bool,
    /// Gradient max-norm at which fitting stops.
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    grad_tolerance: f64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            ridge: self.ridge,
            grad_tolerance: self.grad_tolerance,
            max_iterations: self.max_iterations as usize,
            standardize: self.standardize,
        }
    }
}

#[derive(Debug, Args)]
struct ResampleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Grouping::ByObservation)]
    grouping: Grouping,
}

#[derive(Debug, Args)]
struct FoldArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    k: u64,
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not strictly between 0 and 1"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is negative"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

fn features(s: &str) -> Result<FeatureSelection, String> {
    FeatureSelection::parse(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads as usize)
            .build_global()
        {
            eprintln!("{}", CliError::Usage(e.to_string()));
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
