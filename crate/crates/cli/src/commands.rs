use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tdp_risk::evaluation::{fold_rows, ReplicateMeta, SkippedReplicate};
use tdp_risk::{
    bootstrap_accuracy, evaluate_split, histogram, k_fold_cv, load_csv_with, load_records,
    normalize_importance, percentile_ci, permutation_importance, synthesize_dataset, write_csv,
    Dataset, FittedModel, Grouping, ImportanceEntry, RiskClass, SplitSpec, SynthConfig,
    TrainConfig,
};

use crate::error::CliError;
use crate::report::{read_input, render, write_output, Clock, Manifest};
use crate::{Command, DataArgs, FoldArgs, ResampleArgs, TrainArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn run(command: Command) -> Result<(), CliError> {
    let clock = Clock::start();
    match command {
        Command::Validate { data, out } => validate(&data, out.as_deref(), clock),
        Command::Fit { data, train, out } => fit(&data, &train, out.as_deref()),
        Command::Predict { model, data, out } => predict(&model, &data, out.as_deref()),
        Command::EvalSplit {
            data,
            train,
            resample,
            train_frac,
            stratified,
            out,
        } => eval_split(
            &data,
            &train,
            &resample,
            train_frac,
            stratified,
            out.as_deref(),
            clock,
        ),
        Command::EvalCv {
            data,
            train,
            resample,
            folds,
            out,
        } => eval_cv(&data, &train, &resample, &folds, out.as_deref(), clock),
        Command::Bootstrap {
            data,
            train,
            resample,
            folds,
            replicates,
            level,
            bins,
            out,
        } => bootstrap(
            &data,
            &train,
            &resample,
            &folds,
            BootstrapArgs {
                replicates: replicates as usize,
                level,
                bins: bins as usize,
            },
            out.as_deref(),
            clock,
        ),
        Command::Importance {
            data,
            train,
            resample,
            folds,
            repeats,
            out,
        } => importance(
            &data,
            &train,
            &resample,
            &folds,
            repeats as usize,
            out.as_deref(),
            clock,
        ),
        Command::Synth {
            seed,
            high,
            medium,
            low,
            replicates_per_drug,
            separation,
            drug_spread,
            noise,
            out,
        } => synth(
            &SynthConfig {
                class_drug_counts: (high as usize, medium as usize, low as usize),
                replicates_per_drug: replicates_per_drug as usize,
                class_separation: separation,
                drug_spread,
                replicate_noise: noise,
                seed,
            },
            out.as_deref(),
        ),
    }
}

struct Loaded {
    data: Dataset,
    digest: String,
}

fn load(args: &DataArgs) -> Result<Loaded, CliError> {
    let input = read_input(&args.data)?;
    let data = load_csv_with(input.bytes.as_slice(), &args.features)?;
    Ok(Loaded {
        data,
        digest: input.digest,
    })
}

/// Data settings as recorded in the manifest.
#[derive(Serialize)]
struct DataConfig {
    data: PathBuf,
    features: Vec<String>,
}

impl DataConfig {
    fn new(args: &DataArgs) -> Self {
        Self {
            data: args.data.clone(),
            features: args.features.names(),
        }
    }
}

fn manifest<C: Serialize>(
    command: &'static str,
    config: C,
    seed: Option<u64>,
    inputs: BTreeMap<&'static str, String>,
    clock: &Clock,
) -> Manifest<C> {
    Manifest {
        command,
        config,
        seed,
        version: VERSION,
        inputs,
        duration_seconds: clock.seconds(),
    }
}

fn data_input(digest: String) -> BTreeMap<&'static str, String> {
    BTreeMap::from([("data", digest)])
}

#[derive(Serialize)]
struct ClassCounts {
    #[serde(rename = "L")]
    low: usize,
    #[serde(rename = "M")]
    medium: usize,
    #[serde(rename = "H")]
    high: usize,
}

impl From<[usize; 3]> for ClassCounts {
    fn from([low, medium, high]: [usize; 3]) -> Self {
        Self { low, medium, high }
    }
}

fn validate(args: &DataArgs, out: Option<&Path>, clock: Clock) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Summary {
        observations: usize,
        predictors: usize,
        drugs: usize,
        class_counts: ClassCounts,
        feature_names: Vec<String>,
    }
    let loaded = load(args)?;
    let data = &loaded.data;
    let summary = Summary {
        observations: data.len(),
        predictors: data.num_features(),
        drugs: data.drugs().len(),
        class_counts: ClassCounts::from(data.class_counts()),
        feature_names: data.feature_names().to_vec(),
    };
    let m = manifest(
        "validate",
        DataConfig::new(args),
        None,
        data_input(loaded.digest),
        &clock,
    );
    write_output(out, &render(&m, &summary))
}

fn warn_unconverged(converged: &[bool]) {
    let missed = converged.iter().filter(|c| !**c).count();
    if missed > 0 {
        eprintln!(
            "warning: {missed} of {} fits stopped at the iteration limit before meeting the gradient tolerance",
            converged.len()
        );
    }
}

fn fit(args: &DataArgs, train: &TrainArgs, out: Option<&Path>) -> Result<(), CliError> {
    let loaded = load(args)?;
    let model = tdp_risk::fit(&loaded.data, &train.config())?;
    warn_unconverged(&[model.converged]);
    if !model.constant_features.is_empty() {
        let names: Vec<&str> = model
            .constant_features
            .iter()
            .map(|&j| model.feature_names[j].as_str())
            .collect();
        eprintln!("warning: constant predictors: {}", names.join(", "));
    }
    let mut text = serde_json::to_vec_pretty(&model).expect("model serializes");
    text.push(b'\n');
    write_output(out, &text)
}

fn predict(model_path: &Path, data_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model_input = read_input(model_path)?;
    let model: FittedModel = serde_json::from_slice(&model_input.bytes)
        .map_err(|e| CliError::model(format!("{}: {e}", model_path.display())))?;
    model
        .check()
        .map_err(|e| CliError::model(format!("{}: {e}", model_path.display())))?;
    let input = read_input(data_path)?;
    let records = load_records(input.bytes.as_slice(), &model.feature_names)?;

    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_error = |e: csv::Error| CliError::Data {
        code: "write_failed",
        message: e.to_string(),
    };
    writer
        .write_record([
            "drug",
            "replicate",
            "risk",
            "p_L",
            "p_M",
            "p_H",
            "predicted",
        ])
        .map_err(csv_error)?;
    for record in &records {
        let (probs, class) = model.predict(&record.features)?;
        let [l, m, h] = probs.as_array().map(tdp_risk::data::format_number);
        writer
            .write_record([
                record.drug_id.clone(),
                record.replicate.to_string(),
                record.label.map(|c| c.to_string()).unwrap_or_default(),
                l,
                m,
                h,
                class.to_string(),
            ])
            .map_err(csv_error)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Data {
        code: "write_failed",
        message: e.to_string(),
    })?;
    write_output(out, &bytes)
}

#[derive(Serialize)]
struct ResampleConfig {
    #[serde(flatten)]
    data: DataConfig,
    train: TrainConfig,
    grouping: Grouping,
}

fn resample_config(args: &DataArgs, train: &TrainArgs, resample: &ResampleArgs) -> ResampleConfig {
    ResampleConfig {
        data: DataConfig::new(args),
        train: train.config(),
        grouping: resample.grouping,
    }
}

fn eval_split(
    args: &DataArgs,
    train: &TrainArgs,
    resample: &ResampleArgs,
    train_fraction: f64,
    stratified: bool,
    out: Option<&Path>,
    clock: Clock,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Config {
        #[serde(flatten)]
        base: ResampleConfig,
        train_fraction: f64,
        stratified: bool,
    }
    #[derive(Serialize)]
    struct Outcome {
        train_size: usize,
        test_size: usize,
        test_accuracy: f64,
        train_indices: Vec<usize>,
        test_indices: Vec<usize>,
        test_predictions: Vec<RiskClass>,
        converged: bool,
        iterations: usize,
    }
    let loaded = load(args)?;
    let spec = SplitSpec {
        train_fraction,
        seed: resample.seed,
        grouping: resample.grouping,
        stratified,
    };
    let report = evaluate_split(&loaded.data, &spec, &train.config())?;
    warn_unconverged(&[report.model.converged]);
    let result = Outcome {
        train_size: report.split.train.len(),
        test_size: report.split.test.len(),
        test_accuracy: report.test_accuracy,
        train_indices: report.split.train,
        test_indices: report.split.test,
        test_predictions: report.predictions,
        converged: report.model.converged,
        iterations: report.model.iterations,
    };
    let config = Config {
        base: resample_config(args, train, resample),
        train_fraction,
        stratified,
    };
    let m = manifest(
        "eval-split",
        config,
        Some(resample.seed),
        data_input(loaded.digest),
        &clock,
    );
    write_output(out, &render(&m, &result))
}

#[derive(Serialize)]
struct FoldConfig {
    #[serde(flatten)]
    base: ResampleConfig,
    k: usize,
}

fn eval_cv(
    args: &DataArgs,
    train: &TrainArgs,
    resample: &ResampleArgs,
    folds: &FoldArgs,
    out: Option<&Path>,
    clock: Clock,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Outcome {
        k: usize,
        mean_accuracy: f64,
        per_fold_accuracy: Vec<f64>,
        fold_sizes: Vec<usize>,
        fold_assignments: Vec<usize>,
        predictions: Vec<RiskClass>,
        converged: Vec<bool>,
    }
    let loaded = load(args)?;
    let k = folds.k as usize;
    let report = k_fold_cv(
        &loaded.data,
        k,
        resample.seed,
        resample.grouping,
        &train.config(),
    )?;
    warn_unconverged(&report.converged);
    let result = Outcome {
        k,
        mean_accuracy: report.mean_accuracy,
        fold_sizes: report.fold_sizes(),
        per_fold_accuracy: report.per_fold_accuracy,
        fold_assignments: report.fold_assignments,
        predictions: report.predictions,
        converged: report.converged,
    };
    let config = FoldConfig {
        base: resample_config(args, train, resample),
        k,
    };
    let m = manifest(
        "eval-cv",
        config,
        Some(resample.seed),
        data_input(loaded.digest),
        &clock,
    );
    write_output(out, &render(&m, &result))
}

struct BootstrapArgs {
    replicates: usize,
    level: f64,
    bins: usize,
}

fn bootstrap(
    args: &DataArgs,
    train: &TrainArgs,
    resample: &ResampleArgs,
    folds: &FoldArgs,
    opts: BootstrapArgs,
    out: Option<&Path>,
    clock: Clock,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Config {
        #[serde(flatten)]
        base: FoldConfig,
        replicates: usize,
        level: f64,
        bins: usize,
    }
    #[derive(Serialize)]
    struct Histogram {
        lower: f64,
        upper: f64,
        counts: Vec<usize>,
    }
    #[derive(Serialize)]
    struct Outcome {
        level: f64,
        ci_low: f64,
        ci_high: f64,
        /// Cross-validation accuracy on the same fold partition.
        cv_mean_accuracy: f64,
        fold_sizes: Vec<usize>,
        histogram: Histogram,
        accuracies: Vec<f64>,
        replicate_meta: Vec<ReplicateMeta>,
        skipped: Vec<SkippedReplicate>,
    }
    let loaded = load(args)?;
    let data = &loaded.data;
    let k = folds.k as usize;
    let config = train.config();
    let dist = bootstrap_accuracy(
        data,
        k,
        opts.replicates,
        resample.seed,
        resample.grouping,
        &config,
    )?;
    if !dist.skipped.is_empty() {
        eprintln!(
            "warning: {} replicates skipped after {} redraws each",
            dist.skipped.len(),
            tdp_risk::evaluation::MAX_RESAMPLE_ATTEMPTS
        );
    }
    let (ci_low, ci_high) = percentile_ci(&dist, opts.level)?;
    let cv = k_fold_cv(data, k, resample.seed, resample.grouping, &config)?;
    let result = Outcome {
        level: opts.level,
        ci_low,
        ci_high,
        cv_mean_accuracy: cv.mean_accuracy,
        fold_sizes: fold_rows(&dist.fold_assignments, k)
            .iter()
            .map(|s| s.test.len())
            .collect(),
        histogram: Histogram {
            lower: 0.0,
            upper: 1.0,
            counts: histogram(&dist.accuracies, opts.bins),
        },
        accuracies: dist.accuracies,
        replicate_meta: dist.replicate_meta,
        skipped: dist.skipped,
    };
    let config = Config {
        base: FoldConfig {
            base: resample_config(args, train, resample),
            k,
        },
        replicates: opts.replicates,
        level: opts.level,
        bins: opts.bins,
    };
    let m = manifest(
        "bootstrap",
        config,
        Some(resample.seed),
        data_input(loaded.digest),
        &clock,
    );
    write_output(out, &render(&m, &result))
}

fn importance(
    args: &DataArgs,
    train: &TrainArgs,
    resample: &ResampleArgs,
    folds: &FoldArgs,
    repeats: usize,
    out: Option<&Path>,
    clock: Clock,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Config {
        #[serde(flatten)]
        base: FoldConfig,
        repeats: usize,
    }
    #[derive(Serialize)]
    struct Outcome {
        baseline_accuracy: f64,
        /// Present when no predictor has positive raw importance.
        #[serde(skip_serializing_if = "Option::is_none")]
        normalization_error: Option<String>,
        /// Sorted by decreasing raw importance.
        entries: Vec<ImportanceEntry>,
    }
    let loaded = load(args)?;
    let k = folds.k as usize;
    let table = permutation_importance(
        &loaded.data,
        k,
        resample.seed,
        repeats,
        resample.grouping,
        &train.config(),
    )?;
    let (table, normalization_error) = match normalize_importance(&table) {
        Ok(normalized) => (normalized, None),
        Err(e) => {
            eprintln!("warning: {e}");
            (table, Some(e.to_string()))
        }
    };
    let result = Outcome {
        baseline_accuracy: table.baseline_accuracy,
        normalization_error,
        entries: table.sorted_descending(),
    };
    let config = Config {
        base: FoldConfig {
            base: resample_config(args, train, resample),
            k,
        },
        repeats,
    };
    let m = manifest(
        "importance",
        config,
        Some(resample.seed),
        data_input(loaded.digest),
        &clock,
    );
    write_output(out, &render(&m, &result))
}

fn synth(config: &SynthConfig, out: Option<&Path>) -> Result<(), CliError> {
    let data = synthesize_dataset(config)?;
    let mut bytes = Vec::new();
    write_csv(&data, &mut bytes)?;
    write_output(out, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tdp_risk::FeatureSelection;

    #[test]
    fn data_config_records_resolved_feature_names() {
        let args = DataArgs {
            data: PathBuf::from("d.csv"),
            features: FeatureSelection::All,
        };
        assert_eq!(DataConfig::new(&args).features.len(), 15);
        let args = DataArgs {
            data: PathBuf::from("d.csv"),
            features: FeatureSelection::parse("qte,jt").unwrap(),
        };
        assert_eq!(DataConfig::new(&args).features, ["qte", "jt"]);
    }
}
