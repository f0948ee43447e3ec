//! WebAssembly entry points for the browser demo. Each export synthesizes a
//! dataset from the page controls, runs one evaluation and returns JSON.

use serde::Serialize;
use tdp_risk::{
    bootstrap_accuracy, histogram, k_fold_cv, normalize_importance, percentile_ci,
    permutation_importance, permute_labels, synthesize_dataset, Dataset, Grouping, SynthConfig,
    TrainConfig,
};
use wasm_bindgen::prelude::*;

const FOLDS: usize = 5;
const BINS: usize = 20;
const LEVEL: f64 = 0.95;

fn dataset(separation: f64, noise: f64, seed: u64) -> Result<Dataset, String> {
    if !(separation.is_finite() && separation >= 0.0 && noise.is_finite() && noise >= 0.0) {
        return Err("separation and noise must be finite and non-negative".into());
    }
    synthesize_dataset(&SynthConfig {
        class_separation: separation,
        replicate_noise: noise,
        seed,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo results serialize")
}

#[derive(Serialize)]
struct CvSummary {
    observations: usize,
    mean_accuracy: f64,
    per_fold_accuracy: Vec<f64>,
    fold_sizes: Vec<usize>,
    /// Same protocol on the same data with shuffled labels.
    null_mean_accuracy: f64,
}

pub fn cross_validation_json(separation: f64, noise: f64, seed: u64) -> Result<String, String> {
    let data = dataset(separation, noise, seed)?;
    let config = TrainConfig::default();
    let run = |d: &Dataset| {
        k_fold_cv(d, FOLDS, seed, Grouping::ByObservation, &config).map_err(|e| e.to_string())
    };
    let report = run(&data)?;
    let null = run(&permute_labels(&data, seed).map_err(|e| e.to_string())?)?;
    Ok(to_json(&CvSummary {
        observations: data.len(),
        mean_accuracy: report.mean_accuracy,
        fold_sizes: report.fold_sizes(),
        per_fold_accuracy: report.per_fold_accuracy,
        null_mean_accuracy: null.mean_accuracy,
    }))
}

#[derive(Serialize)]
struct BootstrapSummary {
    replicates: usize,
    skipped: usize,
    level: f64,
    ci_low: f64,
    ci_high: f64,
    cv_mean_accuracy: f64,
    /// Counts over equal-width bins spanning [0, 1].
    histogram: Vec<usize>,
}

pub fn bootstrap_json(
    separation: f64,
    noise: f64,
    seed: u64,
    replicates: usize,
) -> Result<String, String> {
    let data = dataset(separation, noise, seed)?;
    let config = TrainConfig::default();
    let dist = bootstrap_accuracy(
        &data,
        FOLDS,
        replicates,
        seed,
        Grouping::ByObservation,
        &config,
    )
    .map_err(|e| e.to_string())?;
    let (ci_low, ci_high) = percentile_ci(&dist, LEVEL).map_err(|e| e.to_string())?;
    let cv = k_fold_cv(&data, FOLDS, seed, Grouping::ByObservation, &config)
        .map_err(|e| e.to_string())?;
    Ok(to_json(&BootstrapSummary {
        replicates: dist.accuracies.len(),
        skipped: dist.skipped.len(),
        level: LEVEL,
        ci_low,
        ci_high,
        cv_mean_accuracy: cv.mean_accuracy,
        histogram: histogram(&dist.accuracies, BINS),
    }))
}

#[derive(Serialize)]
struct ImportanceRow {
    feature: String,
    raw: f64,
    normalized: Option<f64>,
}

#[derive(Serialize)]
struct ImportanceSummary {
    baseline_accuracy: f64,
    /// Present when no predictor has positive importance.
    note: Option<String>,
    entries: Vec<ImportanceRow>,
}

pub fn importance_json(
    separation: f64,
    noise: f64,
    seed: u64,
    repeats: usize,
) -> Result<String, String> {
    let data = dataset(separation, noise, seed)?;
    let table = permutation_importance(
        &data,
        FOLDS,
        seed,
        repeats,
        Grouping::ByObservation,
        &TrainConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let (table, note) = match normalize_importance(&table) {
        Ok(normalized) => (normalized, None),
        Err(e) => (table, Some(e.to_string())),
    };
    let entries = table
        .sorted_descending()
        .into_iter()
        .map(|e| ImportanceRow {
            feature: e.feature,
            raw: e.raw_importance,
            normalized: e.normalized_importance,
        })
        .collect();
    Ok(to_json(&ImportanceSummary {
        baseline_accuracy: table.baseline_accuracy,
        note,
        entries,
    }))
}

#[wasm_bindgen(js_name = crossValidation)]
pub fn cross_validation(separation: f64, noise: f64, seed: u32) -> Result<String, JsError> {
    cross_validation_json(separation, noise, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bootstrap(
    separation: f64,
    noise: f64,
    seed: u32,
    replicates: u32,
) -> Result<String, JsError> {
    bootstrap_json(separation, noise, seed.into(), replicates as usize)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn importance(separation: f64, noise: f64, seed: u32, repeats: u32) -> Result<String, JsError> {
    importance_json(separation, noise, seed.into(), repeats as usize).map_err(|e| JsError::new(&e))
}
