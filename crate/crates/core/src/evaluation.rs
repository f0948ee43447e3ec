//! Resampling protocols: accuracy, train-test split, stratified k-fold
//! cross-validation, bootstrap accuracy distributions and permutation
//! predictor importance.
//!
//! Every randomized step draws from a stream derived from the caller's seed
//! and the coordinates of the work unit (see [`crate::rng`]), and results are
//! merged by index, so output does not depend on thread count.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{class_probabilities, Dataset, RiskClass, NUM_CLASSES};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::trainer::{fit_design, FittedModel, TrainConfig};

/// Redraws allowed for a bootstrap resample that lost a class.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Observations are assigned independently.
    #[default]
    ByObservation,
    /// All replicates of a drug stay together.
    ByDrug,
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grouping::ByObservation => "by_observation",
            Grouping::ByDrug => "by_drug",
        })
    }
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_observation" => Ok(Grouping::ByObservation),
            "by_drug" => Ok(Grouping::ByDrug),
            other => Err(Error::Config(format!(
                "unknown grouping `{other}` (expected by_observation or by_drug)"
            ))),
        }
    }
}

/// Fraction of correct predictions.
pub fn accuracy(truth: &[RiskClass], predicted: &[RiskClass]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Dataset("accuracy of an empty prediction set".into()));
    }
    let correct = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Rounds to the nearest integer, ties to even.
fn round_half_even(x: f64) -> usize {
    let r = x.round_ties_even();
    if r <= 0.0 {
        0
    } else {
        r as usize
    }
}

/// A resampling unit: one observation, or every replicate of one drug.
struct Unit {
    members: Vec<usize>,
    label: RiskClass,
}

/// Units in data order. A drug's stratum is the label of its first row.
fn units(data: &Dataset, grouping: Grouping) -> Vec<Unit> {
    let obs = data.observations();
    match grouping {
        Grouping::ByObservation => obs
            .iter()
            .enumerate()
            .map(|(i, o)| Unit {
                members: vec![i],
                label: o.label,
            })
            .collect(),
        Grouping::ByDrug => {
            let mut index: HashMap<&str, usize> = HashMap::new();
            let mut out: Vec<Unit> = Vec::new();
            for (i, o) in obs.iter().enumerate() {
                match index.get(o.drug_id.as_str()) {
                    Some(&u) => out[u].members.push(i),
                    None => {
                        index.insert(&o.drug_id, out.len());
                        out.push(Unit {
                            members: vec![i],
                            label: o.label,
                        });
                    }
                }
            }
            out
        }
    }
}

/// Unit indices per class, each list shuffled by `rng`.
fn shuffled_strata<R: Rng>(units: &[Unit], rng: &mut R) -> [Vec<usize>; NUM_CLASSES] {
    let mut strata: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (u, unit) in units.iter().enumerate() {
        strata[unit.label.index()].push(u);
    }
    for s in &mut strata {
        s.shuffle(rng);
    }
    strata
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub grouping: Grouping,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            grouping: Grouping::ByObservation,
            stratified: true,
        }
    }
}

/// Observation indices of the two sides of a split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions observation indices into training and test sides.
///
/// The training side receives `round(train_fraction * units)` units (ties to
/// even), where a unit is an observation or, under [`Grouping::ByDrug`], a
/// drug. When stratified, per-class quotas are allotted by largest remainder
/// so each class is within one unit of its proportional share.
pub fn split_indices(data: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Split(format!(
            "train fraction must lie strictly between 0 and 1, got {f}"
        )));
    }
    let units = units(data, spec.grouping);
    let total = units.len();
    let target = round_half_even(f * total as f64);
    if target == 0 || target >= total {
        return Err(Error::Split(format!(
            "train fraction {f} of {total} units leaves one side empty"
        )));
    }

    let mut rng = stream_rng(spec.seed, Stream::Split, &[]);
    let mut train_units: Vec<usize> = Vec::with_capacity(target);
    if spec.stratified {
        let strata = shuffled_strata(&units, &mut rng);
        let shares: Vec<f64> = strata.iter().map(|s| f * s.len() as f64).collect();
        let mut quotas: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
        let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
        order.sort_by(|&a, &b| {
            let ra = shares[a] - shares[a].floor();
            let rb = shares[b] - shares[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut remaining = target.saturating_sub(quotas.iter().sum());
        for &k in order.iter().cycle().take(NUM_CLASSES * 2) {
            if remaining == 0 {
                break;
            }
            if quotas[k] < strata[k].len() {
                quotas[k] += 1;
                remaining -= 1;
            }
        }
        for (k, stratum) in strata.iter().enumerate() {
            if !stratum.is_empty() && quotas[k] == 0 {
                return Err(Error::Split(format!(
                    "class {} would be absent from the training side",
                    RiskClass::ALL[k]
                )));
            }
            train_units.extend_from_slice(&stratum[..quotas[k]]);
        }
    } else {
        let mut all: Vec<usize> = (0..total).collect();
        all.shuffle(&mut rng);
        train_units.extend_from_slice(&all[..target]);
    }

    let mut in_train = vec![false; data.len()];
    for &u in &train_units {
        for &i in &units[u].members {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| in_train[i]);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split("split leaves one side empty".into()));
    }
    Ok(Split { train, test })
}

pub fn train_test_split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let split = split_indices(data, spec)?;
    Ok((data.subset(&split.train)?, data.subset(&split.test)?))
}

/// Fits on one side of a split and scores the other.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub split: Split,
    pub model: FittedModel,
    pub predictions: Vec<RiskClass>,
    pub test_accuracy: f64,
}

pub fn evaluate_split(
    data: &Dataset,
    spec: &SplitSpec,
    config: &TrainConfig,
) -> Result<SplitReport> {
    let split = split_indices(data, spec)?;
    let model = fit_design(
        &data.design_of(&split.train),
        data.feature_names().to_vec(),
        config,
    )?;
    let predictions = predict_rows(&model, data, &split.test)?;
    let truth: Vec<RiskClass> = split
        .test
        .iter()
        .map(|&i| data.observations()[i].label)
        .collect();
    let test_accuracy = accuracy(&truth, &predictions)?;
    Ok(SplitReport {
        split,
        model,
        predictions,
        test_accuracy,
    })
}

fn predict_rows(model: &FittedModel, data: &Dataset, rows: &[usize]) -> Result<Vec<RiskClass>> {
    rows.iter()
        .map(|&i| Ok(model.predict(&data.observations()[i].features)?.1))
        .collect()
}

/// Stratified fold id for every observation.
///
/// Units are grouped by class, shuffled within class, concatenated in class
/// order and dealt round-robin, so fold sizes (in units) differ by at most
/// one and each class is spread as evenly as possible.
pub fn assign_folds(data: &Dataset, k: usize, seed: u64, grouping: Grouping) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let units = units(data, grouping);
    if k > units.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds the number of {} ({})",
            match grouping {
                Grouping::ByObservation => "observations",
                Grouping::ByDrug => "drugs",
            },
            units.len()
        )));
    }
    let mut rng = stream_rng(seed, Stream::Folds, &[]);
    let strata = shuffled_strata(&units, &mut rng);
    for (c, stratum) in strata.iter().enumerate() {
        // Per drug, a class only needs two units to appear in every
        // training portion; per observation, each fold must see it.
        let needed = match grouping {
            Grouping::ByObservation => k,
            Grouping::ByDrug => 2,
        };
        if stratum.len() < needed {
            return Err(Error::Config(format!(
                "class {} has {} units, fewer than the {needed} needed for stratified {k}-fold assignment",
                RiskClass::ALL[c],
                stratum.len()
            )));
        }
    }
    let mut folds = vec![0; data.len()];
    for (pos, &u) in strata.iter().flatten().enumerate() {
        for &i in &units[u].members {
            folds[i] = pos % k;
        }
    }
    Ok(folds)
}

fn indices_where(assignments: &[usize], pred: impl Fn(usize) -> bool) -> Vec<usize> {
    assignments
        .iter()
        .enumerate()
        .filter(|(_, &f)| pred(f))
        .map(|(i, _)| i)
        .collect()
}

/// Per-fold training and test rows for a fold assignment.
pub fn fold_rows(assignments: &[usize], k: usize) -> Vec<Split> {
    (0..k)
        .map(|fold| Split {
            train: indices_where(assignments, |f| f != fold),
            test: indices_where(assignments, |f| f == fold),
        })
        .collect()
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order always follows the index.
fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fold models fitted on each training portion.
pub fn fit_folds(
    data: &Dataset,
    assignments: &[usize],
    k: usize,
    config: &TrainConfig,
) -> Result<Vec<FittedModel>> {
    let rows = fold_rows(assignments, k);
    map_indexed(k, |fold| {
        fit_design(
            &data.design_of(&rows[fold].train),
            data.feature_names().to_vec(),
            config,
        )
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub fold_assignments: Vec<usize>,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Out-of-fold prediction for every observation.
    pub predictions: Vec<RiskClass>,
    /// Whether each fold's optimizer met its gradient tolerance.
    pub converged: Vec<bool>,
}

impl CVReport {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn k_fold_cv(
    data: &Dataset,
    k: usize,
    seed: u64,
    grouping: Grouping,
    config: &TrainConfig,
) -> Result<CVReport> {
    let assignments = assign_folds(data, k, seed, grouping)?;
    let models = fit_folds(data, &assignments, k, config)?;
    cv_report(data, assignments, &models)
}

fn cv_report(
    data: &Dataset,
    fold_assignments: Vec<usize>,
    models: &[FittedModel],
) -> Result<CVReport> {
    let k = models.len();
    let mut predictions = vec![RiskClass::L; data.len()];
    let mut per_fold_accuracy = Vec::with_capacity(k);
    for (fold, split) in fold_rows(&fold_assignments, k).iter().enumerate() {
        let predicted = predict_rows(&models[fold], data, &split.test)?;
        let truth: Vec<RiskClass> = split
            .test
            .iter()
            .map(|&i| data.observations()[i].label)
            .collect();
        per_fold_accuracy.push(accuracy(&truth, &predicted)?);
        for (&i, p) in split.test.iter().zip(predicted) {
            predictions[i] = p;
        }
    }
    Ok(CVReport {
        k,
        mean_accuracy: mean(&per_fold_accuracy),
        per_fold_accuracy,
        fold_assignments,
        predictions,
        converged: models.iter().map(|m| m.converged).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateMeta {
    pub replicate: usize,
    pub fold: usize,
    /// Seed of the accepted resample.
    pub seed: u64,
    /// Draws needed, 1 when the first resample contained every class.
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedReplicate {
    pub replicate: usize,
    pub fold: usize,
    pub reason: String,
}

/// Accuracies of models fitted on bootstrap resamples of each fold's
/// training portion and scored on the untouched test fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub accuracies: Vec<f64>,
    pub replicate_meta: Vec<ReplicateMeta>,
    pub skipped: Vec<SkippedReplicate>,
    pub master_seed: u64,
    pub fold_assignments: Vec<usize>,
}

impl BootstrapDistribution {
    /// Accuracies sorted ascending.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.accuracies.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

enum ReplicateOutcome {
    Done(f64, ReplicateMeta),
    Skipped(SkippedReplicate),
}

/// Replicate `i` resamples the training portion of fold `i mod k`.
pub fn bootstrap_accuracy(
    data: &Dataset,
    k: usize,
    total_replicates: usize,
    master_seed: u64,
    grouping: Grouping,
    config: &TrainConfig,
) -> Result<BootstrapDistribution> {
    if total_replicates == 0 {
        return Err(Error::Config(
            "at least one bootstrap replicate is required".into(),
        ));
    }
    config.validate()?;
    let fold_assignments = assign_folds(data, k, master_seed, grouping)?;
    let rows = fold_rows(&fold_assignments, k);
    let names = data.feature_names().to_vec();
    let truth: Vec<Vec<RiskClass>> = rows
        .iter()
        .map(|s| {
            s.test
                .iter()
                .map(|&i| data.observations()[i].label)
                .collect()
        })
        .collect();

    let run = |i: usize| -> Result<ReplicateOutcome> {
        let fold = i % k;
        let train = &rows[fold].train;
        let mut sample = vec![0usize; train.len()];
        for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
            let seed = derive_seed(master_seed, Stream::Bootstrap, &[i as u64, attempt as u64]);
            let mut rng = stream_rng(seed, Stream::Bootstrap, &[]);
            let mut present = [false; NUM_CLASSES];
            for s in sample.iter_mut() {
                *s = train[rng.random_range(0..train.len())];
                present[data.observations()[*s].label.index()] = true;
            }
            if present.iter().all(|&p| p) {
                let model = fit_design(&data.design_of(&sample), names.clone(), config)?;
                let predicted = predict_rows(&model, data, &rows[fold].test)?;
                let acc = accuracy(&truth[fold], &predicted)?;
                return Ok(ReplicateOutcome::Done(
                    acc,
                    ReplicateMeta {
                        replicate: i,
                        fold,
                        seed,
                        attempts: attempt + 1,
                    },
                ));
            }
        }
        Ok(ReplicateOutcome::Skipped(SkippedReplicate {
            replicate: i,
            fold,
            reason: format!("every one of {MAX_RESAMPLE_ATTEMPTS} resamples was missing a class"),
        }))
    };

    let mut dist = BootstrapDistribution {
        accuracies: Vec::with_capacity(total_replicates),
        replicate_meta: Vec::with_capacity(total_replicates),
        skipped: Vec::new(),
        master_seed,
        fold_assignments,
    };
    for outcome in map_indexed(total_replicates, run) {
        match outcome? {
            ReplicateOutcome::Done(acc, meta) => {
                dist.accuracies.push(acc);
                dist.replicate_meta.push(meta);
            }
            ReplicateOutcome::Skipped(s) => dist.skipped.push(s),
        }
    }
    Ok(dist)
}

/// Empirical quantile of ascending `sorted` values, interpolating linearly
/// between the order statistics at positions `q * (n - 1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Two-sided percentile interval at `level`.
pub fn percentile_ci(dist: &BootstrapDistribution, level: f64) -> Result<(f64, f64)> {
    if dist.accuracies.is_empty() {
        return Err(Error::Dataset("empty bootstrap distribution".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level must lie strictly between 0 and 1, got {level}"
        )));
    }
    let sorted = dist.sorted();
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&sorted, tail), quantile(&sorted, 1.0 - tail)))
}

/// Counts of `values` in `bins` equal-width bins over `[0, 1]`; the last
/// bin is closed on the right.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 {
        return counts;
    }
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub raw_importance: f64,
    pub normalized_importance: Option<f64>,
    /// Set when a non-positive raw importance was clipped to zero.
    #[serde(default)]
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub entries: Vec<ImportanceEntry>,
    pub baseline_accuracy: f64,
}

impl ImportanceTable {
    /// Entries ordered by decreasing raw importance; ties keep column order.
    pub fn sorted_descending(&self) -> Vec<ImportanceEntry> {
        let mut entries = self.entries.clone();
        entries.sort_by(|a, b| b.raw_importance.total_cmp(&a.raw_importance));
        entries
    }

    pub fn get(&self, feature: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| e.feature == feature)
    }
}

/// Accuracy drop from shuffling each predictor within every test fold.
///
/// Fold models are fitted once and reused for all shuffles. The shuffled
/// accuracy of a predictor is averaged over `repeats` independent shuffles
/// and over folds, matching how the baseline averages over folds.
pub fn permutation_importance(
    data: &Dataset,
    k: usize,
    seed: u64,
    repeats: usize,
    grouping: Grouping,
    config: &TrainConfig,
) -> Result<ImportanceTable> {
    if repeats == 0 {
        return Err(Error::Config(
            "at least one shuffle repeat is required".into(),
        ));
    }
    let assignments = assign_folds(data, k, seed, grouping)?;
    let models = fit_folds(data, &assignments, k, config)?;
    let baseline = cv_report(data, assignments.clone(), &models)?;
    let rows = fold_rows(&assignments, k);
    let p = data.num_features();

    // Standardized test rows per fold; shuffling commutes with the
    // column-wise affine transform.
    let test_rows: Vec<Vec<Vec<f64>>> = rows
        .iter()
        .zip(&models)
        .map(|(split, model)| {
            split
                .test
                .iter()
                .map(|&i| model.transform(&data.observations()[i].features))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let shuffled_correct = |unit: usize| -> Result<Vec<usize>> {
        let (j, r) = (unit / repeats, unit % repeats);
        let mut correct = Vec::with_capacity(k);
        for fold in 0..k {
            let test = &test_rows[fold];
            let mut column: Vec<f64> = test.iter().map(|x| x[j]).collect();
            column.shuffle(&mut stream_rng(
                seed,
                Stream::Permutation,
                &[j as u64, r as u64, fold as u64],
            ));
            let mut hits = 0;
            let mut x = vec![0.0; p];
            for ((row, &v), &i) in test.iter().zip(&column).zip(&rows[fold].test) {
                x.copy_from_slice(row);
                x[j] = v;
                if class_probabilities(&models[fold].beta, &x)?.classify()
                    == data.observations()[i].label
                {
                    hits += 1;
                }
            }
            correct.push(hits);
        }
        Ok(correct)
    };
    let counts = map_indexed(p * repeats, shuffled_correct)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let entries = (0..p)
        .map(|j| {
            let fold_acc: Vec<f64> = (0..k)
                .map(|fold| {
                    let hits: usize = (0..repeats).map(|r| counts[j * repeats + r][fold]).sum();
                    hits as f64 / (repeats * rows[fold].test.len()) as f64
                })
                .collect();
            ImportanceEntry {
                feature: data.feature_names()[j].clone(),
                raw_importance: baseline.mean_accuracy - mean(&fold_acc),
                normalized_importance: None,
                clipped: false,
            }
        })
        .collect();
    Ok(ImportanceTable {
        entries,
        baseline_accuracy: baseline.mean_accuracy,
    })
}

/// Divides every raw importance by the largest one. Non-positive entries
/// are clipped to zero and flagged.
pub fn normalize_importance(table: &ImportanceTable) -> Result<ImportanceTable> {
    let max = table
        .entries
        .iter()
        .map(|e| e.raw_importance)
        .fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() || max <= 0.0 {
        return Err(Error::Normalization);
    }
    let entries = table
        .entries
        .iter()
        .map(|e| {
            let positive = e.raw_importance > 0.0;
            ImportanceEntry {
                normalized_importance: Some(if positive {
                    e.raw_importance / max
                } else {
                    0.0
                }),
                clipped: !positive,
                ..e.clone()
            }
        })
        .collect();
    Ok(ImportanceTable {
        entries,
        baseline_accuracy: table.baseline_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_dataset, SynthConfig};
    use crate::model::{FeatureVector, Observation};

    fn fixture() -> Dataset {
        synthesize_dataset(&SynthConfig {
            class_separation: 3.0,
            seed: 1,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn accuracy_counts_matches() {
        use RiskClass::*;
        let truth: Vec<RiskClass> = (0..112).map(|i| RiskClass::ALL[i % 3]).collect();
        let mut predicted = truth.clone();
        for p in predicted.iter_mut().take(23) {
            *p = if *p == L { M } else { L };
        }
        assert_eq!(accuracy(&truth, &predicted).unwrap(), 89.0 / 112.0);
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        assert_eq!(accuracy(&[L, M, H], &[M, H, L]).unwrap(), 0.0);
        assert!(accuracy(&[L], &[L, M]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn round_half_even_cases() {
        assert_eq!(round_half_even(89.6), 90);
        assert_eq!(round_half_even(2.5), 2);
        assert_eq!(round_half_even(3.5), 4);
        assert_eq!(round_half_even(0.4), 0);
    }

    #[test]
    fn split_sizes_and_stratification() {
        let data = fixture();
        let split = split_indices(&data, &SplitSpec::default()).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (90, 22));
        let counts = data.class_counts();
        let mut train_counts = [0usize; 3];
        for &i in &split.train {
            train_counts[data.observations()[i].label.index()] += 1;
        }
        for k in 0..3 {
            let share = 0.8 * counts[k] as f64;
            assert!(
                (train_counts[k] as f64 - share).abs() <= 1.0,
                "{train_counts:?}"
            );
        }
        assert_eq!(split, split_indices(&data, &SplitSpec::default()).unwrap());
    }

    #[test]
    fn split_by_drug_keeps_replicates_together() {
        let data = fixture();
        for stratified in [true, false] {
            let spec = SplitSpec {
                grouping: Grouping::ByDrug,
                stratified,
                seed: 9,
                ..SplitSpec::default()
            };
            let (train, test) = train_test_split(&data, &spec).unwrap();
            let train_drugs = train.drugs();
            assert!(test.drugs().iter().all(|d| !train_drugs.contains(d)));
            assert_eq!(train.len() + test.len(), data.len());
            // 0.8 * 28 = 22.4 drugs -> 22 drugs -> 88 rows
            assert_eq!(train.len(), 88);
        }
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let data = fixture();
        for f in [0.0, 1.0, 0.001, 0.9999, f64::NAN] {
            let spec = SplitSpec {
                train_fraction: f,
                ..SplitSpec::default()
            };
            assert!(
                matches!(split_indices(&data, &spec), Err(Error::Split(_))),
                "{f}"
            );
        }
    }

    #[test]
    fn stratified_split_reports_vanishing_class() {
        let obs: Vec<Observation> = (0..10)
            .map(|i| Observation {
                drug_id: format!("d{i}"),
                replicate: 1,
                features: FeatureVector::new(vec![i as f64]).unwrap(),
                label: if i == 0 {
                    RiskClass::H
                } else if i < 5 {
                    RiskClass::L
                } else {
                    RiskClass::M
                },
            })
            .collect();
        let data = Dataset::new(vec!["x".into()], obs).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.3,
            ..SplitSpec::default()
        };
        let err = split_indices(&data, &spec).unwrap_err();
        assert!(err.to_string().contains("class H"), "{err}");
    }

    #[test]
    fn fold_sizes_for_112_by_5() {
        let data = fixture();
        let folds = assign_folds(&data, 5, 0, Grouping::ByObservation).unwrap();
        let mut sizes = vec![0; 5];
        for f in &folds {
            sizes[*f] += 1;
        }
        assert_eq!(sizes, vec![23, 23, 22, 22, 22]);
        assert_eq!(
            folds,
            assign_folds(&data, 5, 0, Grouping::ByObservation).unwrap()
        );
        assert_ne!(
            folds,
            assign_folds(&data, 5, 1, Grouping::ByObservation).unwrap()
        );
    }

    #[test]
    fn folds_by_drug_balance_drug_counts() {
        let data = fixture();
        let folds = assign_folds(&data, 5, 4, Grouping::ByDrug).unwrap();
        let mut drugs_per_fold = vec![std::collections::BTreeSet::new(); 5];
        for (o, f) in data.observations().iter().zip(&folds) {
            drugs_per_fold[*f].insert(o.drug_id.clone());
        }
        let counts: Vec<usize> = drugs_per_fold.iter().map(|s| s.len()).collect();
        assert_eq!(counts.iter().sum::<usize>(), 28);
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        // leave-one-drug-out is allowed
        assert!(assign_folds(&data, 28, 0, Grouping::ByDrug).is_ok());
    }

    #[test]
    fn fold_preconditions() {
        let data = fixture();
        assert!(assign_folds(&data, 1, 0, Grouping::ByObservation).is_err());
        assert!(assign_folds(&data, 113, 0, Grouping::ByObservation).is_err());
        // 32 L observations cannot fill 40 folds
        assert!(assign_folds(&data, 40, 0, Grouping::ByObservation).is_err());
    }

    #[test]
    fn quantile_interpolates_order_statistics() {
        let sorted = [0.0, 0.25, 0.5, 0.75, 1.0];
        assert_eq!(quantile(&sorted, 0.0), 0.0);
        assert_eq!(quantile(&sorted, 0.5), 0.5);
        assert_eq!(quantile(&sorted, 1.0), 1.0);
        assert!((quantile(&sorted, 0.025) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.04, 0.05, 0.5, 0.99, 1.0], 20);
        assert_eq!(h.iter().sum::<usize>(), 6);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 1);
        assert_eq!(h[10], 1);
        assert_eq!(h[19], 2);
    }

    #[test]
    fn normalization() {
        let table = |raw: &[f64]| ImportanceTable {
            entries: raw
                .iter()
                .enumerate()
                .map(|(i, &r)| ImportanceEntry {
                    feature: format!("f{i}"),
                    raw_importance: r,
                    normalized_importance: None,
                    clipped: false,
                })
                .collect(),
            baseline_accuracy: 0.9,
        };
        let n = normalize_importance(&table(&[0.20, 0.10])).unwrap();
        assert_eq!(n.entries[0].normalized_importance, Some(1.0));
        assert_eq!(n.entries[1].normalized_importance, Some(0.5));

        let n = normalize_importance(&table(&[0.0, 0.3, -0.1])).unwrap();
        assert_eq!(n.entries[1].normalized_importance, Some(1.0));
        assert_eq!(n.entries[0].normalized_importance, Some(0.0));
        assert!(n.entries[0].clipped && n.entries[2].clipped && !n.entries[1].clipped);

        assert_eq!(
            normalize_importance(&table(&[0.0, -0.2])),
            Err(Error::Normalization)
        );
    }

    #[test]
    fn empty_distribution_has_no_interval() {
        let dist = BootstrapDistribution {
            accuracies: vec![],
            replicate_meta: vec![],
            skipped: vec![],
            master_seed: 0,
            fold_assignments: vec![],
        };
        assert!(percentile_ci(&dist, 0.95).is_err());
    }
}
