//! Three-class drug TdP risk classification from wedge-assay features.
//!
//! The model is multinomial logistic regression with one coefficient row per
//! class, fitted by penalized maximum likelihood. Around it sit the
//! resampling protocols used to judge it: train-test split, stratified
//! k-fold cross-validation, a bootstrap accuracy distribution with a
//! percentile interval, and permutation predictor importance.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod rng;
pub mod trainer;

pub use data::{
    load_csv, load_csv_with, load_records, permute_labels, synthesize_dataset, write_csv,
    FeatureSelection, Record, SynthConfig, FEATURE_COLUMNS,
};
pub use error::{CsvError, Error, Result};
pub use evaluation::{
    accuracy, assign_folds, bootstrap_accuracy, evaluate_split, histogram, k_fold_cv,
    normalize_importance, percentile_ci, permutation_importance, split_indices, train_test_split,
    BootstrapDistribution, CVReport, Grouping, ImportanceEntry, ImportanceTable, SplitSpec,
};
pub use model::{
    class_probabilities, classify, linear_scores, negative_log_likelihood, nll_gradient, softmax,
    ClassProbabilities, CoefficientMatrix, Dataset, Design, FeatureVector, Observation, RiskClass,
};
pub use trainer::{fit, fit_design, predict, FittedModel, TrainConfig};
