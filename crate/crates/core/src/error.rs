use thiserror::Error;

use crate::model::RiskClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} predictors, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("class {0} is absent from the training data")]
    MissingClass(RiskClass),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("no predictor has positive importance; nothing to normalize against")]
    Normalization,

    #[error(transparent)]
    Csv(#[from] CsvError),
}

/// Loader diagnostics. Rows are 1-based data rows (the header is row 0).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsvError {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}, column {column}: empty cell")]
    EmptyCell { row: usize, column: String },

    #[error("row {row}, column {column}: cannot parse `{value}` as a number")]
    InvalidNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column {column}: `{value}` is not finite")]
    NonFiniteNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column replicate: `{value}` is not a positive integer")]
    InvalidReplicate { row: usize, value: String },

    #[error("row {row}, column risk: unknown risk label `{value}`")]
    UnknownLabel { row: usize, value: String },

    #[error("row {row}: duplicate observation (drug `{drug}`, replicate {replicate})")]
    DuplicateObservation {
        row: usize,
        drug: String,
        replicate: u32,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("file contains a header but no observations")]
    EmptyDataset,

    #[error("unknown feature `{0}` requested")]
    UnknownFeature(String),

    #[error("malformed CSV: {0}")]
    Malformed(String),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension_mismatch",
            Error::Numeric(_) => "numeric",
            Error::MissingClass(_) => "missing_class",
            Error::Config(_) => "invalid_config",
            Error::Dataset(_) => "invalid_dataset",
            Error::Split(_) => "invalid_split",
            Error::Normalization => "normalization",
            Error::Csv(e) => e.code(),
        }
    }
}

impl CsvError {
    pub fn code(&self) -> &'static str {
        match self {
            CsvError::MissingColumn(_) => "missing_column",
            CsvError::DuplicateColumn(_) => "duplicate_column",
            CsvError::UnknownColumn(_) => "unknown_column",
            CsvError::EmptyCell { .. } => "empty_cell",
            CsvError::InvalidNumber { .. } => "invalid_number",
            CsvError::NonFiniteNumber { .. } => "non_finite_number",
            CsvError::InvalidReplicate { .. } => "invalid_replicate",
            CsvError::UnknownLabel { .. } => "unknown_label",
            CsvError::DuplicateObservation { .. } => "duplicate_observation",
            CsvError::FieldCount { .. } => "field_count",
            CsvError::EmptyDataset => "empty_dataset",
            CsvError::UnknownFeature(_) => "unknown_feature",
            CsvError::Malformed(_) => "malformed_csv",
        }
    }
}
