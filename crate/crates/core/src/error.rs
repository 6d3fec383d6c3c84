use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("dates must be strictly increasing (violation at index {0})")]
    UnsortedDates(usize),

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("insufficient data: {what} needs at least {needed}, got {got}")]
    InsufficientData { what: &'static str, needed: usize, got: usize },

    #[error("period {label} selects {count} observations (need at least 2)")]
    EmptySlice { label: String, count: usize },

    #[error("degenerate split: train {train}, test {test} (each needs at least 2)")]
    DegenerateSplit { train: usize, test: usize },

    #[error("series share no common dates")]
    EmptyIntersection,

    #[error("constant input: {0}")]
    ConstantInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero actual value at index {0}")]
    ZeroActual(usize),

    #[error("non-positive MAE at index {0}")]
    NonPositiveMae(usize),

    #[error("singular regression: {0}")]
    SingularRegression(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("fitted AR polynomial is non-stationary (root modulus {0:.6})")]
    NonStationary(f64),

    #[error("fitted MA polynomial is non-invertible (root modulus {0:.6})")]
    NonInvertible(f64),

    #[error("training diverged at epoch {0}")]
    Divergence(usize),

    #[error("no candidate order converged")]
    NoModelConverged,

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
