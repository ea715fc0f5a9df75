//! Crate-wide error type.
//!
//! Variants are grouped so the CLI can map them onto its exit-code
//! taxonomy: parse/config problems, merge conflicts, and missing
//! mandatory metrics are distinguishable.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("machine file {path}: {reason}")]
    MachineFile { path: String, reason: String },

    #[error("metrics CSV row {row}: {reason}")]
    CsvRow { row: usize, reason: String },

    #[error("metrics CSV: {0}")]
    Csv(String),

    #[error(
        "determinism violation: kernel sequence diverges at invocation index {index} \
         ({left:?} vs {right:?})"
    )]
    DeterminismViolation {
        index: usize,
        left: String,
        right: String,
    },

    #[error(
        "metric conflict for kernel {kernel:?} invocation {invocation} metric {metric:?}: \
         {left} vs {right}"
    )]
    MetricConflict {
        kernel: String,
        invocation: u64,
        metric: String,
        left: f64,
        right: f64,
    },

    #[error(
        "kernel {kernel:?} invocation {invocation} has no time metrics \
         (sm__cycles_elapsed.avg and its per_second submetric are mandatory)"
    )]
    MissingTimeMetrics { kernel: String, invocation: u64 },

    #[error("kernel {kernel:?}: cycle rate is zero with {cycles} elapsed cycles")]
    ZeroCycleRate { kernel: String, cycles: f64 },

    #[error("kernel {kernel:?}: run time is zero but {flops} FLOPs were counted")]
    DegenerateTime { kernel: String, flops: u64 },

    #[error("no bandwidth ceiling configured for memory level {level}")]
    MissingBandwidthCeiling { level: String },

    #[error("no compute ceiling matches {wanted} in the machine model")]
    MissingComputeCeiling { wanted: String },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DeterminismViolation { .. } | Error::MetricConflict { .. } => 3,
            Error::MissingTimeMetrics { .. } => 4,
            _ => 2,
        }
    }
}
