//! roofline-forge: offline hierarchical Roofline analysis for GPU
//! profiler counter exports.
//!
//! The pipeline mirrors a characterize -> ingest -> analyze -> report
//! workflow:
//!
//! * [`machine`] holds a device's compute and bandwidth ceilings and the
//!   machine file format, plus theoretical-peak arithmetic.
//! * [`ingest`] parses normalized counter CSVs, merges deterministic
//!   multi-pass runs, and assembles per-invocation and per-kernel
//!   profiles. [`adapter`] converts raw profiler exports.
//! * [`roofline`] computes arithmetic intensities, attainable and
//!   achieved performance, bound classifications, zero-AI censuses, and
//!   run-to-run comparisons.
//! * [`report`] renders SVG Roofline charts, census tables, and text
//!   summaries.
//! * [`synth`] generates deterministic fixtures.

pub mod adapter;
pub mod error;
pub mod ingest;
pub mod machine;
pub mod numfmt;
pub mod report;
pub mod roofline;
pub mod synth;

pub use error::{Error, Result};
