//! Machine ceilings: compute peaks, bandwidth peaks, and the machine file.
//!
//! A machine file plays the role of a characterization run's output: it
//! records the ceilings (empirical or theoretical, distinguished only by
//! label) against which kernels are judged. Theoretical Tensor Core peaks
//! can also be computed directly from hardware parameters.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::sig6;

/// Largest GEMM dimension accepted by [`gemm_flops`]; 2*(2^20)^3 still
/// fits in a u64, the next power of two does not.
pub const GEMM_DIM_LIMIT: u64 = 1 << 20;

/// Hardware parameters sufficient to compute a theoretical Tensor Core peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub sm_count: u32,
    pub tensor_units_per_sm: u32,
    pub clock_ghz: f64,
    /// Matrix dimension of one tensor unit op (4 on V100).
    pub tensor_tile_dim: u32,
}

impl MachineSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sm_count == 0 {
            return Err(Error::Validation {
                field: "sm_count",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.clock_ghz > 0.0) {
            return Err(Error::Validation {
                field: "clock_ghz",
                reason: format!("must be positive, got {}", self.clock_ghz),
            });
        }
        if self.tensor_tile_dim == 0 {
            return Err(Error::Validation {
                field: "tensor_tile_dim",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Which execution pipeline a compute ceiling describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    CudaCore,
    TensorCore,
}

/// Floating-point precision of a ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fp64,
    Fp32,
    Fp16,
    Mixed,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Precision::Fp64 => "fp64",
            Precision::Fp32 => "fp32",
            Precision::Fp16 => "fp16",
            Precision::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// One horizontal Roofline ceiling in GFLOP/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeCeiling {
    pub label: String,
    pub pipeline: Pipeline,
    pub precision: Precision,
    pub gflops: f64,
}

/// A level of the memory hierarchy, ordered closest-to-compute first.
///
/// The three built-in levels follow the profiler's byte counters; extra
/// levels carry an explicit order index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MemoryLevel {
    #[serde(with = "level_names")]
    Builtin(BuiltinLevel),
    Extra { name: String, order: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BuiltinLevel {
    L1,
    L2,
    Hbm,
}

mod level_names {
    use super::BuiltinLevel;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BuiltinLevel, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match v {
            BuiltinLevel::L1 => "L1",
            BuiltinLevel::L2 => "L2",
            BuiltinLevel::Hbm => "HBM",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BuiltinLevel, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "L1" => Ok(BuiltinLevel::L1),
            "L2" => Ok(BuiltinLevel::L2),
            "HBM" => Ok(BuiltinLevel::Hbm),
            other => Err(de::Error::custom(format!(
                "unknown memory level {other:?} (expected L1, L2, or HBM)"
            ))),
        }
    }
}

impl MemoryLevel {
    pub const L1: MemoryLevel = MemoryLevel::Builtin(BuiltinLevel::L1);
    pub const L2: MemoryLevel = MemoryLevel::Builtin(BuiltinLevel::L2);
    pub const HBM: MemoryLevel = MemoryLevel::Builtin(BuiltinLevel::Hbm);

    /// Sort key: built-in levels are 0/1/2, extras use their declared index.
    fn rank(&self) -> (u32, &str) {
        match self {
            MemoryLevel::Builtin(BuiltinLevel::L1) => (0, "L1"),
            MemoryLevel::Builtin(BuiltinLevel::L2) => (1, "L2"),
            MemoryLevel::Builtin(BuiltinLevel::Hbm) => (2, "HBM"),
            MemoryLevel::Extra { name, order } => (*order, name.as_str()),
        }
    }

    pub fn name(&self) -> &str {
        self.rank().1
    }
}

impl Ord for MemoryLevel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for MemoryLevel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MemoryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One slanted Roofline ceiling in GB/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthCeiling {
    pub level: MemoryLevel,
    pub gbytes_per_s: f64,
}

/// The full ceiling description of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineModel {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<MachineSpec>,
    pub compute_ceilings: Vec<ComputeCeiling>,
    pub bandwidth_ceilings: Vec<BandwidthCeiling>,
}

impl MachineModel {
    pub fn validate(&self) -> Result<()> {
        if let Some(spec) = &self.spec {
            spec.validate()?;
        }
        if self.compute_ceilings.is_empty() {
            return Err(Error::Validation {
                field: "compute_ceilings",
                reason: "at least one compute ceiling is required".into(),
            });
        }
        if self.bandwidth_ceilings.is_empty() {
            return Err(Error::Validation {
                field: "bandwidth_ceilings",
                reason: "at least one bandwidth ceiling is required".into(),
            });
        }
        let mut labels = BTreeSet::new();
        for c in &self.compute_ceilings {
            if !(c.gflops > 0.0) {
                return Err(Error::Validation {
                    field: "compute_ceilings",
                    reason: format!("ceiling {:?} has non-positive gflops", c.label),
                });
            }
            if !labels.insert(c.label.as_str()) {
                return Err(Error::Validation {
                    field: "compute_ceilings",
                    reason: format!("duplicate ceiling label {:?}", c.label),
                });
            }
        }
        let mut levels = BTreeSet::new();
        for b in &self.bandwidth_ceilings {
            if !(b.gbytes_per_s > 0.0) {
                return Err(Error::Validation {
                    field: "bandwidth_ceilings",
                    reason: format!("level {} has non-positive bandwidth", b.level),
                });
            }
            if !levels.insert(b.level.clone()) {
                return Err(Error::Validation {
                    field: "bandwidth_ceilings",
                    reason: format!("duplicate bandwidth ceiling for level {}", b.level),
                });
            }
        }
        Ok(())
    }

    pub fn bandwidth_for(&self, level: &MemoryLevel) -> Option<&BandwidthCeiling> {
        self.bandwidth_ceilings.iter().find(|b| &b.level == level)
    }

    /// Bandwidth ceilings sorted closest-to-compute first.
    pub fn bandwidth_ceilings_ordered(&self) -> Vec<&BandwidthCeiling> {
        let mut out: Vec<_> = self.bandwidth_ceilings.iter().collect();
        out.sort_by(|a, b| a.level.cmp(&b.level));
        out
    }
}

/// Theoretical Tensor Core peak in GFLOP/s:
/// SMs x tensor units/SM x clock (GHz) x tile^3 x 2 (FMA).
pub fn theoretical_tensor_peak(spec: &MachineSpec) -> Result<f64> {
    spec.validate()?;
    let tile = spec.tensor_tile_dim as f64;
    Ok(spec.sm_count as f64
        * spec.tensor_units_per_sm as f64
        * spec.clock_ghz
        * tile.powi(3)
        * 2.0)
}

/// FLOPs of a square M=N=K GEMM: 2*m^3. Constant-coefficient multiplies
/// are excluded as negligible.
pub fn gemm_flops(m: u64) -> Result<u64> {
    if m == 0 {
        return Err(Error::Validation {
            field: "m",
            reason: "GEMM dimension must be at least 1".into(),
        });
    }
    if m > GEMM_DIM_LIMIT {
        return Err(Error::Validation {
            field: "m",
            reason: format!("GEMM dimension {m} exceeds limit {GEMM_DIM_LIMIT} (u64 overflow)"),
        });
    }
    Ok(2 * m * m * m)
}

/// Estimated GEMM throughput in GFLOP/s: 2*m^3 / t.
pub fn gemm_gflops(m: u64, seconds: f64) -> Result<f64> {
    if !(seconds > 0.0) {
        return Err(Error::Validation {
            field: "seconds",
            reason: format!("run time must be positive, got {seconds}"),
        });
    }
    Ok(gemm_flops(m)? as f64 / seconds / 1e9)
}

/// Arithmetic intensity at which the compute and bandwidth branches of the
/// Roofline intersect. Above it the compute ceiling binds.
pub fn ridge_point(compute: &ComputeCeiling, bandwidth: &BandwidthCeiling) -> f64 {
    compute.gflops / bandwidth.gbytes_per_s
}

/// Parse a machine file. Unknown fields and schema violations are rejected
/// with the parser's line/column diagnostics.
pub fn load_machine_file(path: impl AsRef<Path>) -> Result<MachineModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_machine_json(&text).map_err(|reason| Error::MachineFile {
        path: path.display().to_string(),
        reason,
    })
}

pub fn parse_machine_json(text: &str) -> std::result::Result<MachineModel, String> {
    let model: MachineModel = serde_json::from_str(text).map_err(|e| e.to_string())?;
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

/// Canonical serialization: fixed key order, six significant digits,
/// two-space indent, trailing newline. load then save is the identity on
/// files written by this serializer.
pub fn machine_to_canonical_json(model: &MachineModel) -> String {
    let mut canon = model.clone();
    if let Some(spec) = &mut canon.spec {
        spec.clock_ghz = sig6(spec.clock_ghz);
    }
    for c in &mut canon.compute_ceilings {
        c.gflops = sig6(c.gflops);
    }
    for b in &mut canon.bandwidth_ceilings {
        b.gbytes_per_s = sig6(b.gbytes_per_s);
    }
    let mut out = serde_json::to_string_pretty(&canon).expect("machine model serializes");
    out.push('\n');
    out
}

pub fn save_machine_file(model: &MachineModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    model.validate()?;
    fs::write(path, machine_to_canonical_json(model)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
