//! Roofline analysis: arithmetic intensities, attainable performance,
//! bound classification, zero-AI censuses, and run comparisons.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{tensor_flops, KernelProfile, ProfileRun};
use crate::machine::{
    BandwidthCeiling, ComputeCeiling, MachineModel, MemoryLevel, Pipeline, Precision,
};

/// Utilization above this threshold is flagged as a data-quality warning
/// (counter noise against empirical ceilings) rather than an error.
pub const UTILIZATION_WARN_THRESHOLD: f64 = 1.05;

/// Attainable performance at a given arithmetic intensity: the minimum of
/// the compute ceiling and the bandwidth ceiling scaled by AI.
pub fn attainable(ai: f64, compute: &ComputeCeiling, bandwidth: &BandwidthCeiling) -> f64 {
    compute.gflops.min(bandwidth.gbytes_per_s * ai)
}

/// Fraction of a kernel's FLOPs by contributor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PrecisionMix {
    pub fp64: f64,
    pub fp32: f64,
    pub fp16: f64,
    pub tensor: f64,
}

/// One (kernel x memory level) chart point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RooflinePoint {
    pub kernel_name: String,
    pub phase_tag: Option<String>,
    pub level: MemoryLevel,
    /// FLOPs per byte moved at this level.
    pub ai: f64,
    pub achieved_gflops: f64,
    pub time_s: f64,
    pub precision_mix: PrecisionMix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundKind {
    ZeroAi,
    MemoryBound { level: MemoryLevel },
    ComputeBound,
}

impl BoundKind {
    pub fn is_zero_ai(&self) -> bool {
        matches!(self, BoundKind::ZeroAi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelClassification {
    pub kernel_name: String,
    pub phase_tag: Option<String>,
    #[serde(flatten)]
    pub kind: BoundKind,
    /// Label of the ceiling the kernel was judged against; absent for
    /// zero-AI kernels.
    pub reference_ceiling: Option<String>,
    /// Achieved / attainable at the binding term.
    pub utilization: f64,
    pub time_s: f64,
    pub warnings: Vec<String>,
}

fn precision_mix(kernel: &KernelProfile) -> PrecisionMix {
    let f = &kernel.total_flops;
    let tensor = tensor_flops(f.tensor_instructions);
    let total = f.fp64 + f.fp32 + f.fp16 + tensor;
    if total == 0 {
        return PrecisionMix::default();
    }
    let total = total as f64;
    PrecisionMix {
        fp64: f.fp64 as f64 / total,
        fp32: f.fp32 as f64 / total,
        fp16: f.fp16 as f64 / total,
        tensor: tensor as f64 / total,
    }
}

/// Total FLOPs of a kernel with tensor instructions converted.
pub fn kernel_total_flops(kernel: &KernelProfile) -> u64 {
    kernel.total_flops.total_flops()
}

/// Achieved throughput in GFLOP/s.
fn achieved_gflops(kernel: &KernelProfile) -> Result<f64> {
    let flops = kernel_total_flops(kernel);
    if flops == 0 {
        return Ok(0.0);
    }
    if !(kernel.time_s > 0.0) {
        return Err(Error::DegenerateTime {
            kernel: kernel.kernel_name.clone(),
            flops,
        });
    }
    Ok(flops as f64 / kernel.time_s / 1e9)
}

/// Chart points of a kernel, one per memory level with bytes > 0.
///
/// A zero-FLOP kernel yields no points (it belongs in the zero-AI census);
/// levels without traffic yield no point rather than an infinite-AI one.
pub fn roofline_points(kernel: &KernelProfile) -> Result<Vec<RooflinePoint>> {
    let flops = kernel_total_flops(kernel);
    if flops == 0 {
        return Ok(Vec::new());
    }
    let achieved = achieved_gflops(kernel)?;
    let mix = precision_mix(kernel);
    let mut points = Vec::new();
    for (level, &bytes) in &kernel.total_bytes {
        if bytes == 0 {
            continue;
        }
        points.push(RooflinePoint {
            kernel_name: kernel.kernel_name.clone(),
            phase_tag: kernel.phase_tag.clone(),
            level: level.clone(),
            ai: flops as f64 / bytes as f64,
            achieved_gflops: achieved,
            time_s: kernel.time_s,
            precision_mix: mix,
        });
    }
    Ok(points)
}

/// Pick the compute ceiling matching the kernel's dominant FLOP
/// contributor: the tensor pipeline when tensor FLOPs reach half the
/// total, otherwise the precision contributing the most FLOPs. Ties break
/// toward the higher ceiling.
pub fn reference_ceiling<'m>(
    kernel: &KernelProfile,
    machine: &'m MachineModel,
) -> Result<&'m ComputeCeiling> {
    let f = &kernel.total_flops;
    let tensor = tensor_flops(f.tensor_instructions);
    let total = f.fp64 + f.fp32 + f.fp16 + tensor;
    debug_assert!(total > 0, "zero-FLOP kernels have no reference ceiling");

    let best = |candidates: Vec<&'m ComputeCeiling>, wanted: String| {
        candidates
            .into_iter()
            .max_by(|a, b| a.gflops.total_cmp(&b.gflops))
            .ok_or(Error::MissingComputeCeiling { wanted })
    };

    if 2 * tensor >= total {
        let candidates: Vec<_> = machine
            .compute_ceilings
            .iter()
            .filter(|c| c.pipeline == Pipeline::TensorCore)
            .collect();
        return best(candidates, "pipeline tensor_core".into());
    }

    let by_precision = [
        (Precision::Fp64, f.fp64),
        (Precision::Fp32, f.fp32),
        (Precision::Fp16, f.fp16),
    ];
    let max_flops = by_precision.iter().map(|(_, n)| *n).max().unwrap();
    let candidates: Vec<_> = machine
        .compute_ceilings
        .iter()
        .filter(|c| {
            c.pipeline == Pipeline::CudaCore
                && by_precision
                    .iter()
                    .any(|(p, n)| *n == max_flops && c.precision == *p)
        })
        .collect();
    let wanted = by_precision
        .iter()
        .filter(|(_, n)| *n == max_flops)
        .map(|(p, _)| p.to_string())
        .collect::<Vec<_>>()
        .join(" or ");
    best(candidates, format!("cuda_core precision {wanted}"))
}

/// Classify one kernel against the machine's ceilings.
///
/// The headline classification evaluates the two branches of the Roofline
/// bound at the outermost level with traffic (HBM in the common case):
/// the kernel is memory-bound when bandwidth x AI falls below the
/// precision-matched compute ceiling, compute-bound otherwise.
pub fn classify(kernel: &KernelProfile, machine: &MachineModel) -> Result<KernelClassification> {
    let flops = kernel_total_flops(kernel);
    if flops == 0 {
        return Ok(KernelClassification {
            kernel_name: kernel.kernel_name.clone(),
            phase_tag: kernel.phase_tag.clone(),
            kind: BoundKind::ZeroAi,
            reference_ceiling: None,
            utilization: 0.0,
            time_s: kernel.time_s,
            warnings: Vec::new(),
        });
    }

    for (level, &bytes) in &kernel.total_bytes {
        if bytes > 0 && machine.bandwidth_for(level).is_none() {
            return Err(Error::MissingBandwidthCeiling {
                level: level.to_string(),
            });
        }
    }

    let ceiling = reference_ceiling(kernel, machine)?;
    let achieved = achieved_gflops(kernel)?;
    let mut warnings = Vec::new();

    // outermost level with traffic
    let headline_level = kernel
        .total_bytes
        .iter()
        .filter(|(_, &b)| b > 0)
        .map(|(l, _)| l.clone())
        .max();

    let (kind, attainable_gflops) = match headline_level {
        None => {
            warnings.push("no byte traffic at any level; AI is undefined".into());
            (BoundKind::ComputeBound, ceiling.gflops)
        }
        Some(level) => {
            let bytes = kernel.total_bytes[&level];
            let ai = flops as f64 / bytes as f64;
            let bandwidth = machine.bandwidth_for(&level).unwrap();
            let roof = attainable(ai, ceiling, bandwidth);
            if bandwidth.gbytes_per_s * ai < ceiling.gflops {
                (BoundKind::MemoryBound { level }, roof)
            } else {
                (BoundKind::ComputeBound, roof)
            }
        }
    };

    let utilization = achieved / attainable_gflops;
    if utilization > UTILIZATION_WARN_THRESHOLD {
        warnings.push(format!(
            "utilization {utilization:.3} exceeds {UTILIZATION_WARN_THRESHOLD} \
             (counter noise or ceiling mismatch)"
        ));
    }

    Ok(KernelClassification {
        kernel_name: kernel.kernel_name.clone(),
        phase_tag: kernel.phase_tag.clone(),
        kind,
        reference_ceiling: Some(ceiling.label.clone()),
        utilization,
        time_s: kernel.time_s,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCensus {
    pub phase: String,
    pub zero_ai: u64,
    pub non_zero_ai: u64,
    pub total: u64,
    /// Percentage of invocations that are zero-AI, rounded to one decimal.
    pub zero_ai_pct: f64,
}

impl PhaseCensus {
    fn new(phase: String, zero_ai: u64, non_zero_ai: u64) -> Self {
        let total = zero_ai + non_zero_ai;
        let pct = if total == 0 {
            0.0
        } else {
            (zero_ai as f64 / total as f64 * 1000.0).round() / 10.0
        };
        PhaseCensus {
            phase,
            zero_ai,
            non_zero_ai,
            total,
            zero_ai_pct: pct,
        }
    }
}

/// Counts of zero-AI kernel invocations per phase plus a grand total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroAiCensus {
    pub phases: Vec<PhaseCensus>,
    pub total: PhaseCensus,
}

pub const UNTAGGED_PHASE: &str = "(untagged)";

/// Display order of training phases; unknown tags follow alphabetically.
fn phase_order_key(phase: &str) -> (u8, String) {
    match phase {
        "forward" => (0, String::new()),
        "backward" => (1, String::new()),
        "optimizer" => (2, String::new()),
        UNTAGGED_PHASE => (4, String::new()),
        other => (3, other.to_string()),
    }
}

/// Count zero-FLOP kernel invocations (not unique kernels) per phase.
pub fn zero_ai_census(run: &ProfileRun) -> ZeroAiCensus {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for inv in &run.invocations {
        let phase = inv
            .phase_tag
            .clone()
            .unwrap_or_else(|| UNTAGGED_PHASE.to_string());
        let entry = counts.entry(phase).or_insert((0, 0));
        if inv.flops.total_flops() == 0 {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    let mut phases: Vec<PhaseCensus> = counts
        .into_iter()
        .map(|(phase, (z, n))| PhaseCensus::new(phase, z, n))
        .collect();
    phases.sort_by_key(|p| phase_order_key(&p.phase));
    let zero: u64 = phases.iter().map(|p| p.zero_ai).sum();
    let non_zero: u64 = phases.iter().map(|p| p.non_zero_ai).sum();
    ZeroAiCensus {
        phases,
        total: PhaseCensus::new("total".into(), zero, non_zero),
    }
}

/// Everything the report layer needs for one analyzed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub run_label: String,
    pub machine_name: String,
    pub points: Vec<RooflinePoint>,
    pub classifications: Vec<KernelClassification>,
    pub census: ZeroAiCensus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    pub warnings: Vec<String>,
}

/// Analyze a full run: points, classifications, and census.
pub fn analyze_run(run: &ProfileRun, machine: &MachineModel) -> Result<AnalysisReport> {
    machine.validate()?;
    let mut kernels: Vec<&KernelProfile> = run.kernels.iter().collect();
    kernels.sort_by(|a, b| {
        a.kernel_name
            .cmp(&b.kernel_name)
            .then_with(|| a.phase_tag.cmp(&b.phase_tag))
    });

    let mut points = Vec::new();
    let mut classifications = Vec::new();
    let mut warnings = Vec::new();
    for kernel in kernels {
        if !kernel.complete {
            warnings.push(format!(
                "kernel {:?}: some counters were missing and defaulted to 0",
                kernel.kernel_name
            ));
        }
        let flops = kernel_total_flops(kernel);
        for (level, &bytes) in &kernel.total_bytes {
            if bytes == 0 && flops > 0 {
                warnings.push(format!(
                    "kernel {:?}: no bytes at {level}; point omitted",
                    kernel.kernel_name
                ));
            }
        }
        points.extend(roofline_points(kernel)?);
        classifications.push(classify(kernel, machine)?);
    }

    Ok(AnalysisReport {
        run_label: run.label.clone(),
        machine_name: machine.name.clone(),
        points,
        classifications,
        census: zero_ai_census(run),
        comparison: None,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDelta {
    pub kernel_name: String,
    pub phase_tag: Option<String>,
    pub time_a_s: f64,
    pub time_b_s: f64,
    pub time_delta_s: f64,
    pub achieved_a_gflops: f64,
    pub achieved_b_gflops: f64,
    /// Per-level AI difference (a minus b), keyed by level name.
    pub ai_delta: BTreeMap<String, f64>,
    pub utilization_a: f64,
    pub utilization_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseZeroAiDelta {
    pub phase: String,
    pub zero_ai_a: u64,
    pub zero_ai_b: u64,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKernel {
    pub kernel_name: String,
    pub phase_tag: Option<String>,
    pub time_s: f64,
}

/// Run-to-run comparison: matched-kernel deltas, per-phase zero-AI deltas,
/// total time deltas, and the top-k kernels by time of each run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub zero_ai_total_a: u64,
    pub zero_ai_total_b: u64,
    pub zero_ai_delta: i64,
    /// a/b ratio of zero-AI invocation totals; absent when b has none.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_ai_ratio: Option<f64>,
    pub phase_zero_ai_deltas: Vec<PhaseZeroAiDelta>,
    pub total_time_a_s: f64,
    pub total_time_b_s: f64,
    pub total_time_delta_s: f64,
    pub matched: Vec<KernelDelta>,
    pub unmatched_a: Vec<TopKernel>,
    pub unmatched_b: Vec<TopKernel>,
    pub top_a: Vec<TopKernel>,
    pub top_b: Vec<TopKernel>,
}

fn top_kernels(run: &ProfileRun, k: usize) -> Vec<TopKernel> {
    let mut sorted: Vec<&KernelProfile> = run.kernels.iter().collect();
    sorted.sort_by(|a, b| {
        b.time_s
            .total_cmp(&a.time_s)
            .then_with(|| a.kernel_name.cmp(&b.kernel_name))
    });
    sorted
        .into_iter()
        .take(k)
        .map(|kp| TopKernel {
            kernel_name: kp.kernel_name.clone(),
            phase_tag: kp.phase_tag.clone(),
            time_s: kp.time_s,
        })
        .collect()
}

/// Compare two runs analyzed against the same machine. Kernels match by
/// exact (name, phase) identity; every kernel of both runs appears exactly
/// once, matched or unmatched.
pub fn compare_runs(
    a: &ProfileRun,
    b: &ProfileRun,
    machine: &MachineModel,
    top_k: usize,
) -> Result<ComparisonReport> {
    let census_a = zero_ai_census(a);
    let census_b = zero_ai_census(b);

    let mut phases: Vec<String> = census_a
        .phases
        .iter()
        .chain(census_b.phases.iter())
        .map(|p| p.phase.clone())
        .collect();
    phases.sort_by_key(|p| phase_order_key(p));
    phases.dedup();
    let phase_zero_ai_deltas = phases
        .into_iter()
        .map(|phase| {
            let find = |c: &ZeroAiCensus| {
                c.phases
                    .iter()
                    .find(|p| p.phase == phase)
                    .map_or(0, |p| p.zero_ai)
            };
            let (za, zb) = (find(&census_a), find(&census_b));
            PhaseZeroAiDelta {
                phase,
                zero_ai_a: za,
                zero_ai_b: zb,
                delta: za as i64 - zb as i64,
            }
        })
        .collect();

    let key = |k: &KernelProfile| (k.kernel_name.clone(), k.phase_tag.clone());
    let map_b: BTreeMap<_, &KernelProfile> = b.kernels.iter().map(|k| (key(k), k)).collect();

    let mut matched = Vec::new();
    let mut unmatched_a = Vec::new();
    for ka in &a.kernels {
        let Some(kb) = map_b.get(&key(ka)) else {
            unmatched_a.push(TopKernel {
                kernel_name: ka.kernel_name.clone(),
                phase_tag: ka.phase_tag.clone(),
                time_s: ka.time_s,
            });
            continue;
        };
        let ai_map = |k: &KernelProfile| -> BTreeMap<String, f64> {
            let flops = kernel_total_flops(k) as f64;
            k.total_bytes
                .iter()
                .filter(|(_, &bytes)| bytes > 0)
                .map(|(l, &bytes)| (l.name().to_string(), flops / bytes as f64))
                .collect()
        };
        let (ai_a, ai_b) = (ai_map(ka), ai_map(kb));
        let mut ai_delta = BTreeMap::new();
        for (level, v) in &ai_a {
            ai_delta.insert(level.clone(), v - ai_b.get(level).copied().unwrap_or(0.0));
        }
        for (level, v) in &ai_b {
            ai_delta.entry(level.clone()).or_insert(-v);
        }
        let (ca, cb) = (classify(ka, machine)?, classify(kb, machine)?);
        matched.push(KernelDelta {
            kernel_name: ka.kernel_name.clone(),
            phase_tag: ka.phase_tag.clone(),
            time_a_s: ka.time_s,
            time_b_s: kb.time_s,
            time_delta_s: ka.time_s - kb.time_s,
            achieved_a_gflops: achieved_gflops(ka)?,
            achieved_b_gflops: achieved_gflops(kb)?,
            ai_delta,
            utilization_a: ca.utilization,
            utilization_b: cb.utilization,
        });
    }
    let map_a: BTreeMap<_, ()> = a.kernels.iter().map(|k| (key(k), ())).collect();
    let unmatched_b = b
        .kernels
        .iter()
        .filter(|k| !map_a.contains_key(&key(k)))
        .map(|k| TopKernel {
            kernel_name: k.kernel_name.clone(),
            phase_tag: k.phase_tag.clone(),
            time_s: k.time_s,
        })
        .collect();

    let total_time = |run: &ProfileRun| run.kernels.iter().map(|k| k.time_s).sum::<f64>();
    let (ta, tb) = (total_time(a), total_time(b));
    let (za, zb) = (census_a.total.zero_ai, census_b.total.zero_ai);

    Ok(ComparisonReport {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        zero_ai_total_a: za,
        zero_ai_total_b: zb,
        zero_ai_delta: za as i64 - zb as i64,
        zero_ai_ratio: (zb > 0).then(|| za as f64 / zb as f64),
        phase_zero_ai_deltas,
        total_time_a_s: ta,
        total_time_b_s: tb,
        total_time_delta_s: ta - tb,
        matched,
        unmatched_a,
        unmatched_b,
        top_a: top_kernels(a, top_k),
        top_b: top_kernels(b, top_k),
    })
}

/// Serialize an analysis report to JSON with every real number rounded to
/// six significant digits. Identical inputs yield identical bytes.
pub fn report_to_json(report: &AnalysisReport) -> String {
    let mut value = serde_json::to_value(report).expect("report serializes");
    round_numbers(&mut value);
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

pub fn comparison_to_json(report: &ComparisonReport) -> String {
    let mut value = serde_json::to_value(report).expect("comparison serializes");
    round_numbers(&mut value);
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

fn round_numbers(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if n.as_u64().is_none() && n.as_i64().is_none() {
                if let Some(f) = n.as_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(crate::numfmt::sig6(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_numbers),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}
