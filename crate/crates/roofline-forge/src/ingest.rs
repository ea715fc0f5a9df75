//! Profiler counter ingestion: normalized CSV parsing, multi-pass run
//! merging, and assembly into per-invocation and per-kernel profiles.
//!
//! The normalized CSV schema (`kernel_name,invocation_index,metric_name,
//! value,unit,phase_tag`) is the contract; [`crate::adapter`] converts raw
//! profiler exports into it. Metric names follow the profiler's counter
//! naming:
//!
//! * time: `sm__cycles_elapsed.avg` and `sm__cycles_elapsed.avg.per_second`
//! * FLOPs per precision: `sm__sass_thread_inst_executed_op_{d,f,h}{add,mul,fma}_pred_on.sum`
//!   (d = FP64, f = FP32, h = FP16; some published metric tables list the
//!   FP64 rows with h-prefixed names, which is read as a transcription slip)
//! * tensor pipe instructions: `sm__inst_executed_pipe_tensor.sum`
//! * bytes: `l1tex__t_bytes.sum` (L1), `lts__t_bytes.sum` (L2),
//!   `dram__bytes.sum` (HBM)
//!
//! Multiple single-metric passes over a deterministic application merge
//! into one logical run keyed by (kernel, invocation index).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::machine::MemoryLevel;

pub const METRIC_CYCLES: &str = "sm__cycles_elapsed.avg";
pub const METRIC_CYCLES_PER_SECOND: &str = "sm__cycles_elapsed.avg.per_second";
pub const METRIC_TENSOR_INST: &str = "sm__inst_executed_pipe_tensor.sum";
pub const METRIC_L1_BYTES: &str = "l1tex__t_bytes.sum";
pub const METRIC_L2_BYTES: &str = "lts__t_bytes.sum";
pub const METRIC_HBM_BYTES: &str = "dram__bytes.sum";

/// FLOPs per tensor pipe warp instruction on the modeled device.
pub const FLOPS_PER_TENSOR_INST: u64 = 512;

/// Relative tolerance for re-measured cycle counters across merged passes.
pub const CYCLE_JITTER_TOLERANCE: f64 = 0.05;

fn flop_metric(prefix: char, op: &str) -> String {
    format!("sm__sass_thread_inst_executed_op_{prefix}{op}_pred_on.sum")
}

/// One raw (kernel, invocation, metric, value) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub kernel_name: String,
    pub invocation_index: u64,
    pub metric_name: String,
    pub value: f64,
    pub unit: Option<String>,
    pub phase_tag: Option<String>,
}

/// Per-precision FLOP counters plus tensor pipe instructions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlopCounts {
    pub fp64: u64,
    pub fp32: u64,
    pub fp16: u64,
    /// Warp-level tensor instructions, not yet converted to FLOPs.
    pub tensor_instructions: u64,
}

impl FlopCounts {
    /// Total FLOPs with tensor instructions converted at 512 FLOPs each.
    pub fn total_flops(&self) -> u64 {
        self.fp64 + self.fp32 + self.fp16 + tensor_flops(self.tensor_instructions)
    }

    pub fn add(&mut self, other: &FlopCounts) {
        self.fp64 += other.fp64;
        self.fp32 += other.fp32;
        self.fp16 += other.fp16;
        self.tensor_instructions += other.tensor_instructions;
    }
}

/// Tensor Core FLOPs from warp instruction count: inst * 512.
pub fn tensor_flops(instructions: u64) -> u64 {
    instructions * FLOPS_PER_TENSOR_INST
}

/// FLOPs of one precision from its add/mul/fma instruction counters.
/// An FMA counts as two FLOPs.
pub fn compose_flops(add: u64, mul: u64, fma: u64) -> u64 {
    add + mul + 2 * fma
}

/// All counters of one kernel launch.
#[derive(Debug, Clone, PartialEq)]
pub struct InvocationProfile {
    pub kernel_name: String,
    pub invocation_index: u64,
    pub cycles: f64,
    pub cycles_per_second: f64,
    pub flops: FlopCounts,
    pub bytes: BTreeMap<MemoryLevel, u64>,
    pub phase_tag: Option<String>,
    /// False when any non-mandatory counter family was absent and
    /// defaulted to zero.
    pub complete: bool,
}

impl InvocationProfile {
    /// Kernel execution time: cycles / rate.
    pub fn time_s(&self) -> Result<f64> {
        invocation_time(self)
    }
}

/// time = cycles / rate over the elapsed-cycle counter pair.
pub fn invocation_time(inv: &InvocationProfile) -> Result<f64> {
    if inv.cycles == 0.0 {
        return Ok(0.0);
    }
    if !(inv.cycles_per_second > 0.0) {
        return Err(Error::ZeroCycleRate {
            kernel: inv.kernel_name.clone(),
            cycles: inv.cycles,
        });
    }
    Ok(inv.cycles / inv.cycles_per_second)
}

/// Aggregation of all invocations of one kernel within one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProfile {
    pub kernel_name: String,
    pub phase_tag: Option<String>,
    pub invocation_count: u64,
    pub time_s: f64,
    pub total_flops: FlopCounts,
    pub total_bytes: BTreeMap<MemoryLevel, u64>,
    pub complete: bool,
}

/// One profiled execution: the launch sequence plus its per-kernel rollup.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRun {
    pub label: String,
    pub invocations: Vec<InvocationProfile>,
    pub kernels: Vec<KernelProfile>,
    pub machine_ref: Option<String>,
}

impl ProfileRun {
    pub fn from_invocations(label: impl Into<String>, invocations: Vec<InvocationProfile>) -> Self {
        let kernels = aggregate_kernels(&invocations);
        ProfileRun {
            label: label.into(),
            invocations,
            kernels,
            machine_ref: None,
        }
    }
}

const CSV_HEADER: [&str; 6] = [
    "kernel_name",
    "invocation_index",
    "metric_name",
    "value",
    "unit",
    "phase_tag",
];

/// Parse a normalized metrics CSV. Row order is preserved; diagnostics
/// carry 1-based row numbers (header is row 1).
pub fn parse_metrics_csv(reader: impl Read) -> Result<Vec<MetricRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Csv("empty file (missing header)".into()));
    }
    for required in CSV_HEADER.iter().take(4) {
        if !headers.iter().any(|h| h == *required) {
            return Err(Error::Csv(format!("missing required column {required:?}")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (c_kernel, c_idx, c_metric, c_value) = (
        col("kernel_name").unwrap(),
        col("invocation_index").unwrap(),
        col("metric_name").unwrap(),
        col("value").unwrap(),
    );
    let c_unit = col("unit");
    let c_phase = col("phase_tag");

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2; // 1-based, after the header
        let row = row.map_err(|e| Error::CsvRow {
            row: row_no,
            reason: e.to_string(),
        })?;
        let field = |idx: usize| row.get(idx).unwrap_or("").trim();
        let invocation_index: u64 = field(c_idx).parse().map_err(|_| Error::CsvRow {
            row: row_no,
            reason: format!("invocation_index {:?} is not an integer", field(c_idx)),
        })?;
        let value: f64 = field(c_value).parse().map_err(|_| Error::CsvRow {
            row: row_no,
            reason: format!("value {:?} is not numeric", field(c_value)),
        })?;
        if value < 0.0 {
            return Err(Error::CsvRow {
                row: row_no,
                reason: format!("value {value} is negative"),
            });
        }
        let metric_name = field(c_metric);
        if metric_name.is_empty() {
            return Err(Error::CsvRow {
                row: row_no,
                reason: "metric_name is empty".into(),
            });
        }
        let opt = |idx: Option<usize>| {
            idx.map(|c| field(c))
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
        };
        records.push(MetricRecord {
            kernel_name: field(c_kernel).to_owned(),
            invocation_index,
            metric_name: metric_name.to_owned(),
            value,
            unit: opt(c_unit),
            phase_tag: opt(c_phase),
        });
    }
    if records.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    Ok(records)
}

/// Write records back out in the normalized schema, field for field.
pub fn write_metrics_csv(records: &[MetricRecord], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)
        .map_err(|e| Error::Csv(e.to_string()))?;
    for r in records {
        wtr.write_record([
            r.kernel_name.as_str(),
            &r.invocation_index.to_string(),
            r.metric_name.as_str(),
            &format_value(r.value),
            r.unit.as_deref().unwrap_or(""),
            r.phase_tag.as_deref().unwrap_or(""),
        ])
        .map_err(|e| Error::Csv(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// Launch sequence of a run: (kernel, invocation index) pairs in row order,
/// deduplicated (one pass lists each invocation once per metric).
fn launch_sequence(records: &[MetricRecord]) -> Vec<(String, u64)> {
    let mut seen = std::collections::BTreeSet::new();
    let mut seq = Vec::new();
    for r in records {
        let key = (r.kernel_name.clone(), r.invocation_index);
        if seen.insert(key.clone()) {
            seq.push(key);
        }
    }
    seq.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    seq
}

/// Merge single-metric passes over a deterministic application into one
/// record set. Every pass must observe the same launch sequence; duplicate
/// metrics must agree exactly, except re-measured cycle counters which may
/// jitter within [`CYCLE_JITTER_TOLERANCE`] (the first pass wins).
pub fn merge_runs(runs: &[Vec<MetricRecord>]) -> Result<Vec<MetricRecord>> {
    let Some((first, rest)) = runs.split_first() else {
        return Ok(Vec::new());
    };
    let reference_seq = launch_sequence(first);
    for run in rest {
        let seq = launch_sequence(run);
        for (i, (a, b)) in reference_seq.iter().zip(seq.iter()).enumerate() {
            if a != b {
                return Err(Error::DeterminismViolation {
                    index: i,
                    left: a.0.clone(),
                    right: b.0.clone(),
                });
            }
        }
        if seq.len() != reference_seq.len() {
            let idx = reference_seq.len().min(seq.len());
            let (longer, side) = if seq.len() > reference_seq.len() {
                (&seq, "extra")
            } else {
                (&reference_seq, "missing")
            };
            return Err(Error::DeterminismViolation {
                index: idx,
                left: format!("{} invocation", side),
                right: longer[idx].0.clone(),
            });
        }
    }

    let mut merged: BTreeMap<(String, u64, String), MetricRecord> = BTreeMap::new();
    let mut order: Vec<(String, u64, String)> = Vec::new();
    for run in runs {
        for r in run {
            let key = (
                r.kernel_name.clone(),
                r.invocation_index,
                r.metric_name.clone(),
            );
            match merged.get(&key) {
                None => {
                    order.push(key.clone());
                    merged.insert(key, r.clone());
                }
                Some(existing) => {
                    let is_cycles = r.metric_name.starts_with(METRIC_CYCLES);
                    let tol = if is_cycles { CYCLE_JITTER_TOLERANCE } else { 0.0 };
                    let scale = existing.value.abs().max(r.value.abs()).max(f64::MIN_POSITIVE);
                    if (existing.value - r.value).abs() > tol * scale {
                        return Err(Error::MetricConflict {
                            kernel: r.kernel_name.clone(),
                            invocation: r.invocation_index,
                            metric: r.metric_name.clone(),
                            left: existing.value,
                            right: r.value,
                        });
                    }
                }
            }
        }
    }
    Ok(order.into_iter().map(|k| merged.remove(&k).unwrap()).collect())
}

struct MetricMap {
    values: BTreeMap<String, f64>,
    phase_tag: Option<String>,
}

/// Group records into per-invocation profiles applying the counter-name
/// mapping. Missing FLOP/byte counters default to zero and clear the
/// `complete` flag; the elapsed-cycle pair is mandatory.
pub fn assemble_invocations(records: &[MetricRecord]) -> Result<Vec<InvocationProfile>> {
    let mut groups: BTreeMap<(u64, String), MetricMap> = BTreeMap::new();
    let mut order: Vec<(u64, String)> = Vec::new();
    for r in records {
        let key = (r.invocation_index, r.kernel_name.clone());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            MetricMap {
                values: BTreeMap::new(),
                phase_tag: None,
            }
        });
        entry.values.insert(r.metric_name.clone(), r.value);
        if entry.phase_tag.is_none() {
            entry.phase_tag = r.phase_tag.clone();
        }
    }

    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let group = groups.remove(&key).unwrap();
        let (invocation_index, kernel_name) = key;
        let get = |name: &str| group.values.get(name).copied();
        let cycles = get(METRIC_CYCLES);
        let rate = get(METRIC_CYCLES_PER_SECOND);
        if cycles.is_none() && rate.is_none() {
            return Err(Error::MissingTimeMetrics {
                kernel: kernel_name,
                invocation: invocation_index,
            });
        }
        let cycles = cycles.unwrap_or(0.0);
        let rate = rate.unwrap_or(0.0);
        if cycles > 0.0 && !(rate > 0.0) {
            return Err(Error::ZeroCycleRate {
                kernel: kernel_name,
                cycles,
            });
        }

        let mut complete = true;
        let mut count = |name: String| -> u64 {
            match group.values.get(&name) {
                Some(v) => v.round() as u64,
                None => {
                    complete = false;
                    0
                }
            }
        };
        let mut per_precision = |prefix: char| -> u64 {
            let add = count(flop_metric(prefix, "add"));
            let mul = count(flop_metric(prefix, "mul"));
            let fma = count(flop_metric(prefix, "fma"));
            compose_flops(add, mul, fma)
        };
        let fp64 = per_precision('d');
        let fp32 = per_precision('f');
        let fp16 = per_precision('h');
        let tensor_instructions = count(METRIC_TENSOR_INST.to_string());
        let mut bytes = BTreeMap::new();
        bytes.insert(MemoryLevel::L1, count(METRIC_L1_BYTES.to_string()));
        bytes.insert(MemoryLevel::L2, count(METRIC_L2_BYTES.to_string()));
        bytes.insert(MemoryLevel::HBM, count(METRIC_HBM_BYTES.to_string()));

        out.push(InvocationProfile {
            kernel_name,
            invocation_index,
            cycles,
            cycles_per_second: rate,
            flops: FlopCounts {
                fp64,
                fp32,
                fp16,
                tensor_instructions,
            },
            bytes,
            phase_tag: group.phase_tag,
            complete,
        });
    }
    Ok(out)
}

/// Roll invocations up by (kernel name, phase tag), summing every counter
/// and the per-invocation times. Output is sorted by name then phase.
pub fn aggregate_kernels(invocations: &[InvocationProfile]) -> Vec<KernelProfile> {
    let mut groups: BTreeMap<(String, Option<String>), KernelProfile> = BTreeMap::new();
    for inv in invocations {
        let key = (inv.kernel_name.clone(), inv.phase_tag.clone());
        let time = invocation_time(inv).unwrap_or(0.0);
        let entry = groups.entry(key).or_insert_with(|| KernelProfile {
            kernel_name: inv.kernel_name.clone(),
            phase_tag: inv.phase_tag.clone(),
            invocation_count: 0,
            time_s: 0.0,
            total_flops: FlopCounts::default(),
            total_bytes: BTreeMap::new(),
            complete: true,
        });
        entry.invocation_count += 1;
        entry.time_s += time;
        entry.total_flops.add(&inv.flops);
        for (level, b) in &inv.bytes {
            *entry.total_bytes.entry(level.clone()).or_insert(0) += b;
        }
        entry.complete &= inv.complete;
    }
    groups.into_values().collect()
}

/// Full ingest pipeline: merge passes, assemble, aggregate.
pub fn build_run(label: impl Into<String>, runs: &[Vec<MetricRecord>]) -> Result<ProfileRun> {
    let merged = merge_runs(runs)?;
    let invocations = assemble_invocations(&merged)?;
    Ok(ProfileRun::from_invocations(label, invocations))
}
