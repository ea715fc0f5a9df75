//! Deterministic synthetic profile generation for testing and demos.
//!
//! Generated runs are pure functions of the seed, with controllable
//! fractions of zero-FLOP kernels, tensor-heavy kernels, and streaming
//! kernels (near-equal bytes at every level).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    MetricRecord, METRIC_CYCLES, METRIC_CYCLES_PER_SECOND, METRIC_HBM_BYTES, METRIC_L1_BYTES,
    METRIC_L2_BYTES, METRIC_TENSOR_INST,
};
use crate::ingest::{build_run, ProfileRun};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub kernel_count: usize,
    /// Maximum invocations per kernel; the actual count is drawn from
    /// 1..=invocation_span.
    pub invocation_span: usize,
    pub zero_flop_fraction: f64,
    pub tensor_fraction: f64,
    pub streaming_fraction: f64,
    /// Phase tags cycled across kernels; empty means untagged.
    pub phases: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            kernel_count: 8,
            invocation_span: 4,
            zero_flop_fraction: 0.25,
            tensor_fraction: 0.25,
            streaming_fraction: 0.25,
            phases: vec!["forward".into(), "backward".into()],
        }
    }
}

/// Generate the raw metric records of a synthetic run.
///
/// Kernel roles are assigned by position: the first
/// `zero_flop_fraction * kernel_count` kernels perform no floating-point
/// work, the next block is tensor-heavy, the next streams (equal bytes at
/// all levels), and the remainder are ordinary CUDA-core kernels. This
/// makes downstream counts (e.g. the zero-AI census) exact by
/// construction.
pub fn generate_synthetic_records(cfg: &SynthConfig) -> Vec<MetricRecord> {
    assert!(cfg.kernel_count >= 1, "kernel_count must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zero_end = (cfg.zero_flop_fraction * cfg.kernel_count as f64).round() as usize;
    let tensor_end = zero_end + (cfg.tensor_fraction * cfg.kernel_count as f64).round() as usize;
    let stream_end =
        tensor_end + (cfg.streaming_fraction * cfg.kernel_count as f64).round() as usize;

    let mut records = Vec::new();
    let mut invocation_index = 0u64;
    for k in 0..cfg.kernel_count {
        let kernel_name = format!("synth_kernel_{k:04}");
        let phase = if cfg.phases.is_empty() {
            None
        } else {
            Some(cfg.phases[k % cfg.phases.len()].clone())
        };
        let launches = if cfg.invocation_span <= 1 {
            1
        } else {
            rng.gen_range(1..=cfg.invocation_span)
        };
        for _ in 0..launches {
            let cycles = rng.gen_range(1e4_f64..1e7);
            let rate = 1.312e9;
            let mut push = |metric: &str, value: f64| {
                records.push(MetricRecord {
                    kernel_name: kernel_name.clone(),
                    invocation_index,
                    metric_name: metric.to_string(),
                    value,
                    unit: None,
                    phase_tag: phase.clone(),
                });
            };
            push(METRIC_CYCLES, cycles);
            push(METRIC_CYCLES_PER_SECOND, rate);
            let hbm = rng.gen_range(1e5_f64..1e8).round();
            if k < zero_end {
                // data movement only
                push(METRIC_L1_BYTES, hbm * 1.2);
                push(METRIC_L2_BYTES, hbm * 1.1);
                push(METRIC_HBM_BYTES, hbm);
            } else if k < tensor_end {
                push(METRIC_TENSOR_INST, rng.gen_range(1e4_f64..1e6).round());
                push(METRIC_L1_BYTES, hbm * 30.0);
                push(METRIC_L2_BYTES, hbm * 8.0);
                push(METRIC_HBM_BYTES, hbm);
            } else if k < stream_end {
                push(flop('f', "add").as_str(), rng.gen_range(1e3_f64..1e5).round());
                push(METRIC_L1_BYTES, hbm);
                push(METRIC_L2_BYTES, hbm);
                push(METRIC_HBM_BYTES, hbm);
            } else {
                for op in ["add", "mul", "fma"] {
                    push(flop('f', op).as_str(), rng.gen_range(1e5_f64..1e8).round());
                }
                push(flop('h', "fma").as_str(), rng.gen_range(1e4_f64..1e6).round());
                push(METRIC_L1_BYTES, hbm * 6.0);
                push(METRIC_L2_BYTES, hbm * 2.0);
                push(METRIC_HBM_BYTES, hbm);
            }
            invocation_index += 1;
        }
    }
    records
}

fn flop(prefix: char, op: &str) -> String {
    format!("sm__sass_thread_inst_executed_op_{prefix}{op}_pred_on.sum")
}

/// Generate and assemble a synthetic run in one step.
pub fn generate_synthetic_run(cfg: &SynthConfig) -> Result<ProfileRun> {
    let records = generate_synthetic_records(cfg);
    let mut run = build_run(format!("synthetic-{}", cfg.seed), &[records])?;
    run.machine_ref = None;
    Ok(run)
}

/// Build the records of a census fixture with exact per-phase invocation
/// counts of zero-FLOP and FLOP-performing kernels.
pub fn census_fixture(phase_counts: &[(&str, u64, u64)]) -> Vec<MetricRecord> {
    let mut records = Vec::new();
    let mut invocation_index = 0u64;
    for (phase, zero, non_zero) in phase_counts {
        let mut emit = |name: String, with_flops: bool, idx: &mut u64| {
            for metric in [
                (METRIC_CYCLES, 1000.0),
                (METRIC_CYCLES_PER_SECOND, 1e9),
                (METRIC_HBM_BYTES, 4096.0),
            ] {
                records.push(MetricRecord {
                    kernel_name: name.clone(),
                    invocation_index: *idx,
                    metric_name: metric.0.into(),
                    value: metric.1,
                    unit: None,
                    phase_tag: Some(phase.to_string()),
                });
            }
            if with_flops {
                records.push(MetricRecord {
                    kernel_name: name.clone(),
                    invocation_index: *idx,
                    metric_name: flop('f', "fma"),
                    value: 512.0,
                    unit: None,
                    phase_tag: Some(phase.to_string()),
                });
            }
            *idx += 1;
        };
        for i in 0..*zero {
            emit(format!("{phase}_zero_{i:04}"), false, &mut invocation_index);
        }
        for i in 0..*non_zero {
            emit(format!("{phase}_flop_{i:04}"), true, &mut invocation_index);
        }
    }
    records
}
