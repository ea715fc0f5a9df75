//! End-to-end CLI checks: artifacts, determinism, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roofline_forge::ingest::{
    write_metrics_csv, MetricRecord, METRIC_CYCLES, METRIC_CYCLES_PER_SECOND,
};
use roofline_forge::synth::census_fixture;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roofline-forge"))
}

fn v100_path() -> PathBuf {
    PathBuf::from(format!("{}/data/v100.json", env!("CARGO_MANIFEST_DIR")))
}

fn write_csv(path: &Path, records: &[MetricRecord]) {
    let file = fs::File::create(path).unwrap();
    write_metrics_csv(records, file).unwrap();
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn analyze_writes_four_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let synth = bin()
        .arg("synth")
        .arg("--out")
        .arg(&csv)
        .arg("--seed")
        .arg("5")
        .arg("--kernels")
        .arg("12")
        .output()
        .unwrap();
    assert!(synth.status.success(), "{}", stderr_of(&synth));

    let run = |out: &Path| {
        let r = bin()
            .arg("analyze")
            .arg(&csv)
            .arg("--machine")
            .arg(v100_path())
            .arg("--out")
            .arg(out)
            .arg("--label")
            .arg("demo")
            .output()
            .unwrap();
        assert!(r.status.success(), "{}", stderr_of(&r));
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);
    for name in ["analysis.json", "summary.txt", "census.csv", "chart.svg"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, b, "{name} differs between identical invocations");
    }
    let json = fs::read_to_string(out_a.join("analysis.json")).unwrap();
    assert!(json.contains("\"run_label\": \"demo\""));
    assert!(json.contains("\"machine_name\": \"V100-SXM2-16GB\""));
}

#[test]
fn missing_time_metrics_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("no_time.csv");
    write_csv(
        &csv,
        &[MetricRecord {
            kernel_name: "k".into(),
            invocation_index: 0,
            metric_name: "dram__bytes.sum".into(),
            value: 4096.0,
            unit: None,
            phase_tag: None,
        }],
    );
    let out = bin()
        .arg("analyze")
        .arg(&csv)
        .arg("--machine")
        .arg(v100_path())
        .arg("--out")
        .arg(dir.path().join("report"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("sm__cycles_elapsed.avg"));
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_machine = dir.path().join("machine.json");
    fs::write(&bad_machine, "{\"name\": \"x\", \"unknown_key\": 1}").unwrap();
    let csv = dir.path().join("run.csv");
    write_csv(
        &csv,
        &[MetricRecord {
            kernel_name: "k".into(),
            invocation_index: 0,
            metric_name: METRIC_CYCLES.into(),
            value: 100.0,
            unit: None,
            phase_tag: None,
        }],
    );
    let out = bin()
        .arg("analyze")
        .arg(&csv)
        .arg("--machine")
        .arg(&bad_machine)
        .arg("--out")
        .arg(dir.path().join("report"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));

    let garbled = dir.path().join("garbled.csv");
    fs::write(&garbled, "not,a,metrics,header\n1,2,3,4\n").unwrap();
    let out = bin()
        .arg("census")
        .arg(&garbled)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn compare_prints_zero_ai_totals_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("run_tf.csv");
    let b = dir.path().join("run_pt.csv");
    write_csv(
        &a,
        &census_fixture(&[("forward", 304, 252), ("backward", 1833, 2740)]),
    );
    write_csv(
        &b,
        &census_fixture(&[
            ("forward", 437, 360),
            ("backward", 609, 966),
            ("optimizer", 0, 2709),
        ]),
    );
    let out = bin()
        .arg("compare")
        .arg(&a)
        .arg(&b)
        .arg("--machine")
        .arg(v100_path())
        .arg("--out")
        .arg(dir.path().join("cmp"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("zero-AI invocations: 2137 vs 1046 (delta 1091, ratio 2.04)"),
        "output:\n{text}"
    );
    assert!(dir.path().join("cmp/comparison.json").exists());
    assert!(dir.path().join("cmp/comparison.txt").exists());
}

#[test]
fn census_applies_phase_map_rules_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let mk = |name: &str, idx: u64| -> Vec<MetricRecord> {
        [(METRIC_CYCLES, 100.0), (METRIC_CYCLES_PER_SECOND, 1e9)]
            .into_iter()
            .map(|(metric, value)| MetricRecord {
                kernel_name: name.into(),
                invocation_index: idx,
                metric_name: metric.into(),
                value,
                unit: None,
                phase_tag: None,
            })
            .collect()
    };
    let mut records = mk("grad_update", 0);
    records.extend(mk("conv_forward", 1));
    write_csv(&csv, &records);

    let rules = dir.path().join("phases.json");
    fs::write(
        &rules,
        r#"[
  {"pattern": "^grad_", "phase": "backward"},
  {"pattern": ".*", "phase": "forward"}
]"#,
    )
    .unwrap();
    let out = bin()
        .arg("census")
        .arg(&csv)
        .arg("--phase-map")
        .arg(&rules)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("Forward"), "output:\n{text}");
    assert!(text.contains("Backward"), "output:\n{text}");
    assert!(!text.contains("(untagged)"), "output:\n{text}");
}

#[test]
fn synth_output_round_trips_through_census() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("synth.csv");
    let synth = bin()
        .arg("synth")
        .arg("--out")
        .arg(&csv)
        .arg("--kernels")
        .arg("8")
        .arg("--zero-fraction")
        .arg("0.5")
        .arg("--tensor-fraction")
        .arg("0.0")
        .arg("--streaming-fraction")
        .arg("0.0")
        .output()
        .unwrap();
    assert!(synth.status.success(), "{}", stderr_of(&synth));
    let header = fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("kernel_name,invocation_index,metric_name,value,unit,phase_tag"));

    let out = bin().arg("census").arg(&csv).output().unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("Total"));
}
