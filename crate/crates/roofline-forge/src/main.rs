//! Command-line front end: characterize -> ingest -> analyze -> plot/compare.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roofline_forge::adapter::{parse_with_dialect, Dialect};
use roofline_forge::error::{Error, Result};
use roofline_forge::ingest::{build_run, write_metrics_csv, MetricRecord, ProfileRun};
use roofline_forge::machine::{load_machine_file, ridge_point, theoretical_tensor_peak};
use roofline_forge::report::{
    render_census_csv, render_census_table, render_chart, render_summary, ChartStyle,
};
use roofline_forge::roofline::{
    analyze_run, compare_runs, comparison_to_json, report_to_json, zero_ai_census,
};
use roofline_forge::synth::{generate_synthetic_records, SynthConfig};

#[derive(Parser)]
#[command(
    name = "roofline-forge",
    version,
    about = "Hierarchical Roofline analysis from GPU profiler counter exports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct IngestOpts {
    /// Machine file (ceilings and optional hardware spec)
    #[arg(long)]
    machine: PathBuf,
    /// Metric-name dialect of the input files
    #[arg(long, default_value = "normalized")]
    dialect: String,
    /// Ordered kernel-name pattern -> phase rules (JSON file)
    #[arg(long)]
    phase_map: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print theoretical peaks and configured ceilings with ridge points
    Peaks {
        /// Machine file
        machine: PathBuf,
    },
    /// Analyze one run (multiple single-metric passes merge into one run)
    Analyze {
        /// Metrics CSV files, one per profiling pass
        metrics: Vec<PathBuf>,
        #[command(flatten)]
        ingest: IngestOpts,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Kernels listed in the summary
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Chart style overrides (JSON file)
        #[arg(long)]
        style: Option<PathBuf>,
        /// Run label used in reports
        #[arg(long)]
        label: Option<String>,
    },
    /// Compare two runs analyzed against the same machine
    Compare {
        /// Metrics CSV of run A
        run_a: PathBuf,
        /// Metrics CSV of run B
        run_b: PathBuf,
        #[command(flatten)]
        ingest: IngestOpts,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Print the zero-AI invocation census of a run
    Census {
        /// Metrics CSV files, one per profiling pass
        metrics: Vec<PathBuf>,
        /// Metric-name dialect of the input files
        #[arg(long, default_value = "normalized")]
        dialect: String,
        /// Ordered kernel-name pattern -> phase rules (JSON file)
        #[arg(long)]
        phase_map: Option<PathBuf>,
        /// Also write census.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic metrics CSV
    Synth {
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        kernels: usize,
        /// Maximum invocations per kernel
        #[arg(long, default_value_t = 4)]
        span: usize,
        #[arg(long, default_value_t = 0.25)]
        zero_fraction: f64,
        #[arg(long, default_value_t = 0.25)]
        tensor_fraction: f64,
        #[arg(long, default_value_t = 0.25)]
        streaming_fraction: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ROOFLINE_FORGE_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Peaks { machine } => cmd_peaks(&machine),
        Command::Analyze {
            metrics,
            ingest,
            out,
            top,
            style,
            label,
        } => cmd_analyze(&metrics, &ingest, &out, top, style.as_deref(), label),
        Command::Compare {
            run_a,
            run_b,
            ingest,
            out,
            top,
        } => cmd_compare(&run_a, &run_b, &ingest, &out, top),
        Command::Census {
            metrics,
            dialect,
            phase_map,
            out,
        } => cmd_census(&metrics, &dialect, phase_map.as_deref(), out.as_deref()),
        Command::Synth {
            out,
            seed,
            kernels,
            span,
            zero_fraction,
            tensor_fraction,
            streaming_fraction,
        } => cmd_synth(
            &out,
            SynthConfig {
                seed,
                kernel_count: kernels,
                invocation_span: span,
                zero_flop_fraction: zero_fraction,
                tensor_fraction,
                streaming_fraction,
                ..Default::default()
            },
        ),
    }
}

fn cmd_peaks(machine_path: &Path) -> Result<()> {
    let machine = load_machine_file(machine_path)?;
    println!("Machine: {}", machine.name);
    if let Some(spec) = &machine.spec {
        let peak = theoretical_tensor_peak(spec)?;
        println!(
            "Theoretical Tensor Core peak: {peak:.2} GFLOP/s \
             ({} SMs x {} tensor units x {} GHz x {}^3 x 2)",
            spec.sm_count, spec.tensor_units_per_sm, spec.clock_ghz, spec.tensor_tile_dim
        );
    }
    println!("Compute ceilings:");
    for c in &machine.compute_ceilings {
        println!("  {}: {:.2} GFLOP/s", c.label, c.gflops);
        for b in machine.bandwidth_ceilings_ordered() {
            println!(
                "    ridge vs {} ({} GB/s): {:.4} FLOPs/byte",
                b.level,
                b.gbytes_per_s,
                ridge_point(c, b)
            );
        }
    }
    println!("Bandwidth ceilings:");
    for b in machine.bandwidth_ceilings_ordered() {
        println!("  {}: {} GB/s", b.level, b.gbytes_per_s);
    }
    Ok(())
}

/// Ordered kernel-name pattern -> phase mapping, applied to records that
/// carry no phase tag. First match wins.
#[derive(serde::Deserialize)]
struct PhaseRule {
    pattern: String,
    phase: String,
}

fn load_phase_rules(path: &Path) -> Result<Vec<(regex::Regex, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let rules: Vec<PhaseRule> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    rules
        .into_iter()
        .map(|r| {
            let re = regex::Regex::new(&r.pattern)
                .map_err(|e| Error::Config(format!("bad phase pattern {:?}: {e}", r.pattern)))?;
            Ok((re, r.phase))
        })
        .collect()
}

fn apply_phase_rules(records: &mut [MetricRecord], rules: &[(regex::Regex, String)]) {
    for r in records {
        if r.phase_tag.is_some() {
            continue;
        }
        if let Some((_, phase)) = rules.iter().find(|(re, _)| re.is_match(&r.kernel_name)) {
            r.phase_tag = Some(phase.clone());
        }
    }
}

fn load_passes(
    metrics: &[PathBuf],
    dialect: &str,
    phase_map: Option<&Path>,
) -> Result<Vec<Vec<MetricRecord>>> {
    if metrics.is_empty() {
        return Err(Error::Config("no metrics files given".into()));
    }
    let dialect: Dialect = dialect.parse()?;
    let rules = phase_map.map(load_phase_rules).transpose()?.unwrap_or_default();
    let mut passes = Vec::with_capacity(metrics.len());
    for path in metrics {
        let file = fs::File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut records = parse_with_dialect(file, dialect).map_err(|e| match e {
            Error::Csv(msg) => Error::Csv(format!("{}: {msg}", path.display())),
            Error::CsvRow { row, reason } => Error::CsvRow {
                row,
                reason: format!("{}: {reason}", path.display()),
            },
            other => other,
        })?;
        apply_phase_rules(&mut records, &rules);
        passes.push(records);
    }
    Ok(passes)
}

fn load_run(
    label: &str,
    metrics: &[PathBuf],
    dialect: &str,
    phase_map: Option<&Path>,
) -> Result<ProfileRun> {
    let passes = load_passes(metrics, dialect, phase_map)?;
    build_run(label, &passes)
}

fn load_style(path: Option<&Path>) -> Result<ChartStyle> {
    let Some(path) = path else {
        return Ok(ChartStyle::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn cmd_analyze(
    metrics: &[PathBuf],
    ingest: &IngestOpts,
    out: &Path,
    top: usize,
    style_path: Option<&Path>,
    label: Option<String>,
) -> Result<()> {
    let machine = load_machine_file(&ingest.machine)?;
    let style = load_style(style_path)?;
    let label = label.unwrap_or_else(|| {
        metrics
            .first()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    let mut run = load_run(&label, metrics, &ingest.dialect, ingest.phase_map.as_deref())?;
    run.machine_ref = Some(machine.name.clone());

    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    let report = analyze_run(&run, &machine)?;
    let chart = render_chart(&report.points, &machine, &style)?;
    let mut summary = render_summary(&report, top);
    summary.push_str("\nZero-AI invocation census:\n");
    summary.push_str(&render_census_table(&report.census));

    write_out(out, "analysis.json", &report_to_json(&report))?;
    write_out(out, "summary.txt", &summary)?;
    write_out(out, "census.csv", &render_census_csv(&report.census))?;
    write_out(out, "chart.svg", &chart.svg)?;
    println!(
        "wrote analysis.json, summary.txt, census.csv, chart.svg to {}",
        out.display()
    );
    Ok(())
}

fn cmd_compare(
    run_a: &Path,
    run_b: &Path,
    ingest: &IngestOpts,
    out: &Path,
    top: usize,
) -> Result<()> {
    let machine = load_machine_file(&ingest.machine)?;
    let label = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    };
    let a = load_run(
        &label(run_a),
        std::slice::from_ref(&run_a.to_path_buf()),
        &ingest.dialect,
        ingest.phase_map.as_deref(),
    )?;
    let b = load_run(
        &label(run_b),
        std::slice::from_ref(&run_b.to_path_buf()),
        &ingest.dialect,
        ingest.phase_map.as_deref(),
    )?;
    let report = compare_runs(&a, &b, &machine, top)?;

    let mut text = String::new();
    text.push_str(&format!("Comparing {} vs {}\n", report.label_a, report.label_b));
    text.push_str(&format!(
        "zero-AI invocations: {} vs {} (delta {}{})\n",
        report.zero_ai_total_a,
        report.zero_ai_total_b,
        report.zero_ai_delta,
        report
            .zero_ai_ratio
            .map(|r| format!(", ratio {r:.2}"))
            .unwrap_or_default()
    ));
    text.push_str(&format!(
        "total kernel time: {:.6e} s vs {:.6e} s (delta {:.6e} s)\n",
        report.total_time_a_s, report.total_time_b_s, report.total_time_delta_s
    ));
    text.push_str("\nper-phase zero-AI invocations:\n");
    for p in &report.phase_zero_ai_deltas {
        text.push_str(&format!(
            "  {}: {} vs {} (delta {})\n",
            p.phase, p.zero_ai_a, p.zero_ai_b, p.delta
        ));
    }
    text.push_str(&format!(
        "\nmatched kernels: {}, only in {}: {}, only in {}: {}\n",
        report.matched.len(),
        report.label_a,
        report.unmatched_a.len(),
        report.label_b,
        report.unmatched_b.len()
    ));
    text.push_str(&format!("\ncensus of {}:\n", report.label_a));
    text.push_str(&render_census_table(&zero_ai_census(&a)));
    text.push_str(&format!("\ncensus of {}:\n", report.label_b));
    text.push_str(&render_census_table(&zero_ai_census(&b)));

    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    write_out(out, "comparison.json", &comparison_to_json(&report))?;
    write_out(out, "comparison.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_census(
    metrics: &[PathBuf],
    dialect: &str,
    phase_map: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let run = load_run("census", metrics, dialect, phase_map)?;
    let census = zero_ai_census(&run);
    print!("{}", render_census_table(&census));
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        write_out(dir, "census.csv", &render_census_csv(&census))?;
    }
    Ok(())
}

fn cmd_synth(out: &Path, cfg: SynthConfig) -> Result<()> {
    let records = generate_synthetic_records(&cfg);
    let file = fs::File::create(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    write_metrics_csv(&records, file)?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}
