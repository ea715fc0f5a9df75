//! Census tables and text summaries.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::roofline::{AnalysisReport, BoundKind, PhaseCensus, ZeroAiCensus};

fn display_phase(phase: &str) -> String {
    let mut chars = phase.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Percentage display: one decimal, with an exact integer printed bare
/// ("100%" rather than "100.0%", matching how such tables are usually
/// typeset).
fn fmt_pct(pct: f64) -> String {
    if pct.fract() == 0.0 {
        format!("{}%", pct as i64)
    } else {
        format!("{pct:.1}%")
    }
}

fn pct_of(part: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        (part as f64 / total as f64 * 1000.0).round() / 10.0
    }
}

fn cell(count: u64, total: u64) -> String {
    format!("{} ({})", count, fmt_pct(pct_of(count, total)))
}

/// Render the zero-AI census as an aligned text table, one column per
/// phase plus a Total column.
pub fn render_census_table(census: &ZeroAiCensus) -> String {
    let mut columns: Vec<&PhaseCensus> = census.phases.iter().collect();
    columns.push(&census.total);

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend(
        columns
            .iter()
            .map(|c| display_phase(&c.phase)),
    );
    rows.push(header);
    let mut zero_row = vec!["zero-AI".to_string()];
    zero_row.extend(columns.iter().map(|c| cell(c.zero_ai, c.total)));
    rows.push(zero_row);
    let mut nz_row = vec!["non zero-AI".to_string()];
    nz_row.extend(columns.iter().map(|c| cell(c.non_zero_ai, c.total)));
    rows.push(nz_row);
    let mut total_row = vec!["Total".to_string()];
    total_row.extend(columns.iter().map(|c| cell(c.total, c.total)));
    rows.push(total_row);

    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for row in rows {
        for (i, field) in row.iter().enumerate() {
            let _ = write!(out, "{:<width$}", field, width = widths[i] + 2);
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    out
}

/// Census CSV: `phase,zero_ai,non_zero_ai,total,zero_ai_pct`, one row per
/// phase plus a `total` row. Percentages use one decimal.
pub fn render_census_csv(census: &ZeroAiCensus) -> String {
    let mut out = String::from("phase,zero_ai,non_zero_ai,total,zero_ai_pct\n");
    for p in census.phases.iter().chain(std::iter::once(&census.total)) {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.1}",
            p.phase, p.zero_ai, p.non_zero_ai, p.total, p.zero_ai_pct
        );
    }
    out
}

/// Parse a census CSV produced by [`render_census_csv`] back into a census.
pub fn parse_census_csv(text: &str) -> Result<ZeroAiCensus> {
    let mut phases = Vec::new();
    let mut total = None;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "phase,zero_ai,non_zero_ai,total,zero_ai_pct" {
                return Err(Error::Csv(format!("unexpected census header {line:?}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::CsvRow {
                row: i + 1,
                reason: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_u64 = |s: &str| {
            s.parse::<u64>().map_err(|_| Error::CsvRow {
                row: i + 1,
                reason: format!("{s:?} is not an integer"),
            })
        };
        let census = PhaseCensus {
            phase: fields[0].to_string(),
            zero_ai: parse_u64(fields[1])?,
            non_zero_ai: parse_u64(fields[2])?,
            total: parse_u64(fields[3])?,
            zero_ai_pct: fields[4].parse().map_err(|_| Error::CsvRow {
                row: i + 1,
                reason: format!("{:?} is not numeric", fields[4]),
            })?,
        };
        if census.phase == "total" {
            total = Some(census);
        } else {
            phases.push(census);
        }
    }
    let total = total.ok_or_else(|| Error::Csv("census CSV has no total row".into()))?;
    Ok(ZeroAiCensus { phases, total })
}

fn classification_label(kind: &BoundKind, ceiling: Option<&str>) -> String {
    match kind {
        BoundKind::ZeroAi => "zero-AI".to_string(),
        BoundKind::MemoryBound { level } => match ceiling {
            Some(c) => format!("memory-bound ({level}, vs {c})"),
            None => format!("memory-bound ({level})"),
        },
        BoundKind::ComputeBound => match ceiling {
            Some(c) => format!("compute-bound ({c})"),
            None => "compute-bound".to_string(),
        },
    }
}

/// Human-readable run summary: the top-k kernels by aggregated time with
/// classification, utilization, and per-level AI, plus a totals footer.
pub fn render_summary(report: &AnalysisReport, top_k: usize) -> String {
    // per-(kernel, phase) AI lookup from the chart points
    let mut ai_by_kernel: BTreeMap<(String, Option<String>), Vec<(String, f64)>> = BTreeMap::new();
    for p in &report.points {
        ai_by_kernel
            .entry((p.kernel_name.clone(), p.phase_tag.clone()))
            .or_default()
            .push((p.level.name().to_string(), p.ai));
    }

    let mut ranked: Vec<_> = report.classifications.iter().collect();
    ranked.sort_by(|a, b| {
        b.time_s
            .total_cmp(&a.time_s)
            .then_with(|| a.kernel_name.cmp(&b.kernel_name))
            .then_with(|| a.phase_tag.cmp(&b.phase_tag))
    });

    let mut out = String::new();
    let _ = writeln!(out, "Run:     {}", report.run_label);
    let _ = writeln!(out, "Machine: {}", report.machine_name);
    let _ = writeln!(out, "Top {} kernels by time:", top_k.min(ranked.len()));
    for c in ranked.iter().take(top_k) {
        let label = classification_label(&c.kind, c.reference_ceiling.as_deref());
        let ai = ai_by_kernel
            .get(&(c.kernel_name.clone(), c.phase_tag.clone()))
            .map(|levels| {
                levels
                    .iter()
                    .map(|(l, ai)| format!("{l}={ai:.3}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_else(|| "-".to_string());
        let phase = c.phase_tag.as_deref().unwrap_or("-");
        let _ = writeln!(
            out,
            "  {:<40} {:<10} {:>12.6e} s  {:<32} util={:.3}  AI[{ai}]",
            c.kernel_name, phase, c.time_s, label, c.utilization
        );
    }

    let total_time: f64 = report.classifications.iter().map(|c| c.time_s).sum();
    let zero = report
        .classifications
        .iter()
        .filter(|c| c.kind.is_zero_ai())
        .count();
    let _ = writeln!(out, "Totals:");
    let _ = writeln!(out, "  kernels: {}", report.classifications.len());
    let _ = writeln!(out, "  zero-AI kernels: {zero}");
    let _ = writeln!(
        out,
        "  zero-AI invocations: {} of {} ({})",
        report.census.total.zero_ai,
        report.census.total.total,
        fmt_pct(report.census.total.zero_ai_pct)
    );
    let _ = writeln!(out, "  total kernel time: {total_time:.6e} s");
    out
}
