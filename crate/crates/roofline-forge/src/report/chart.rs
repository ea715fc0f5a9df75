//! SVG Roofline chart rendering.
//!
//! Log-log axes; bandwidth ceilings are slope-1 lines in log space drawn
//! up to their ridge with the highest compute ceiling; compute ceilings
//! are horizontal lines from their ridge with the widest bandwidth
//! ceiling. Kernels appear as open circles, one per memory level, with
//! circle area proportional to run time and clamped to a radius range so
//! every kernel stays visible. Output is deterministic: fixed float
//! formatting and fixed element order (ceilings, points, legend).

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::machine::{ridge_point, MachineModel, MemoryLevel};
use crate::numfmt::sig6;
use crate::roofline::RooflinePoint;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartStyle {
    /// Stroke color per memory level name; unlisted levels fall back to grey.
    pub level_colors: BTreeMap<String, String>,
    pub min_radius_px: f64,
    pub max_radius_px: f64,
    /// log10 bounds for arithmetic intensity; auto-fit when absent.
    pub ai_log_range: Option<(f64, f64)>,
    /// log10 bounds for GFLOP/s; auto-fit when absent.
    pub gflops_log_range: Option<(f64, f64)>,
    pub width_px: f64,
    pub height_px: f64,
    pub title: Option<String>,
}

impl Default for ChartStyle {
    fn default() -> Self {
        let mut level_colors = BTreeMap::new();
        level_colors.insert("L1".to_string(), "blue".to_string());
        level_colors.insert("L2".to_string(), "red".to_string());
        level_colors.insert("HBM".to_string(), "green".to_string());
        ChartStyle {
            level_colors,
            min_radius_px: 3.0,
            max_radius_px: 22.0,
            ai_log_range: None,
            gflops_log_range: None,
            width_px: 960.0,
            height_px: 640.0,
            title: None,
        }
    }
}

impl ChartStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_radius_px > 0.0) || self.min_radius_px > self.max_radius_px {
            return Err(Error::Validation {
                field: "radius",
                reason: format!(
                    "need 0 < min_radius_px <= max_radius_px, got {} and {}",
                    self.min_radius_px, self.max_radius_px
                ),
            });
        }
        if !(self.width_px > 0.0 && self.height_px > 0.0) {
            return Err(Error::Validation {
                field: "dimensions",
                reason: "width and height must be positive".into(),
            });
        }
        for range in [self.ai_log_range, self.gflops_log_range].into_iter().flatten() {
            if !(range.1 > range.0) {
                return Err(Error::Validation {
                    field: "axis range",
                    reason: format!("degenerate log range {range:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn color_for(&self, level: &MemoryLevel) -> &str {
        self.level_colors
            .get(level.name())
            .map(String::as_str)
            .unwrap_or("grey")
    }
}

/// A rendered chart plus element counts for structural checks.
#[derive(Debug, Clone)]
pub struct ChartDocument {
    pub svg: String,
    pub circle_count: usize,
    pub compute_ceiling_count: usize,
    pub bandwidth_ceiling_count: usize,
    pub legend_levels: Vec<String>,
}

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

struct Geometry {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    plot_x: f64,
    plot_y: f64,
    plot_w: f64,
    plot_h: f64,
}

impl Geometry {
    fn x_px(&self, log_ai: f64) -> f64 {
        self.plot_x + (log_ai - self.x0) / (self.x1 - self.x0) * self.plot_w
    }
    fn y_px(&self, log_gflops: f64) -> f64 {
        self.plot_y + self.plot_h - (log_gflops - self.y0) / (self.y1 - self.y0) * self.plot_h
    }
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Circle radius: area proportional to time, clamped both ends.
pub(crate) fn radius_for(time_s: f64, t_max: f64, style: &ChartStyle) -> f64 {
    if !(t_max > 0.0) || !(time_s > 0.0) {
        return style.min_radius_px;
    }
    (style.max_radius_px * (time_s / t_max).sqrt())
        .clamp(style.min_radius_px, style.max_radius_px)
}

fn auto_ranges(
    points: &[RooflinePoint],
    machine: &MachineModel,
    style: &ChartStyle,
) -> ((f64, f64), (f64, f64)) {
    let mut log_ais: Vec<f64> = Vec::new();
    let mut log_perfs: Vec<f64> = Vec::new();
    for p in points {
        if p.ai > 0.0 {
            log_ais.push(p.ai.log10());
        }
        if p.achieved_gflops > 0.0 {
            log_perfs.push(p.achieved_gflops.log10());
        }
    }
    for c in &machine.compute_ceilings {
        log_perfs.push(c.gflops.log10());
        for b in &machine.bandwidth_ceilings {
            log_ais.push(ridge_point(c, b).log10());
        }
    }
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // half-decade padding around the data
    let x = style
        .ai_log_range
        .unwrap_or_else(|| ((min(&log_ais) - 0.5).floor(), (max(&log_ais) + 0.5).ceil()));
    let mut y = style
        .gflops_log_range
        .unwrap_or_else(|| ((min(&log_perfs) - 0.5).floor(), (max(&log_perfs) + 0.5).ceil()));
    if !(y.1 > y.0) {
        y = (y.0 - 1.0, y.0 + 1.0);
    }
    (x, y)
}

fn format_rate(v: f64) -> String {
    let v = sig6(v);
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Render a hierarchical Roofline chart. An empty point list yields a
/// valid ceilings-only chart.
pub fn render_chart(
    points: &[RooflinePoint],
    machine: &MachineModel,
    style: &ChartStyle,
) -> Result<ChartDocument> {
    style.validate()?;
    machine.validate()?;

    let ((x0, x1), (y0, y1)) = auto_ranges(points, machine, style);
    let geom = Geometry {
        x0,
        x1,
        y0,
        y1,
        plot_x: MARGIN_LEFT,
        plot_y: MARGIN_TOP,
        plot_w: style.width_px - MARGIN_LEFT - MARGIN_RIGHT,
        plot_h: style.height_px - MARGIN_TOP - MARGIN_BOTTOM,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        px(style.width_px),
        px(style.height_px),
        px(style.width_px),
        px(style.height_px)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        px(style.width_px),
        px(style.height_px)
    );
    if let Some(title) = &style.title {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" font-size="16" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            px(geom.plot_x + geom.plot_w / 2.0),
            escape(title)
        );
    }

    draw_axes(&mut svg, &geom, style);

    // ceilings: bandwidth first (they sit under the horizontals), fixed order
    let max_compute = machine
        .compute_ceilings
        .iter()
        .max_by(|a, b| a.gflops.total_cmp(&b.gflops))
        .expect("validated non-empty");
    let max_bandwidth = machine
        .bandwidth_ceilings
        .iter()
        .max_by(|a, b| a.gbytes_per_s.total_cmp(&b.gbytes_per_s))
        .expect("validated non-empty");

    let mut bandwidth_ceiling_count = 0;
    for b in machine.bandwidth_ceilings_ordered() {
        let log_ridge = ridge_point(max_compute, b).log10().min(geom.x1);
        let start = geom.x0;
        if log_ridge <= start {
            continue;
        }
        let (xa, ya) = (geom.x_px(start), geom.y_px((b.gbytes_per_s).log10() + start));
        let (xb, yb) = (
            geom.x_px(log_ridge),
            geom.y_px((b.gbytes_per_s).log10() + log_ridge),
        );
        let _ = writeln!(
            svg,
            r#"<line class="bandwidth-ceiling" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="1.5"/>"#,
            px(xa),
            px(ya),
            px(xb),
            px(yb),
            style.color_for(&b.level)
        );
        // label partway along the line
        let lx = start + 0.25 * (log_ridge - start);
        let _ = writeln!(
            svg,
            r#"<text class="bandwidth-label" x="{}" y="{}" font-size="11" font-family="sans-serif">{} {} GB/s</text>"#,
            px(geom.x_px(lx) + 4.0),
            px(geom.y_px(b.gbytes_per_s.log10() + lx) - 6.0),
            escape(b.level.name()),
            format_rate(b.gbytes_per_s)
        );
        bandwidth_ceiling_count += 1;
    }

    let mut compute_ceilings = machine.compute_ceilings.clone();
    compute_ceilings.sort_by(|a, b| a.gflops.total_cmp(&b.gflops).then_with(|| a.label.cmp(&b.label)));
    let mut compute_ceiling_count = 0;
    for c in &compute_ceilings {
        let log_ridge = ridge_point(c, max_bandwidth).log10().max(geom.x0);
        if log_ridge >= geom.x1 {
            continue;
        }
        let y = geom.y_px(c.gflops.log10());
        let _ = writeln!(
            svg,
            r#"<line class="compute-ceiling" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1.5"/>"#,
            px(geom.x_px(log_ridge)),
            px(y),
            px(geom.x_px(geom.x1)),
            px(y)
        );
        let _ = writeln!(
            svg,
            r#"<text class="ceiling-label" x="{}" y="{}" font-size="11" font-family="sans-serif">{}: {} GFLOP/s</text>"#,
            px(geom.x_px(geom.x1) + 6.0),
            px(y + 4.0),
            escape(&c.label),
            format_rate(c.gflops)
        );
        compute_ceiling_count += 1;
    }

    // points, sorted by kernel then level for stable output
    let mut sorted: Vec<&RooflinePoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.kernel_name
            .cmp(&b.kernel_name)
            .then_with(|| a.phase_tag.cmp(&b.phase_tag))
            .then_with(|| a.level.cmp(&b.level))
    });
    let t_max = sorted.iter().map(|p| p.time_s).fold(0.0, f64::max);
    let mut circle_count = 0;
    for p in &sorted {
        if !(p.ai > 0.0) || !(p.achieved_gflops > 0.0) {
            continue;
        }
        let cx = geom.x_px(p.ai.log10());
        let cy = geom.y_px(p.achieved_gflops.log10());
        let r = radius_for(p.time_s, t_max, style);
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="{}" fill="none" stroke="{}" stroke-width="1.5"><title>{} [{}]</title></circle>"#,
            px(cx),
            px(cy),
            px(r),
            style.color_for(&p.level),
            escape(&p.kernel_name),
            p.level.name()
        );
        circle_count += 1;
    }

    // legend: one entry per level present in the data (or per bandwidth
    // ceiling for a ceilings-only chart)
    let mut legend_levels: Vec<MemoryLevel> = if sorted.is_empty() {
        machine
            .bandwidth_ceilings_ordered()
            .iter()
            .map(|b| b.level.clone())
            .collect()
    } else {
        let mut seen: Vec<MemoryLevel> = Vec::new();
        for p in &sorted {
            if !seen.contains(&p.level) {
                seen.push(p.level.clone());
            }
        }
        seen
    };
    legend_levels.sort();
    for (i, level) in legend_levels.iter().enumerate() {
        let lx = geom.plot_x + 12.0;
        let ly = geom.plot_y + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<circle class="legend-marker" cx="{}" cy="{}" r="5" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            px(lx),
            px(ly),
            style.color_for(level)
        );
        let _ = writeln!(
            svg,
            r#"<text class="legend-label" x="{}" y="{}" font-size="12" font-family="sans-serif">{}</text>"#,
            px(lx + 10.0),
            px(ly + 4.0),
            escape(level.name())
        );
    }
    svg.push_str("</svg>\n");

    Ok(ChartDocument {
        svg,
        circle_count,
        compute_ceiling_count,
        bandwidth_ceiling_count,
        legend_levels: legend_levels.iter().map(|l| l.name().to_string()).collect(),
    })
}

fn draw_axes(svg: &mut String, geom: &Geometry, _style: &ChartStyle) {
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        px(geom.plot_x),
        px(geom.plot_y),
        px(geom.plot_w),
        px(geom.plot_h)
    );
    // decade ticks
    let mut k = geom.x0.ceil() as i64;
    while (k as f64) <= geom.x1 {
        let x = geom.x_px(k as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="lightgrey" stroke-width="0.5"/>"#,
            px(x),
            px(geom.plot_y),
            px(x),
            px(geom.plot_y + geom.plot_h)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" font-family="sans-serif">1e{}</text>"#,
            px(x),
            px(geom.plot_y + geom.plot_h + 16.0),
            k
        );
        k += 1;
    }
    let mut k = geom.y0.ceil() as i64;
    while (k as f64) <= geom.y1 {
        let y = geom.y_px(k as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="lightgrey" stroke-width="0.5"/>"#,
            px(geom.plot_x),
            px(y),
            px(geom.plot_x + geom.plot_w),
            px(y)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end" font-family="sans-serif">1e{}</text>"#,
            px(geom.plot_x - 6.0),
            px(y + 4.0),
            k
        );
        k += 1;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle" font-family="sans-serif">Arithmetic Intensity (FLOPs/byte)</text>"#,
        px(geom.plot_x + geom.plot_w / 2.0),
        px(geom.plot_y + geom.plot_h + 40.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 {} {})">Performance (GFLOP/s)</text>"#,
        px(geom.plot_x - 50.0),
        px(geom.plot_y + geom.plot_h / 2.0),
        px(geom.plot_x - 50.0),
        px(geom.plot_y + geom.plot_h / 2.0)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
