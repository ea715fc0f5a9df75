//! Output rendering: Roofline SVG charts, census tables, and text
//! summaries.

mod chart;
mod tables;

pub use chart::{render_chart, ChartDocument, ChartStyle};
pub use tables::{parse_census_csv, render_census_csv, render_census_table, render_summary};
