//! Adapters from raw profiler CSV exports to the normalized schema.

use std::io::Read;

use crate::error::{Error, Result};
use crate::ingest::{parse_metrics_csv, MetricRecord};

/// Known input dialects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    /// The normalized schema this toolkit defines.
    Normalized,
    /// A raw per-metric export with `ID`, `Kernel Name`, `Metric Name`,
    /// `Metric Unit`, `Metric Value` columns. Values may carry thousands
    /// separators.
    RawExport,
}

impl std::str::FromStr for Dialect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Dialect::Normalized),
            "raw" | "raw-export" => Ok(Dialect::RawExport),
            other => Err(Error::Config(format!(
                "unknown metrics dialect {other:?} (expected normalized or raw)"
            ))),
        }
    }
}

/// Parse a metrics file in the given dialect into normalized records.
pub fn parse_with_dialect(reader: impl Read, dialect: Dialect) -> Result<Vec<MetricRecord>> {
    match dialect {
        Dialect::Normalized => parse_metrics_csv(reader),
        Dialect::RawExport => parse_raw_export(reader),
    }
}

fn parse_raw_export(reader: impl Read) -> Result<Vec<MetricRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("cannot read header: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Csv(format!("raw export is missing column {name:?}")))
    };
    let c_id = col("ID")?;
    let c_kernel = col("Kernel Name")?;
    let c_metric = col("Metric Name")?;
    let c_unit = col("Metric Unit")?;
    let c_value = col("Metric Value")?;

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| Error::CsvRow {
            row: row_no,
            reason: e.to_string(),
        })?;
        let field = |idx: usize| row.get(idx).unwrap_or("").trim();
        let invocation_index: u64 = field(c_id).parse().map_err(|_| Error::CsvRow {
            row: row_no,
            reason: format!("ID {:?} is not an integer", field(c_id)),
        })?;
        // thousands separators appear in exported values
        let raw_value = field(c_value).replace(',', "");
        let value: f64 = raw_value.parse().map_err(|_| Error::CsvRow {
            row: row_no,
            reason: format!("Metric Value {:?} is not numeric", field(c_value)),
        })?;
        let unit = field(c_unit);
        records.push(MetricRecord {
            kernel_name: field(c_kernel).to_string(),
            invocation_index,
            metric_name: field(c_metric).to_string(),
            value,
            unit: (!unit.is_empty()).then(|| unit.to_string()),
            phase_tag: None,
        });
    }
    if records.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    Ok(records)
}
