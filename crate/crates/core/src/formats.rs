//! File formats: CSV data, JSON results and CSV traces.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::engine::{BoundsState, EngineConfig, Status, TraceRecord};
use crate::error::{Error, Result};

/// Reads numeric rows from CSV text. A first row that does not parse as
/// numbers is taken to be a header and skipped.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if r == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", r + 1))),
        }
    }
    if let Some(first) = rows.first() {
        let width = first.len();
        if let Some(bad) = rows.iter().position(|row| row.len() != width) {
            return Err(Error::Dimension(format!(
                "row {} has {} columns, expected {width}",
                bad + 1,
                rows[bad].len()
            )));
        }
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Value("CSV contains non-finite values".into()));
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_matrix(&fs::read_to_string(path)?)
}

/// Writes every float with 17 significant digits so values round-trip exactly.
#[derive(Debug, Default, Clone, Copy)]
pub struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as compact JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRecord {
    /// 1-based feature (or group) index.
    pub index: usize,
    pub lb: f64,
    pub ub: f64,
    pub midpoint: f64,
    pub half_range: f64,
}

impl FeatureRecord {
    pub fn new(index: usize, lb: f64, ub: f64) -> Self {
        Self {
            index,
            lb,
            ub,
            midpoint: 0.5 * (ub + lb),
            half_range: 0.5 * (ub - lb),
        }
    }
}

/// Settings echoed back with every result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub value_fn: String,
    pub target_output: usize,
    pub batch_size: usize,
    pub select: String,
    pub split: String,
    pub propagation: String,
    pub prune_tol: f64,
    pub delta: Option<f64>,
    pub hr_fraction: Option<f64>,
    pub timeout_seconds: Option<f64>,
    pub max_iterations: Option<u64>,
}

impl ConfigEcho {
    pub fn new(config: &EngineConfig, value_fn: &str, target_output: usize) -> Self {
        Self {
            value_fn: value_fn.to_string(),
            target_output,
            batch_size: config.batch_size,
            select: config.select.as_str().to_string(),
            split: config.split.as_str().to_string(),
            propagation: config.propagation.as_str().to_string(),
            prune_tol: config.prune_tol,
            delta: config.stop.delta,
            hr_fraction: config.stop.hr_fraction,
            timeout_seconds: config.stop.timeout.map(|t| t.as_secs_f64()),
            max_iterations: config.stop.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub status: String,
    pub features: Vec<FeatureRecord>,
    pub iterations: u64,
    pub branches_explored: u64,
    pub branches_pruned: u64,
    pub wall_seconds: f64,
    pub config: ConfigEcho,
}

impl RunResult {
    pub fn new(bounds: &BoundsState, status: Status, wall_seconds: f64, config: ConfigEcho) -> Self {
        Self {
            status: status.as_str().to_string(),
            features: bounds
                .lb_phi
                .iter()
                .zip(&bounds.ub_phi)
                .enumerate()
                .map(|(i, (&lb, &ub))| FeatureRecord::new(i + 1, lb, ub))
                .collect(),
            iterations: bounds.iteration,
            branches_explored: bounds.branches_explored,
            branches_pruned: bounds.branches_pruned,
            wall_seconds,
            config,
        }
    }
}

/// Trace CSV; per-feature `lb_i,ub_i` columns only when `with_features`.
pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord], with_features: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let g = trace.first().map_or(0, |t| t.lb_phi.len());
    let mut header: Vec<String> = [
        "iteration",
        "active_branches",
        "pruned_total",
        "max_gap",
        "wall_seconds",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if with_features {
        for i in 1..=g {
            header.push(format!("lb_{i}"));
            header.push(format!("ub_{i}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for t in trace {
        let mut row = vec![
            t.iteration.to_string(),
            t.active_branches.to_string(),
            t.pruned_total.to_string(),
            t.max_gap.to_string(),
            t.wall_seconds.to_string(),
        ];
        if with_features {
            for (lb, ub) in t.lb_phi.iter().zip(&t.ub_phi) {
                row.push(lb.to_string());
                row.push(ub.to_string());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_row_is_detected() {
        let rows = parse_matrix("a,b,c\n1,2,3\n4.5, -1 ,0\n").unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0, 3.0], vec![4.5, -1.0, 0.0]]);
        let rows = parse_matrix("1,2\n3,4\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert!(matches!(parse_matrix("1,2\nx,4\n"), Err(Error::Parse(_))));
        assert!(parse_matrix("1,2\n3\n").is_err());
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_json_string(&vec![0.1, 1.0, -2.5e-7]);
        assert_eq!(s, "[1.0000000000000001e-1,1.0000000000000000e0,-2.4999999999999999e-7]");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, 1.0, -2.5e-7]);
        assert_eq!(to_json_string(&f64::NAN), "null");
    }

    #[test]
    fn feature_record_summary() {
        let r = FeatureRecord::new(1, -1.0, 3.0);
        assert_eq!((r.midpoint, r.half_range), (1.0, 2.0));
    }
}
