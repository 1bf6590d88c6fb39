//! Result files. Per-time scalar series go to CSV with one row per
//! `(t, sensor)`; matrices, measures, certificates and reports go to JSON
//! wrapped in a versioned envelope.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{SCHEMA_MAJOR, SCHEMA_VERSION};
use crate::error::{GikfError, Result};
use crate::filter::{RecordRow, TrajectoryRecord};
use crate::measure::{default_projections, EmpiricalMeasure};

pub const RECORD_HEADER: &str = "t,sensor,norm_P,sq_err,particle_pos,matching_id";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = GikfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(GikfError::InvalidArgument(format!("unknown format {other:?}; use csv or json"))),
        }
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn record_to_csv(rows: &[RecordRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            r.sensor,
            fmt_f64(r.norm_p),
            fmt_f64(r.sq_err),
            r.particle_pos,
            r.matching_id
        );
    }
    out
}

pub fn record_from_csv(text: &str) -> Result<Vec<RecordRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(RECORD_HEADER) {
        return Err(GikfError::InvalidArgument(format!("record CSV must start with {RECORD_HEADER:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| GikfError::InvalidArgument(format!("record CSV line {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad("column count"));
            }
            Ok(RecordRow {
                t: f[0].parse().map_err(|_| bad("t"))?,
                sensor: f[1].parse().map_err(|_| bad("sensor"))?,
                norm_p: f[2].parse().map_err(|_| bad("norm_P"))?,
                sq_err: f[3].parse().map_err(|_| bad("sq_err"))?,
                particle_pos: f[4].parse().map_err(|_| bad("particle_pos"))?,
                matching_id: f[5].to_string(),
            })
        })
        .collect()
}

/// Default projection panel of every sample, one row per sample.
pub fn measure_to_csv(measure: &EmpiricalMeasure) -> String {
    let panel = default_projections(measure.dim());
    let mut out = String::from("sample");
    for p in &panel {
        out.push(',');
        out.push_str(&p.name().replace(',', ";"));
    }
    out.push('\n');
    for (i, s) in measure.samples().iter().enumerate() {
        let _ = write!(out, "{i}");
        for p in &panel {
            let _ = write!(out, ",{}", fmt_f64(p.apply(s)));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: String,
    pub kind: String,
    pub data: T,
}

pub fn to_json<T: Serialize>(kind: &str, data: &T) -> String {
    let env = Envelope {
        schema_version: SCHEMA_VERSION.to_string(),
        kind: kind.to_string(),
        data,
    };
    serde_json::to_string_pretty(&env).expect("result serializes") + "\n"
}

pub fn from_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let env: Envelope<serde_json::Value> = serde_json::from_str(text)?;
    let major = env.schema_version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major != Some(SCHEMA_MAJOR) {
        return Err(GikfError::SchemaVersion {
            found: env.schema_version,
            supported: SCHEMA_MAJOR,
        });
    }
    if env.kind != kind {
        return Err(GikfError::InvalidArgument(format!("expected a {kind:?} file, found {:?}", env.kind)));
    }
    Ok(serde_json::from_value(env.data)?)
}

pub fn write_json<T: Serialize>(kind: &str, data: &T, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(kind, data))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(kind: &str, path: impl AsRef<Path>) -> Result<T> {
    from_json(kind, &std::fs::read_to_string(path)?)
}

pub fn export_record(record: &TrajectoryRecord, path: impl AsRef<Path>, format: Format) -> Result<()> {
    match format {
        Format::Csv => std::fs::write(path, record_to_csv(&record.rows))?,
        Format::Json => write_json("trajectory", record, path)?,
    }
    Ok(())
}

pub fn export_measure(measure: &EmpiricalMeasure, path: impl AsRef<Path>, format: Format) -> Result<()> {
    match format {
        Format::Csv => std::fs::write(path, measure_to_csv(measure))?,
        Format::Json => write_json("measure", measure, path)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::PsdMatrix;
    use crate::measure::{distribution_distance, Projection};

    fn row(t: usize, norm_p: f64) -> RecordRow {
        RecordRow {
            t,
            sensor: 0,
            norm_p,
            sq_err: 1.0 / 3.0,
            particle_pos: 2,
            matching_id: "1-0-2".into(),
        }
    }

    #[test]
    fn empty_record_is_header_only() {
        assert_eq!(record_to_csv(&[]), format!("{RECORD_HEADER}\n"));
    }

    #[test]
    fn csv_round_trips_exactly() {
        let rows = vec![row(0, std::f64::consts::PI), row(1, 1e-300), row(2, 0.1 + 0.2)];
        assert_eq!(record_from_csv(&record_to_csv(&rows)).unwrap(), rows);
        assert!(record_from_csv("a,b\n").is_err());
    }

    #[test]
    fn measure_round_trip_preserves_ks() {
        let a = EmpiricalMeasure::new((1..40).map(|k| PsdMatrix::from_diagonal(&[k as f64 / 7.0, 0.3]).unwrap()).collect()).unwrap();
        let b = EmpiricalMeasure::new((1..30).map(|k| PsdMatrix::from_diagonal(&[k as f64 / 5.0, 0.1]).unwrap()).collect()).unwrap();
        let a2: EmpiricalMeasure = from_json("measure", &to_json("measure", &a)).unwrap();
        assert_eq!(a2, a);
        for p in [Projection::SpectralNorm, Projection::Trace] {
            assert_eq!(distribution_distance(&a, &b, &p).unwrap(), distribution_distance(&a2, &b, &p).unwrap());
        }
    }

    #[test]
    fn envelope_checks_version_and_kind() {
        let text = to_json("measure", &1u32);
        assert!(from_json::<u32>("trajectory", &text).is_err());
        let bumped = text.replace("\"1.0\"", "\"3.0\"");
        assert!(matches!(from_json::<u32>("measure", &bumped), Err(GikfError::SchemaVersion { .. })));
    }

    #[test]
    fn snapshot_matrix_is_symmetric_on_reread() {
        let m = PsdMatrix::from_rows(&[vec![2.0, 1.0 / 3.0], vec![1.0 / 3.0, 1.0]]).unwrap();
        let back: PsdMatrix = from_json("matrix", &to_json("matrix", &m)).unwrap();
        let x = back.as_matrix();
        assert_eq!(x[(0, 1)], x[(1, 0)]);
        assert_eq!(back, m);
    }
}
