use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::CurvePoint;
use super::trace::SessionTrace;
use crate::error::{Error, Result};
use crate::sphere::SpherePoint;

/// Tolerance on `|v| = 1` for ingested coordinates; within it the point is
/// renormalised, beyond it the row is rejected.
pub const INGEST_NORM_TOLERANCE: f64 = 1e-6;

const BASE_COLUMNS: [&str; 6] = ["user_id", "video_id", "gop_index", "actual_x", "actual_y", "actual_z"];
const PRED_COLUMNS: [&str; 3] = ["pred_x", "pred_y", "pred_z"];

/// One aggregate line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub q: f64,
    pub policy: String,
    pub pr_leak: f64,
    pub mean_error_rad: f64,
    pub mean_abs_noise_rad: f64,
    pub qoe: f64,
    pub pspr: f64,
}

/// Per-trace detail behind a [`ResultRow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResultRow {
    pub q: f64,
    pub policy: String,
    pub user_id: u32,
    pub video_id: u32,
    pub pr_leak: f64,
    pub max_leak: f64,
    pub mean_error_rad: f64,
    pub mean_effective_error_rad: f64,
    pub mean_abs_noise_rad: f64,
    pub qoe: f64,
    pub fov_coverage: f64,
}

fn schema(row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::Schema {
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

fn csv_error(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e.to_string()),
        other => Error::Io(format!("{other:?}")),
    }
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<T> {
    let raw = record.get(idx).ok_or_else(|| schema(row, column, "missing field"))?;
    raw.trim()
        .parse()
        .map_err(|_| schema(row, column, format!("cannot parse `{raw}`")))
}

fn parse_point(record: &csv::StringRecord, first: usize, row: usize, columns: [&str; 3]) -> Result<SpherePoint> {
    let mut xyz = [0.0; 3];
    for k in 0..3 {
        let v: f64 = parse_field(record, first + k, row, columns[k])?;
        if !v.is_finite() {
            return Err(schema(row, columns[k], "not a finite number"));
        }
        xyz[k] = v;
    }
    let norm = (xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2]).sqrt();
    if (norm - 1.0).abs() > INGEST_NORM_TOLERANCE {
        return Err(schema(row, columns[0], format!("vector norm {norm} is not 1")));
    }
    SpherePoint::new(xyz[0], xyz[1], xyz[2]).map_err(|e| schema(row, columns[0], e.to_string()))
}

/// Reads traces in the `user_id,video_id,gop_index,actual_x,actual_y,
/// actual_z[,pred_x,pred_y,pred_z]` format. Traces come back ordered by
/// `(user_id, video_id)`; within a trace `gop_index` must run 0, 1, 2, ...
/// in file order.
pub fn read_traces<R: Read>(reader: R) -> Result<Vec<SessionTrace>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let with_pred = match names.len() {
        6 => false,
        9 => true,
        _ => return Err(schema(0, "header", format!("expected 6 or 9 columns, found {}", names.len()))),
    };
    for (i, want) in BASE_COLUMNS.iter().chain(PRED_COLUMNS.iter()).take(names.len()).enumerate() {
        if names[i] != *want {
            return Err(schema(0, want, format!("header has `{}` in its place", names[i])));
        }
    }

    type Gops = Vec<(SpherePoint, Option<SpherePoint>)>;
    let mut traces: BTreeMap<(u32, u32), Gops> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| schema(row, "record", e.to_string()))?;
        if record.len() != names.len() {
            return Err(schema(row, "record", format!("{} fields, expected {}", record.len(), names.len())));
        }
        let user: u32 = parse_field(&record, 0, row, "user_id")?;
        let video: u32 = parse_field(&record, 1, row, "video_id")?;
        let gop: usize = parse_field(&record, 2, row, "gop_index")?;
        let actual = parse_point(&record, 3, row, ["actual_x", "actual_y", "actual_z"])?;
        let pred = if with_pred {
            Some(parse_point(&record, 6, row, PRED_COLUMNS)?)
        } else {
            None
        };
        let gops = traces.entry((user, video)).or_default();
        if gop != gops.len() {
            return Err(schema(row, "gop_index", format!("expected {}, found {gop}", gops.len())));
        }
        gops.push((actual, pred));
    }

    traces
        .into_iter()
        .map(|((user, video), gops)| {
            let (actual, pred): (Vec<_>, Vec<_>) = gops.into_iter().unzip();
            let pred = if with_pred {
                Some(pred.into_iter().map(|p| p.expect("prediction parsed")).collect())
            } else {
                None
            };
            SessionTrace::new(user, video, actual, pred)
        })
        .collect()
}

pub fn load_trace(path: &Path) -> Result<Vec<SessionTrace>> {
    let file = File::open(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    read_traces(file).map_err(|e| e.context(path.display().to_string()))
}

/// Writes traces in the format read by [`read_traces`]. Predictions are
/// written only if every trace has them.
pub fn write_traces<W: Write>(traces: &[SessionTrace], writer: W) -> Result<()> {
    let with_pred = !traces.is_empty() && traces.iter().all(|t| t.predicted().is_some());
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = if with_pred {
        BASE_COLUMNS.iter().chain(PRED_COLUMNS.iter()).copied().collect()
    } else {
        BASE_COLUMNS.to_vec()
    };
    w.write_record(&header).map_err(csv_error)?;
    for t in traces {
        for (g, a) in t.actual().iter().enumerate() {
            let mut rec = vec![
                t.user_id().to_string(),
                t.video_id().to_string(),
                g.to_string(),
                a.x().to_string(),
                a.y().to_string(),
                a.z().to_string(),
            ];
            if with_pred {
                let p = t.predicted().expect("checked above")[g];
                rec.extend([p.x().to_string(), p.y().to_string(), p.z().to_string()]);
            }
            w.write_record(&rec).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_traces(traces: &[SessionTrace], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    write_traces(traces, file)
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::from(e).context(path.display().to_string()))
}

/// Writes `q,policy,pr_leak,mean_error_rad,mean_abs_noise_rad,qoe,pspr`
/// rows.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_rows_with_header(rows, create(path)?)
}

/// As [`write_results`] to any writer; the header is written even when
/// there are no rows.
pub fn write_results_to<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    write_rows_with_header(rows, writer)
}

fn write_rows_with_header<W: Write>(rows: &[ResultRow], mut writer: W) -> Result<()> {
    if rows.is_empty() {
        writeln!(writer, "q,policy,pr_leak,mean_error_rad,mean_abs_noise_rad,qoe,pspr")?;
        return Ok(());
    }
    write_rows(rows, writer)
}

pub fn write_curves(points: &[CurvePoint], path: &Path) -> Result<()> {
    write_rows(points, create(path)?)
}

pub fn write_trace_results(rows: &[TraceResultRow], path: &Path) -> Result<()> {
    write_rows(rows, create(path)?)
}
