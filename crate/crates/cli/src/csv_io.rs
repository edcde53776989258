//! CSV contracts: trajectories, trace-distance series and sweep tables.
//!
//! Every file starts with `# key = value` metadata lines followed by a header.
//! Floats use scientific notation with nine significant digits and lines end in LF,
//! so identical runs give byte-identical files.

use std::io::Write;
use std::path::Path;

use spinboson::measure::{BlochTrajectory, TraceDistanceSeries, TrajectoryMeta};

use crate::error::{CliError, Result};

pub const TRAJECTORY_HEADER: [&str; 4] = ["time", "sx", "sy", "sz"];
pub const DISTANCE_HEADER: [&str; 3] = ["time", "d", "sigma"];
pub const SWEEP_HEADER: [&str; 8] =
    ["alpha", "omega_c", "solver", "n_value", "n_intervals", "horizon", "converged", "status"];

/// Version tag written into every metadata block.
pub const TOOLKIT_VERSION: &str = concat!("sbnm ", env!("CARGO_PKG_VERSION"));

pub fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn csv_error(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

/// Writes `# key = value` lines for the run metadata and the toolkit version.
pub fn write_metadata<W: Write>(out: &mut W, meta: &TrajectoryMeta) -> std::io::Result<()> {
    writeln!(out, "# solver = {}", meta.solver)?;
    for (key, value) in &meta.params {
        writeln!(out, "# {key} = {value}")?;
    }
    if meta.mirrored {
        writeln!(out, "# mirrored = true")?;
    }
    writeln!(out, "# version = {TOOLKIT_VERSION}")
}

fn write_rows<W: Write>(mut out: W, meta: &TrajectoryMeta, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    write_metadata(&mut out, meta)?;
    let mut w = csv_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| format_float(x))).map_err(csv_error)?;
    }
    w.flush()
}

pub fn write_trajectory<W: Write>(out: W, traj: &BlochTrajectory) -> std::io::Result<()> {
    let rows: Vec<Vec<f64>> =
        (0..traj.len()).map(|k| vec![traj.t[k], traj.sx[k], traj.sy[k], traj.sz[k]]).collect();
    write_rows(out, &traj.meta, &TRAJECTORY_HEADER, &rows)
}

pub fn write_distance<W: Write>(out: W, series: &TraceDistanceSeries, meta: &TrajectoryMeta) -> std::io::Result<()> {
    let rows: Vec<Vec<f64>> =
        (0..series.len()).map(|k| vec![series.t[k], series.d[k], series.sigma[k]]).collect();
    write_rows(out, meta, &DISTANCE_HEADER, &rows)
}

/// One line of a sweep table; `outcome` holds the error message of a failed point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub omega_c: f64,
    pub solver: String,
    pub outcome: std::result::Result<SweepValues, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepValues {
    pub n_value: f64,
    pub n_intervals: usize,
    pub horizon: f64,
    pub converged: bool,
}

pub fn write_sweep<W: Write>(mut out: W, meta: &TrajectoryMeta, rows: &[SweepRow]) -> std::io::Result<()> {
    write_metadata(&mut out, meta)?;
    let mut w = csv_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_error)?;
    for row in rows {
        let (alpha, omega_c) = (format_float(row.alpha), format_float(row.omega_c));
        let record = match &row.outcome {
            Ok(v) => [
                alpha,
                omega_c,
                row.solver.clone(),
                format_float(v.n_value),
                v.n_intervals.to_string(),
                format_float(v.horizon),
                v.converged.to_string(),
                "ok".to_string(),
            ],
            Err(message) => [
                alpha,
                omega_c,
                row.solver.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("error: {message}"),
            ],
        };
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush()
}

/// Metadata from the leading `# key = value` lines.
pub fn parse_metadata(text: &str) -> TrajectoryMeta {
    let mut meta = TrajectoryMeta::default();
    for line in text.lines().map_while(|l| l.strip_prefix('#')) {
        let Some((key, value)) = line.split_once('=') else { continue };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "solver" => meta.solver = value.to_string(),
            "mirrored" => meta.mirrored = value == "true",
            "version" => {}
            _ => meta.params.push((key.to_string(), value.to_string())),
        }
    }
    meta
}

/// Numeric columns of a CSV file whose header must equal `header`.
pub fn read_columns(text: &str, header: &[&str], path: &Path) -> Result<Vec<Vec<f64>>> {
    let schema = |message: String| CliError::Schema { path: path.to_path_buf(), message };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| schema(format!("unreadable header: {e}")))?.clone();
    let found: Vec<&str> = found.iter().collect();
    if let Some(missing) = header.iter().find(|h| !found.contains(h)) {
        return Err(schema(format!(
            "missing column '{missing}', expected header '{}'",
            header.join(",")
        )));
    }
    if found != header {
        return Err(schema(format!(
            "header '{}' does not match '{}'",
            found.join(","),
            header.join(",")
        )));
    }

    let mut columns = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(|e| schema(format!("malformed row: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(schema(format!(
                "line {line}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        for ((field, name), column) in record.iter().zip(header).zip(&mut columns) {
            let value: f64 = field.parse().map_err(|_| {
                schema(format!("line {line}, column '{name}': '{field}' is not a number"))
            })?;
            column.push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(schema("no data rows".into()));
    }
    Ok(columns)
}

pub fn parse_trajectory(text: &str, path: &Path) -> Result<BlochTrajectory> {
    let meta = parse_metadata(text);
    let mut columns = read_columns(text, &TRAJECTORY_HEADER, path)?.into_iter();
    let mut next = || columns.next().unwrap_or_default();
    let (t, sx, sy, sz) = (next(), next(), next(), next());
    BlochTrajectory::new(t, sx, sy, sz, meta)
        .map_err(|e| CliError::Schema { path: path.to_path_buf(), message: e.to_string() })
}

pub fn read_trajectory(path: &Path) -> Result<BlochTrajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_trajectory(&text, path)
}
