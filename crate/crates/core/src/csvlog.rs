//! Three-column CSV logs (`t_s,fz_n,mz_nm`) and calibration pair files.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::analysis::{AnalysisError, FtSeries};
use crate::sim::FtSample;

pub const LOG_HEADER: [&str; 3] = ["t_s", "fz_n", "mz_nm"];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {error}")]
    Io {
        path: String,
        error: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("header must be `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("log content: {0}")]
    Series(AnalysisError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LogError + '_ {
    move |error| LogError::Io {
        path: path.display().to_string(),
        error,
    }
}

/// Values are printed in shortest round-trip form so a reload is bit-exact.
pub fn write_log<W: Write>(out: W, samples: &[FtSample]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "{}", LOG_HEADER.join(","))?;
    for s in samples {
        writeln!(out, "{},{},{}", s.t, s.fz, s.mz)?;
    }
    out.flush()
}

pub fn write_log_file(path: &Path, samples: &[FtSample]) -> Result<(), LogError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_log(file, samples).map_err(io_err(path))
}

fn csv_error(e: csv::Error) -> LogError {
    let line = e.position().map_or(0, |p| p.line());
    LogError::Row {
        line,
        message: e.to_string(),
    }
}

fn parse_field(record: &csv::StringRecord, i: usize, name: &str) -> Result<f64, LogError> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(i).ok_or_else(|| LogError::Row {
        line,
        message: format!("missing column `{name}`"),
    })?;
    let v: f64 = raw.trim().parse().map_err(|_| LogError::Row {
        line,
        message: format!("`{raw}` is not a number in column `{name}`"),
    })?;
    if !v.is_finite() {
        return Err(LogError::Row {
            line,
            message: format!("non-finite value in column `{name}`"),
        });
    }
    Ok(v)
}

/// Parse a sensor log and check its timing.
pub fn read_log<R: Read>(input: R) -> Result<FtSeries, LogError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != LOG_HEADER {
        return Err(LogError::Header {
            expected: LOG_HEADER.join(","),
            found: found.join(","),
        });
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if record.len() != 3 {
            return Err(LogError::Row {
                line: record.position().map_or(0, |p| p.line()),
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        samples.push(FtSample {
            t: parse_field(&record, 0, LOG_HEADER[0])?,
            fz: parse_field(&record, 1, LOG_HEADER[1])?,
            mz: parse_field(&record, 2, LOG_HEADER[2])?,
        });
    }
    FtSeries::new(samples, None).map_err(LogError::Series)
}

pub fn read_log_file(path: &Path) -> Result<FtSeries, LogError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_log(file)
}

/// `(pot_reading, ref_force)` rows; a non-numeric first row is taken as a header.
pub fn read_pairs<R: Read>(input: R) -> Result<Vec<(f64, f64)>, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let is_header = i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err());
        if is_header {
            continue;
        }
        if record.len() != 2 {
            return Err(LogError::Row {
                line: record.position().map_or(0, |p| p.line()),
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        pairs.push((
            parse_field(&record, 0, "pot_reading")?,
            parse_field(&record, 1, "ref_force")?,
        ));
    }
    Ok(pairs)
}
