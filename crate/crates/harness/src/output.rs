//! Row emission: CSV with a header, or JSON lines, flushed per row.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (valid: csv, json)")),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// `x` rounded to 9 significant digits.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub fn ser_sig9<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(sig9(*x))
}

pub fn ser_sig9_vec<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let joined = xs
        .iter()
        .map(|x| sig9(*x).to_string())
        .collect::<Vec<_>>()
        .join(";");
    s.serialize_str(&joined)
}

/// Full round-trip precision, for vectors whose sum must stay exact.
pub fn ser_exact_vec<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let joined = xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
    s.serialize_str(&joined)
}

/// Appends rows to one output file, flushing after each so a crashed run
/// keeps everything written so far.
pub struct RowSink {
    path: PathBuf,
    format: Format,
    csv: Option<csv::Writer<File>>,
    json: Option<BufWriter<File>>,
}

impl RowSink {
    /// Creates (truncating) `path`.
    pub fn create(path: &Path, format: Format) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)?;
        Ok(match format {
            Format::Csv => Self {
                path: path.to_path_buf(),
                format,
                csv: Some(
                    csv::WriterBuilder::new()
                        .has_headers(true)
                        .from_writer(file),
                ),
                json: None,
            },
            Format::Json => Self {
                path: path.to_path_buf(),
                format,
                csv: None,
                json: Some(BufWriter::new(file)),
            },
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn write<R: Serialize>(&mut self, row: &R) -> Result<()> {
        if let Some(w) = self.csv.as_mut() {
            w.serialize(row)?;
            w.flush()?;
        }
        if let Some(w) = self.json.as_mut() {
            serde_json::to_writer(&mut *w, row)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }

    pub fn write_all<R: Serialize>(&mut self, rows: &[R]) -> Result<()> {
        rows.iter().try_for_each(|r| self.write(r))
    }
}

/// Writes `rows` to `dir/stem.{csv,jsonl}` and returns the path.
pub fn write_table<R: Serialize>(
    dir: &Path,
    stem: &str,
    format: Format,
    rows: &[R],
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let mut sink = RowSink::create(&path, format)?;
    sink.write_all(rows)?;
    Ok(path)
}
