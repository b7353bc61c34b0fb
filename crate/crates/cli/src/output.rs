//! Deterministic CSV and JSON writers.
//!
//! CSV files start with a `#` comment block of `key = value` provenance
//! lines, followed by a header row. Floats use Rust's shortest round-trip
//! representation, so the text is a pure function of the values. Undefined
//! entries are empty cells; non-finite values are refused.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::{CliError, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Ordered `key = value` pairs describing how an output was produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance(pub Vec<(String, String)>);

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut prov = Provenance::default();
        prov.push("generator", format!("piston {VERSION}"));
        prov.push("command", command);
        prov.push("preset", cfg.preset.as_deref().unwrap_or("none"));
        prov.push("seed", cfg.seed);
        let p = cfg.engine();
        for (key, value) in [
            ("kappa_c", p.kappa_c),
            ("kappa_h", p.kappa_h),
            ("j", p.j),
            ("alpha", p.alpha),
            ("delta0", p.delta0),
            ("g", p.g),
            ("e_c", p.e_c),
            ("e_j", p.e_j),
            ("n_h", p.n_h),
            ("n_c", p.n_c),
            ("hbar_g", p.hbar_g),
        ] {
            prov.push_f64(&format!("params.{key}"), value);
        }
        prov
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    /// Value of the first entry named `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Shortest round-trip text of `x`, in scientific notation outside
/// 1e-4 ≤ |x| < 1e15.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Formats a float, refusing NaN and infinities.
pub fn num(x: f64) -> Result<String, CliError> {
    if x.is_finite() {
        Ok(fmt_f64(x))
    } else {
        Err(CliError::Runtime(format!("refusing to write non-finite value {x}")))
    }
}

pub fn opt(x: Option<f64>) -> Result<String, CliError> {
    x.map_or(Ok(String::new()), num)
}

pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut file = BufWriter::new(File::create(path)?);
    for (key, value) in &prov.0 {
        writeln!(file, "# {key} = {value}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Runtime(format!("csv: {e}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(format!("json: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// A parsed CSV file with its provenance block.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub provenance: Provenance,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("missing column `{name}`")))
    }

    /// Values of a numeric column; empty cells become `None`.
    pub fn optional_floats(&self, name: &str) -> Result<Vec<Option<f64>>, CliError> {
        let col = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row[col].trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(Some)
                    .ok_or_else(|| CliError::Config(format!("row {}: bad value `{cell}` in column `{name}`", i + 1)))
            })
            .collect()
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        self.optional_floats(name)?
            .into_iter()
            .enumerate()
            .map(|(i, x)| x.ok_or_else(|| CliError::Config(format!("row {}: empty cell in column `{name}`", i + 1))))
            .collect()
    }
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut provenance = Provenance::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').split_once('=') {
            provenance.push(k.trim(), v.trim());
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
    let header = reader.headers().map_err(bad)?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(bad)?;
    Ok(Table {
        provenance,
        header,
        rows,
    })
}
