use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use equipart_core::domain::{format_real, grid_field_to_string, GridField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One cell of an output table.
#[derive(Debug, Clone)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Real(x) => format_real(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Real(x) => real_json(*x),
            Cell::Int(i) => (*i).into(),
            Cell::Bool(b) => (*b).into(),
        }
    }
}

/// JSON has no infinities; those become strings.
pub fn real_json(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
    } else {
        serde_json::Value::String(x.to_string())
    }
}

/// Files read and written by one run.
pub struct Run {
    out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Run {
    pub fn new(out_dir: PathBuf, format: Format, seed: u64) -> CliResult<Self> {
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| invalid(format!("cannot create output directory {}: {e}", out_dir.display())))?;
        Ok(Self { out_dir, format, seed, inputs: Vec::new(), outputs: Vec::new() })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Reads an input file and records its digest.
    pub fn input(&mut self, path: &Path) -> CliResult<String> {
        let bytes = std::fs::read(path).map_err(|e| invalid(format!("input file {}: {e}", path.display())))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: digest(&bytes) });
        String::from_utf8(bytes).map_err(|_| invalid(format!("input file {}: not UTF-8 text", path.display())))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(FileDigest { path: name.to_string(), sha256: digest(text.as_bytes()) });
        Ok(())
    }

    pub fn write_field(&mut self, name: &str, field: &GridField) -> CliResult<()> {
        self.write_text(name, &grid_field_to_string(field))
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `<stem>.csv` or `<stem>.json` depending on the run format.
    pub fn write_table(&mut self, stem: &str, header: &[&str], rows: &[Vec<Cell>]) -> CliResult<()> {
        match self.format {
            Format::Csv => {
                let mut text = header.join(",");
                text.push('\n');
                for row in rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    let _ = writeln!(text, "{}", cells.join(","));
                }
                self.write_text(&format!("{stem}.csv"), &text)
            }
            Format::Json => {
                let records: Vec<serde_json::Value> = rows
                    .iter()
                    .map(|row| {
                        let obj: serde_json::Map<String, serde_json::Value> =
                            header.iter().zip(row).map(|(h, c)| (h.to_string(), c.json())).collect();
                        serde_json::Value::Object(obj)
                    })
                    .collect();
                self.write_json(&format!("{stem}.json"), &serde_json::Value::Array(records))
            }
        }
    }
}
