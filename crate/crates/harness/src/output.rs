//! Result files and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::runner::{Outcome, PointFailure};
use crate::table::{Format, Table};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub grid: usize,
    pub message: String,
}

impl From<&PointFailure> for FailureEntry {
    fn from(f: &PointFailure) -> Self {
        Self {
            grid: f.grid,
            message: f.message.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub scenario: String,
    pub files: Vec<FileEntry>,
    pub config_echo: serde_json::Value,
    pub failures: Vec<FailureEntry>,
    pub started_unix_s: f64,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

/// Writes every table of `outcome` and the files produced by [`write_tables`]
/// into `dir`, returning their manifest entries.
pub fn write_tables(dir: &Path, tables: &[Table], format: Format) -> Result<Vec<FileEntry>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    tables
        .iter()
        .map(|t| {
            let name = format!("{}.{}", t.name, format.extension());
            let bytes = t.encode(format);
            write(&dir.join(&name), &bytes)?;
            Ok(FileEntry {
                path: name,
                sha256: sha256_hex(&bytes),
                rows: t.rows.len(),
            })
        })
        .collect()
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf, HarnessError> {
    let path = dir.join(MANIFEST_NAME);
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest encodes");
    bytes.push(b'\n');
    write(&path, &bytes)?;
    Ok(path)
}

pub fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).unwrap_or(Duration::ZERO).as_secs_f64()
}

/// Writes the outcome tables and a manifest echoing `config`.
pub fn persist(
    dir: &Path,
    config: &ExperimentConfig,
    outcome: &Outcome,
    format: Format,
    started: SystemTime,
) -> Result<Manifest, HarnessError> {
    let files = write_tables(dir, &outcome.tables, format)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: outcome.scenario.name().to_string(),
        files,
        config_echo: serde_json::to_value(config).expect("config encodes"),
        failures: outcome.failures.iter().map(FailureEntry::from).collect(),
        started_unix_s: unix_seconds(started),
        wall_time_s: started.elapsed().unwrap_or(Duration::ZERO).as_secs_f64(),
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Reads a table written by [`write_tables`] in either format.
pub fn read_table(path: &Path) -> Result<Table, HarnessError> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let bad = |e: String| HarnessError::Run(format!("{}: {e}", path.display()));
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
        let columns: Vec<String> = serde_json::from_value(v["columns"].clone()).map_err(|e| bad(e.to_string()))?;
        let rows = v["rows"].as_array().ok_or_else(|| bad("missing rows".into()))?;
        let mut t = Table::new(name, &columns);
        for row in rows {
            let cells = row.as_array().ok_or_else(|| bad("row is not an array".into()))?;
            t.push(cells.iter().map(json_cell).collect());
        }
        Ok(t)
    } else {
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let columns: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
        let mut t = Table::new(name, &columns);
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            t.push(rec.iter().map(text_cell).collect());
        }
        Ok(t)
    }
}

fn json_cell(v: &serde_json::Value) -> crate::table::Cell {
    use crate::table::Cell;
    match v {
        serde_json::Value::Null => Cell::Empty,
        serde_json::Value::Bool(b) => Cell::Bool(*b),
        serde_json::Value::Number(n) => n.as_i64().map_or_else(|| Cell::Float(n.as_f64().unwrap_or(f64::NAN)), Cell::Int),
        serde_json::Value::String(s) => Cell::Text(s.clone()),
        other => Cell::Text(other.to_string()),
    }
}

fn text_cell(s: &str) -> crate::table::Cell {
    use crate::table::Cell;
    if s.is_empty() {
        Cell::Empty
    } else if let Ok(i) = s.parse::<i64>() {
        Cell::Int(i)
    } else if let Ok(f) = s.parse::<f64>() {
        Cell::Float(f)
    } else {
        Cell::Text(s.to_string())
    }
}
