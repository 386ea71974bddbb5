use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CliError, ExperimentConfig};

/// Version of the report layout.
pub const SCHEMA: u32 = 1;

/// A CSV series; numbers are preformatted so the files are as exact as the JSON.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Formats a float the way the JSON reports do.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0.0000000000000000e0".into()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Result of one experiment before it is written out.
#[derive(Debug, Default)]
pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    /// Enough to replay the single failing check.
    pub witness: Option<Value>,
    pub tables: Vec<Table>,
    /// Extra JSON files, e.g. a built plan.
    pub artifacts: Vec<(String, Value)>,
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    mmspace::io::to_writer(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&table.header).map_err(|e| io_err(path, e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `report.json`, `witness.json` on failure, the CSV tables and artifacts; returns the report path.
pub fn write_outcome(config: &ExperimentConfig, outcome: &Outcome) -> Result<PathBuf, CliError> {
    let dir = &config.out;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut report = json!({
        "schema": SCHEMA,
        "experiment": config.params.kind(),
        "seed": config.seed,
        "pass": outcome.pass,
        "config": to_value(config),
        "result": outcome.result,
    });
    if let Some(w) = &outcome.witness {
        report["witness"] = w.clone();
        let witness = json!({
            "schema": SCHEMA,
            "experiment": config.params.kind(),
            "seed": config.seed,
            "config": to_value(config),
            "witness": w,
        });
        write_json(&dir.join("witness.json"), &witness)?;
    } else {
        let stale = dir.join("witness.json");
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| io_err(&stale, e))?;
        }
    }
    report["tables"] = Value::Array(outcome.tables.iter().map(|t| Value::String(format!("{}.csv", t.name))).collect());
    for t in &outcome.tables {
        write_csv(&dir.join(format!("{}.csv", t.name)), t)?;
    }
    for (name, value) in &outcome.artifacts {
        write_json(&dir.join(name), value)?;
    }
    let path = dir.join("report.json");
    write_json(&path, &report)?;
    Ok(path)
}
