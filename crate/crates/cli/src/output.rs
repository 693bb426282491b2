//! CSV and JSON writers with bit-stable formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// One CSV cell: integers verbatim, floats with 17 significant digits.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.16e}"),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

pub struct Output {
    dir: PathBuf,
    command: &'static str,
    config: Value,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

impl Output {
    pub fn new(dir: &Path, command: &'static str, config: &impl Serialize) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let config = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config,
        })
    }

    /// Writes `<stem>.csv` and its sidecar `<stem>.meta.json`.
    pub fn csv(&self, stem: &str, header: &[&str], rows: &[Vec<Cell>], meta: Value) -> Result<PathBuf, CliError> {
        let path = self.dir.join(format!("{stem}.csv"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for r in rows {
            w.write_record(r.iter().map(|c| c.render())).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        let sidecar = json!({
            "command": self.command,
            "file": format!("{stem}.csv"),
            "columns": header,
            "rows": rows.len(),
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "meta": meta,
        });
        self.json(&format!("{stem}.meta"), &sidecar)?;
        Ok(path)
    }

    /// Writes `<stem>.json`, pretty-printed with a trailing newline.
    pub fn json(&self, stem: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let path = self.dir.join(format!("{stem}.json"));
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        fs::write(&path, s).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}
