//! Report envelopes and atomic writes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::UsageError;

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    /// One line per violated invariant.
    pub failures: Vec<String>,
    pub report: Value,
    /// Header and rows for `--format csv`, if the command is tabular.
    pub table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// SHA-256 of the canonical JSON form of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serialisable");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Full report text for the configured format.
pub fn render(cfg: &RunConfig, outcome: &Outcome) -> Result<String, UsageError> {
    match cfg.format {
        Format::Json => {
            let envelope = json!({
                "command": cfg.command,
                "version": env!("CARGO_PKG_VERSION"),
                "config": cfg,
                "config_hash": digest(cfg),
                "pass": outcome.pass,
                "failures": outcome.failures,
                "report": outcome.report,
            });
            let mut s = serde_json::to_string_pretty(&envelope).expect("serialisable");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let table = outcome.table.as_ref().ok_or_else(|| {
                UsageError::new(format!(
                    "--format csv is not available for {}; use json",
                    cfg.command.as_str()
                ))
            })?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.header).map_err(|e| UsageError::new(e.to_string()))?;
            for r in &table.rows {
                w.write_record(r).map_err(|e| UsageError::new(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| UsageError::new(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("utf-8 records"))
        }
    }
}

/// Writes to `path` through a sibling temporary file and a rename, or to
/// stdout when no path is given. A failed run leaves no partial file.
pub fn emit(path: Option<&Path>, text: &str) -> io::Result<()> {
    let Some(path) = path else {
        let mut out = io::stdout().lock();
        out.write_all(text.as_bytes())?;
        return out.flush();
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
