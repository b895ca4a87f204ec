//! CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// A CSV file with a fixed header. Undefined numbers are written as `NaN`
/// and flagged in the trailing `status` column.
pub struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
    width: usize,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

impl Table {
    pub fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            ensure_dir(parent)?;
        }
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self {
            path,
            writer,
            width: header.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        assert_eq!(fields.len(), self.width, "row width does not match header of {}", self.path.display());
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NaN".into()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), num)
}

/// `ok`, or the names of the undefined fields joined by `;`.
pub fn status(undefined: &[(&str, bool)]) -> String {
    let bad: Vec<&str> = undefined.iter().filter(|(_, u)| *u).map(|(n, _)| *n).collect();
    if bad.is_empty() {
        "ok".into()
    } else {
        bad.iter().map(|n| format!("{n}_undefined")).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a RunConfig,
    pub outputs: Vec<String>,
    pub results: Value,
}

pub fn write_manifest(cfg: &RunConfig, command: &str, outputs: &[PathBuf], results: Value) -> Result<PathBuf> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        results,
    };
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&m)?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
