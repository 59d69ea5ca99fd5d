//! CSV/JSON writers and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, SimError};
use dipole_core::model::ScenarioSpec;

/// Locale-independent scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => SimError::Write { path: path.into(), source },
        k => SimError::Usage(format!("{k:?}")),
    })?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|source| SimError::Write { path: path.into(), source })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| SimError::Write { path: path.into(), source })
}

/// `dir/stem.suffix` next to `path`, e.g. `run.csv` to `run.manifest.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

/// Everything needed to repeat a run with the same build.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario_path: PathBuf,
    pub overrides: Vec<String>,
    /// Scenario after overrides.
    pub scenario: ScenarioSpec,
    pub outputs: Vec<PathBuf>,
    /// Command-specific settings: grid, seeds, tolerances, method.
    pub metadata: serde_json::Value,
    pub warnings: Vec<String>,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
}
