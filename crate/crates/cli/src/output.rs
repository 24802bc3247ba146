//! Run manifests and CSV/JSON artifacts.
//!
//! A run writes `<out>/<command>-<timestamp>.csv`, the matching `.json`
//! summary with the manifest inline, and `<out>/manifest.json`. The CSV shares
//! the run stem with the JSON summary and is listed in the manifest.

use crate::error::CliError;
use crate::settings::Settings;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration; feeding it back through `--config`
    /// reproduces the run.
    pub config: Settings,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_at: String,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// JSON summary layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary<T> {
    pub manifest: RunManifest,
    pub passed: bool,
    pub result: T,
}

/// Rows of one CSV table, already formatted.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub struct RunWriter {
    dir: PathBuf,
    command: &'static str,
    stem: String,
    started_at: String,
    clock: Instant,
}

impl RunWriter {
    pub fn start(dir: &Path, command: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let now = chrono::Utc::now();
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            stem: format!("{command}-{}", now.format("%Y%m%dT%H%M%S%.3fZ")),
            started_at: now.to_rfc3339(),
            clock: Instant::now(),
        })
    }

    /// Writes the CSV, the JSON summary and the manifest; returns the paths in
    /// that order.
    pub fn finish<T: Serialize>(
        self,
        config: Settings,
        table: &Table,
        passed: bool,
        result: &T,
    ) -> Result<[PathBuf; 3], CliError> {
        let csv_path = self.dir.join(format!("{}.csv", self.stem));
        let json_path = self.dir.join(format!("{}.json", self.stem));
        let manifest_path = self.dir.join(MANIFEST_FILE);

        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;

        let manifest = RunManifest {
            command: self.command.to_string(),
            seed: config.seed,
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            outputs: [&csv_path, &json_path, &manifest_path]
                .iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect(),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
        };
        let summary = Summary {
            manifest: manifest.clone(),
            passed,
            result,
        };
        std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?)?;
        std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok([csv_path, json_path, manifest_path])
    }
}
