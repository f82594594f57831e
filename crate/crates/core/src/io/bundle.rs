use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::table::{emit_csv, emit_json, Table};
use crate::error::Result;

pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub rows: usize,
    pub columns: Vec<String>,
    pub nan_cells: usize,
}

/// Contents of the JSON sidecar written next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub program: String,
    pub version: String,
    pub subcommand: String,
    pub config: RunConfig,
    /// Photon cutoffs actually used, keyed by stage.
    pub cutoffs: BTreeMap<String, usize>,
    pub wall_time_s: f64,
    pub files: Vec<FileEntry>,
    /// True when any CSV holds a `nan` cell.
    pub has_nan: bool,
    pub warnings: Vec<String>,
    /// Subcommand-specific scalar results.
    pub summary: serde_json::Value,
}

/// Output directory being filled by one run.
pub struct ResultBundle {
    dir: PathBuf,
    subcommand: String,
    started: Instant,
    files: Vec<FileEntry>,
    cutoffs: BTreeMap<String, usize>,
    warnings: Vec<String>,
    summary: serde_json::Map<String, serde_json::Value>,
}

impl ResultBundle {
    /// Creates `dir` (and parents) for a run of `subcommand`.
    pub fn create(dir: &Path, subcommand: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            started: Instant::now(),
            files: Vec::new(),
            cutoffs: BTreeMap::new(),
            warnings: Vec::new(),
            summary: serde_json::Map::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_table(&mut self, file: &str, table: &Table) -> Result<()> {
        emit_csv(table, &self.dir.join(file))?;
        self.files.push(FileEntry {
            file: file.to_string(),
            rows: table.len(),
            columns: table.columns.clone(),
            nan_cells: table.nan_cells(),
        });
        Ok(())
    }

    pub fn cutoff(&mut self, stage: &str, n_max: usize) {
        self.cutoffs.insert(stage.to_string(), n_max);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    /// Writes the metadata sidecar and returns it.
    pub fn finish(self, config: &RunConfig) -> Result<Metadata> {
        let meta = Metadata {
            program: "tmdl".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: self.subcommand,
            config: config.clone(),
            cutoffs: self.cutoffs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            has_nan: self.files.iter().any(|f| f.nan_cells > 0),
            files: self.files,
            warnings: self.warnings,
            summary: serde_json::Value::Object(self.summary),
        };
        emit_json(&meta, &self.dir.join(METADATA_FILE))?;
        Ok(meta)
    }
}
