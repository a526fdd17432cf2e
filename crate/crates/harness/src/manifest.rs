//! Run manifests: written once before a run starts, never rewritten.
//!
//! The format is the config `key = value` format, so a manifest can be fed
//! back with `--config` to reproduce the run. Provenance keys carry the
//! `manifest.` prefix and are skipped on re-parse.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, MANIFEST_PREFIX};
use crate::error::{HarnessError, Result};
use crate::metrics::METRICS_SCHEMA;

pub const MANIFEST_SCHEMA: &str = "manifest/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: u64,
    pub estimator: String,
    pub code_version: String,
    /// Fully resolved config; `seeds` is narrowed to this run's seed.
    pub config: ExperimentConfig,
    pub deviations: Vec<String>,
    pub outputs: Vec<(String, PathBuf)>,
    /// Derived run parameters such as calibrated budgets.
    pub notes: Vec<(String, String)>,
}

pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    pub fn new(run_id: String, seed: u64, config: &ExperimentConfig) -> Self {
        let mut config = config.clone();
        config.seeds = vec![seed];
        Self {
            run_id,
            seed,
            estimator: config.bonus.to_string(),
            code_version: code_version(),
            config,
            deviations: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let p = MANIFEST_PREFIX;
        let mut s = String::new();
        s += &format!("{p}schema = {MANIFEST_SCHEMA}\n");
        s += &format!("{p}run_id = {}\n", self.run_id);
        s += &format!("{p}command = {}\n", self.config.command.name());
        s += &format!("{p}code_version = {}\n", self.code_version);
        s += &format!("{p}seed = {}\n", self.seed);
        s += &format!("{p}estimator = {}\n", self.estimator);
        s += &format!("{p}metrics_schema = {METRICS_SCHEMA}\n");
        for (name, path) in &self.outputs {
            s += &format!("{p}output.{name} = {}\n", path.display());
        }
        for (i, d) in self.deviations.iter().enumerate() {
            s += &format!("{p}deviation.{i} = {d}\n");
        }
        for (k, v) in &self.notes {
            s += &format!("{p}note.{k} = {v}\n");
        }
        s += &self.config.to_text();
        s
    }

    /// Writes the manifest; fails if one already exists at `path`.
    pub fn write_new(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut f = fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    HarnessError::Usage(format!(
                        "manifest {} already exists; choose a fresh --out",
                        path.display()
                    ))
                } else {
                    e.into()
                }
            })?;
        f.write_all(self.to_text().as_bytes())?;
        let mut perms = f.metadata()?.permissions();
        perms.set_readonly(true);
        fs::set_permissions(path, perms)?;
        Ok(())
    }
}

/// All `key = value` pairs of a manifest file, in order.
pub fn read_entries(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}
