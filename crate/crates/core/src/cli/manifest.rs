//! Run directories and the manifest that lists their files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Config;
use super::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn hash(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)?;
        Ok(Artifact {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAccounting {
    pub requested: usize,
    pub failed: usize,
    pub failure_fraction: f64,
    pub clamped_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub experiment: String,
    pub command: String,
    pub model: String,
    pub config: Config,
    pub seed: u64,
    pub tool_version: String,
    pub inputs: Vec<Artifact>,
    /// Files written by the run, relative to the run directory unless they
    /// live outside it.
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub path_accounting: Option<PathAccounting>,
    /// Verification outcome, when the command has one.
    pub pass: Option<bool>,
}

/// An output directory being filled by one command.
pub struct RunDir {
    pub dir: PathBuf,
    pub manifest: ExperimentManifest,
    started: std::time::Instant,
}

impl RunDir {
    /// Creates `<root>/<experiment>/<timestamp>-<seed>/`, adding a suffix if
    /// that directory already exists.
    pub fn create(root: &Path, experiment: &str, command: &str, cfg: &Config) -> Result<Self, CliError> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let base = root.join(experiment);
        let mut dir = base.join(format!("{stamp}-{}", cfg.seed));
        let mut k = 2;
        while dir.exists() {
            dir = base.join(format!("{stamp}-{}-{k}", cfg.seed));
            k += 1;
        }
        std::fs::create_dir_all(&dir)?;
        Ok(RunDir {
            dir,
            manifest: ExperimentManifest {
                schema_version: SCHEMA_VERSION,
                experiment: experiment.to_string(),
                command: command.to_string(),
                model: cfg.model.clone(),
                config: cfg.clone(),
                seed: cfg.seed,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_clock_seconds: 0.0,
                path_accounting: None,
                pass: None,
            },
            started: std::time::Instant::now(),
        })
    }

    /// Path for a new output file, recorded in the manifest.
    pub fn output(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.record(&p);
        Ok(p)
    }

    /// Records a file written somewhere else (an external cache).
    pub fn record(&mut self, p: &Path) {
        let name = p
            .strip_prefix(&self.dir)
            .map(|r| r.display().to_string())
            .unwrap_or_else(|_| p.display().to_string());
        if !self.manifest.outputs.contains(&name) {
            self.manifest.outputs.push(name);
        }
    }

    pub fn input(&mut self, p: &Path) -> Result<(), CliError> {
        self.manifest.inputs.push(Artifact::hash(p)?);
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let p = self.dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(&self.manifest).expect("manifest serializes"))?;
        Ok(self.dir)
    }
}
