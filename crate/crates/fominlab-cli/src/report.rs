//! Machine-readable run reports.
//!
//! `report.json` is the single source of pass/fail and is byte-identical for
//! identical configs and seeds: it embeds the resolved config, the seed, and
//! the artifact version, and nothing time-dependent. Wall-clock timing goes
//! to the `run_meta.json` sidecar, which is informational only.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// One verified quantity. `bound` is the side of the comparison `pass`
/// enforces (an upper bound for residuals and moments, a lower bound for
/// slacks and slopes); `anchor` names the identity or bound being checked.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub anchor: String,
    pub value: f64,
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn upper(name: impl Into<String>, anchor: &str, value: f64, se: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value,
            std_error: se,
            bound,
            pass: value <= bound,
        }
    }

    pub fn lower(name: impl Into<String>, anchor: &str, value: f64, se: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value,
            std_error: se,
            bound,
            pass: value >= bound,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub version: String,
    /// Files written next to the report (CSV exports).
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(config: ExperimentConfig, checks: Vec<Check>, artifacts: Vec<String>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            experiment: config.experiment.kind().to_string(),
            checks,
            pass,
            seed: config.sim.seed,
            version: format!("fominlab {}", fominlab::VERSION),
            config,
            artifacts,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output dir {}", dir.display()))?;
        let path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Informational sidecar; excluded from reproducibility comparisons.
#[derive(Debug, Serialize)]
pub struct RunMeta {
    pub wall_clock_seconds: f64,
}

impl RunMeta {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join("run_meta.json"), text)?;
        Ok(())
    }
}
