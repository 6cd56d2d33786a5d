use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use polyspt::model_params::ParamsFile;
use serde::Serialize;

/// Record of one CLI run, written next to its artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub params_path: Option<PathBuf>,
    /// Parsed content of the parameter file at run time.
    pub params: Option<ParamsFile>,
    pub seed: u64,
    pub seed_generated: bool,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_paths: usize,
    pub degree: Option<usize>,
    pub format: String,
    /// Subcommand-specific arguments after defaults are applied.
    pub args: serde_json::Value,
    pub artifacts: Vec<PathBuf>,
    pub started_at: DateTime<Utc>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(Self::file_name(&self.command));
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
