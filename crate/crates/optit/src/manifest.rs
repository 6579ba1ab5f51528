//! Run manifests: what produced a directory of outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// `git describe` of the source tree when available.
    pub build: String,
    pub seed: u64,
    /// `synchronous` or `concurrent`.
    pub mode: String,
    pub threads: usize,
    /// Resolved config as TOML.
    pub config: String,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
    pub total_env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub outputs: Vec<String>,
}

/// Source revision, if this binary runs inside a git checkout.
pub fn build_id() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_owned())
        .unwrap_or_else(|| "unknown".into())
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join(FILE_NAME), serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(FILE_NAME))?)?)
    }
}
