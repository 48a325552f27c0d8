use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::HarnessError;
use crate::homogenization::with_suffix;

/// Record of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub subcommand: String,
    /// SHA-256 of the canonical JSON of `config`.
    pub config_digest: String,
    pub config: Config,
    pub seeds: Vec<u64>,
    pub versions: BTreeMap<String, String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<PathBuf>,
    /// `ok` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, subcommand: &str, config: &Config, threads: usize) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(
            env!("CARGO_PKG_NAME").to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        versions.insert(
            "parallel".to_string(),
            if crate::par::is_parallel() {
                "rayon"
            } else {
                "sequential"
            }
            .to_string(),
        );
        versions.insert("threads".to_string(), threads.to_string());
        RunManifest {
            command_line,
            subcommand: subcommand.to_string(),
            config_digest: config.digest(),
            config: config.clone(),
            seeds: Vec::new(),
            versions,
            timings: BTreeMap::new(),
            outputs: Vec::new(),
            status: "ok".to_string(),
            error: None,
            exit_code: 0,
        }
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        *self.timings.entry(stage.to_string()).or_insert(0.0) += seconds;
    }

    pub fn fail(&mut self, err: &HarnessError) {
        self.status = "failed".to_string();
        self.error = Some(err.to_string());
        self.exit_code = err.exit_code();
    }

    /// On success every listed output must exist.
    pub fn check_outputs(&self) -> Result<(), HarnessError> {
        match self.outputs.iter().find(|p| !p.exists()) {
            Some(p) => Err(HarnessError::Usage(format!("output {} was not written", p.display()))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json()).map_err(|e| HarnessError::io(path, e))
    }
}

/// `PREFIX_manifest.json`
pub fn manifest_path_for_prefix(prefix: &Path) -> PathBuf {
    with_suffix(prefix, "_manifest.json")
}

/// `FILE.manifest.json`
pub fn manifest_path_for_file(file: &Path) -> PathBuf {
    with_suffix(file, ".manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_survives_reserialization() {
        let m = RunManifest::new(vec!["x".into()], "selftest", &Config::default(), 1);
        let back = RunManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.config.digest(), m.config_digest);
    }

    #[test]
    fn paths() {
        assert_eq!(
            manifest_path_for_prefix(Path::new("out/run")),
            PathBuf::from("out/run_manifest.json")
        );
        assert_eq!(
            manifest_path_for_file(Path::new("m.json")),
            PathBuf::from("m.json.manifest.json")
        );
    }
}
