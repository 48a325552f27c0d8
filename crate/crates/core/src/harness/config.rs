//! Layered configuration: built-in defaults, then a JSON file, then
//! command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::exterior::ExteriorOptions;
use crate::geometry::{DEFAULT_ATTEMPT_BUDGET, DEFAULT_C0, DEFAULT_R0};
use crate::grid::StokesOptions;
use crate::homogenization::Mollifier;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudDefaults {
    pub c0: f64,
    pub r0: f64,
    pub attempt_budget: u64,
}

impl Default for CloudDefaults {
    fn default() -> Self {
        CloudDefaults {
            c0: DEFAULT_C0,
            r0: DEFAULT_R0,
            attempt_budget: DEFAULT_ATTEMPT_BUDGET,
        }
    }
}

/// Every tunable of the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub exterior: ExteriorOptions,
    pub stokes: StokesOptions,
    /// Default penalization parameter in units of `h^2`.
    pub eta_factor: f64,
    pub mollifier: Mollifier,
    pub cloud: CloudDefaults,
    /// Worker threads; `BRINKMAN_THREADS` caps this.
    pub threads: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            exterior: ExteriorOptions::default(),
            stokes: StokesOptions::default(),
            eta_factor: 0.1,
            mollifier: Mollifier::default(),
            cloud: CloudDefaults::default(),
            threads: None,
        }
    }
}

impl Config {
    /// Defaults, overlaid with `file` (if any) and then with `overrides`
    /// given as `dotted.key=json-value`.
    pub fn layered(file: Option<&Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut v = serde_json::to_value(Config::default()).expect("config serializes");
        if let Some(p) = file {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            let layer: Value =
                serde_json::from_str(&text).map_err(|e| HarnessError::Usage(format!("config {}: {e}", p.display())))?;
            if !layer.is_object() {
                return Err(HarnessError::Usage(format!(
                    "config {}: expected a JSON object",
                    p.display()
                )));
            }
            merge(&mut v, layer, "")?;
        }
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::Usage(format!("override `{o}` is not key=value")))?;
            let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut v, key, val)?;
        }
        serde_json::from_value(v).map_err(|e| HarnessError::Usage(format!("invalid configuration: {e}")))
    }

    /// Canonical JSON (sorted keys).
    pub fn canonical_json(&self) -> String {
        canonical(&serde_json::to_value(self).expect("config serializes"))
    }

    pub fn digest(&self) -> String {
        digest_hex(self.canonical_json().as_bytes())
    }
}

/// Serialize with object keys in sorted order.
pub fn canonical(v: &Value) -> String {
    // serde_json's default map is ordered by key
    let sorted: Value = serde_json::from_str(&v.to_string()).expect("valid json");
    sorted.to_string()
}

pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Deep merge; keys unknown to `base` are rejected.
fn merge(base: &mut Value, layer: Value, path: &str) -> Result<(), HarnessError> {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                let key = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                let slot = b
                    .get_mut(&k)
                    .ok_or_else(|| HarnessError::Usage(format!("unknown configuration key `{key}`")))?;
                merge(slot, v, &key)?;
            }
        }
        (slot, v) => *slot = v,
    }
    Ok(())
}

fn set_path(v: &mut Value, key: &str, val: Value) -> Result<(), HarnessError> {
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| HarnessError::Usage(format!("`{key}` does not name a configuration key")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*p) {
                return Err(HarnessError::Usage(format!("unknown configuration key `{key}`")));
            }
            obj.insert(p.to_string(), val);
            return Ok(());
        }
        cur = obj
            .get_mut(*p)
            .ok_or_else(|| HarnessError::Usage(format!("unknown configuration key `{key}`")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"stokes": {"outer_tol": 1e-7}, "eta_factor": 0.05}"#).unwrap();
        let c = Config::layered(Some(&p), &["eta_factor=0.02".into()]).unwrap();
        assert_eq!(c.stokes.outer_tol, 1e-7);
        assert_eq!(c.stokes.max_outer, StokesOptions::default().max_outer);
        assert_eq!(c.eta_factor, 0.02);
        assert!(Config::layered(None, &["nope=1".into()]).is_err());
        assert!(Config::layered(None, &["stokes.method=\"uzawa\"".into()]).is_ok());
        std::fs::write(&p, r#"{"typo": 1}"#).unwrap();
        assert!(Config::layered(Some(&p), &[]).is_err());
        std::fs::write(&p, r#"{"stokes": {"outer_tole": 1}}"#).unwrap();
        assert!(Config::layered(Some(&p), &[]).is_err());
        std::fs::write(&p, r#"{"mollifier": {"sigma": 0.1}, "threads": 2}"#).unwrap();
        let c = Config::layered(Some(&p), &[]).unwrap();
        assert_eq!(c.mollifier.sigma, Some(0.1));
        assert_eq!(c.threads, Some(2));
    }

    #[test]
    fn digest_tracks_content() {
        let a = Config::default();
        let b: Config = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.eta_factor = 0.2;
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
