//! Strict JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::zoo::{builtin, ZooEntry};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Geodesic,
    Lift,
    Index,
    VerifySrc,
    ConformalCheck,
    Probe,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Geodesic => "geodesic",
            ExperimentKind::Lift => "lift",
            ExperimentKind::Index => "index",
            ExperimentKind::VerifySrc => "verify-src",
            ExperimentKind::ConformalCheck => "conformal-check",
            ExperimentKind::Probe => "probe",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Name of a built-in or configured zoo entry.
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_n: Option<usize>,
    /// Probe `ε` grid; strictly decreasing after sorting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    /// Random curves for the off-shell identity check of `lift`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// File stem for artifacts; defaults to `<index>-<kind>-<case>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, case: &str) -> Self {
        ExperimentSpec { kind, case: case.into(), steps: None, basis_n: None, epsilons: None, samples: None, seed: None, output: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub zoo: Vec<ZooEntry>,
    pub experiments: Vec<ExperimentSpec>,
}

/// A validated configuration together with the full zoo it can reference.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: Config,
    pub zoo: Vec<ZooEntry>,
    /// SHA-256 of the raw document.
    pub hash: String,
}

impl LoadedConfig {
    pub fn entry(&self, name: &str) -> Option<&ZooEntry> {
        self.zoo.iter().find(|e| e.name == name)
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, CliError> {
    let config: Config = serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
    validate(config, hash_bytes(text.as_bytes()))
}

/// Checks zoo entries, name uniqueness, references and resolutions.
pub fn validate(config: Config, hash: String) -> Result<LoadedConfig, CliError> {
    let mut zoo = builtin();
    for (i, e) in config.zoo.iter().enumerate() {
        if zoo.iter().any(|z| z.name == e.name) {
            return Err(CliError::Input(format!("zoo[{i}].name: duplicate zoo name '{}'", e.name)));
        }
        e.build().map_err(|err| CliError::Input(format!("zoo[{i}].{}: {}", err.field, err.message)))?;
        zoo.push(e.clone());
    }
    for (i, x) in config.experiments.iter().enumerate() {
        let at = |f: &str, m: &str| CliError::Input(format!("experiments[{i}].{f}: {m}"));
        if !zoo.iter().any(|z| z.name == x.case) {
            return Err(at("case", &format!("unknown zoo entry '{}'", x.case)));
        }
        if x.steps == Some(0) {
            return Err(at("steps", "must be positive"));
        }
        if matches!(x.basis_n, Some(n) if n < 2) {
            return Err(at("basis_n", "must be at least 2"));
        }
        if x.samples == Some(0) {
            return Err(at("samples", "must be positive"));
        }
        if let Some(eps) = &x.epsilons {
            if eps.len() < 6 || eps.iter().any(|e| !(*e > 0.0 && *e < 0.2)) {
                return Err(at("epsilons", "need at least 6 values in (0, 0.2)"));
            }
            let mut sorted = eps.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(at("epsilons", "values must be distinct"));
            }
        }
        if let Some(o) = &x.output {
            if o.is_empty() || o.contains(['/', '\\']) || o.starts_with('.') {
                return Err(at("output", "must be a plain file stem"));
            }
        }
    }
    Ok(LoadedConfig { config, zoo, hash })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = parse_config(r#"{"zoo": [], "experiments": [{"kind": "index", "case": "wind05"}]}"#).unwrap();
        assert_eq!(c.config.experiments.len(), 1);
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn rejects_unknown_key() {
        let err = parse_config(r#"{"zoo": [], "experiments": [{"kind": "index", "case": "wind05", "stepz": 3}]}"#).unwrap_err();
        assert!(err.to_string().contains("stepz"), "{err}");
    }

    #[test]
    fn rejects_supercritical_wind() {
        let src = r#"{"zoo": [{"name": "w", "metric": {"kind": "euclidean_wind", "a": [1.2, 0.0]}, "chart": 2.0,
            "geodesic": {"p": [0.0, 0.0], "q": [1.0, 0.0]}}], "experiments": []}"#;
        let err = parse_config(src).unwrap_err();
        assert!(err.to_string().contains("zoo[0].metric.a"), "{err}");
    }

    #[test]
    fn rejects_unknown_case() {
        let err = parse_config(r#"{"zoo": [], "experiments": [{"kind": "probe", "case": "nope"}]}"#).unwrap_err();
        assert!(err.to_string().contains("experiments[0].case"));
    }
}
