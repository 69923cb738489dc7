//! Scenario configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sisd_core::ControlPolicy;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkSpec,
    pub params: ParamsSpec,
    pub policy: PolicySpec,
    pub x0: InitialStateSpec,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    pub seed: u64,
    pub outputs: OutputSpec,
}

fn default_horizon() -> usize {
    200_000
}

fn default_stop_tol() -> f64 {
    1e-10
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSpec {
    Generated(GeneratedNetwork),
    File(NetworkFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedNetwork {
    pub generator: GeneratorKind,
    pub n: usize,
    pub radius: f64,
    pub area_side: f64,
}

/// CSV weight matrix, one row per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    None,
    LinearDistancing,
}

impl PolicySpec {
    pub fn to_policy(self) -> ControlPolicy {
        match self {
            PolicySpec::None => ControlPolicy::None,
            PolicySpec::LinearDistancing => ControlPolicy::LinearDistancing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateSpec {
    /// Each coordinate uniform in `(1e-6, 1/2 - 1e-6)`. Without an explicit
    /// seed the draw comes from the master seed's initial-state stream.
    UniformOpenHalf {
        #[serde(default)]
        seed: Option<u64>,
    },
    Explicit {
        values: Vec<f64>,
    },
    /// Numbers separated by commas, whitespace or newlines.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub trajectory_csv: bool,
    #[serde(default = "yes")]
    pub regime_json: bool,
    #[serde(default = "yes")]
    pub audit_json: bool,
    /// Per-step certificate log `audit_steps.csv`.
    #[serde(default)]
    pub audit_csv: bool,
}

impl ScenarioConfig {
    /// Parses a config; relative paths inside it are taken relative to `base`.
    pub fn from_json_str(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))?;
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::from_json_str(&text, base).map_err(|e| match e {
            CliError::ConfigParse(msg) => {
                CliError::ConfigParse(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let NetworkSpec::File(f) = &mut self.network {
            resolve(&mut f.file);
        }
        if let InitialStateSpec::File { path } = &mut self.x0 {
            resolve(path);
        }
        resolve(&mut self.outputs.directory);
    }
}
