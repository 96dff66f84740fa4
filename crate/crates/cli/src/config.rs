//! Run configurations. Each command reads an optional JSON file, overlays
//! command-line flags, and resolves paths to absolute ones so the result can
//! be stored in a manifest and replayed from anywhere.

use std::path::{Path, PathBuf};

use leadvar::cv::Grid;
use leadvar::ingest::CsvSchema;
use leadvar::panel::TransformRecord;
use leadvar::simulate::ScenarioId;
use leadvar::{FitOptions, Hyper};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

fn default_holdout() -> usize {
    500
}

fn default_burn_in() -> usize {
    500
}

fn default_p() -> usize {
    3
}

fn default_folds() -> usize {
    5
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: ScenarioId,
    pub seed: u64,
    pub t_train: usize,
    #[serde(default = "default_holdout")]
    pub t_holdout: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub noise_cov: Option<Vec<Vec<f64>>>,
}

/// Shared by `fit` (uses `hyper`) and `cv-fit` (uses `grid` and `folds`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: PathBuf,
    #[serde(default)]
    pub schema: CsvSchema,
    /// Applied in order after loading; zscore statistics are frozen from
    /// the training data.
    #[serde(default)]
    pub transforms: Vec<TransformRecord>,
    #[serde(default = "default_p")]
    pub p: usize,
    pub method: String,
    #[serde(default)]
    pub hyper: Hyper,
    /// Defaults to the standard grid for the panel's K.
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub model: PathBuf,
    pub holdout: PathBuf,
    /// A `simulate` output directory; enables Granger accuracy and MSE
    /// relative to the true model. Without it MSE is relative to rw.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    /// Other model directories to test against on the same holdout.
    #[serde(default)]
    pub compare: Vec<PathBuf>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Config object under construction: file contents plus flag overrides.
pub struct Layered {
    map: Map<String, Value>,
    base: PathBuf,
}

impl Layered {
    pub fn load(file: Option<&Path>) -> Result<Self, CliError> {
        let cwd = std::env::current_dir().map_err(|e| CliError::io(Path::new("."), e))?;
        let Some(file) = file else {
            return Ok(Self { map: Map::new(), base: cwd });
        };
        let text = std::fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", file.display())))?;
        let Value::Object(map) = value else {
            return Err(CliError::usage(format!("{}: config must be a JSON object", file.display())));
        };
        let dir = file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Ok(Self { map, base: cwd.join(dir) })
    }

    pub fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.map.insert(key.into(), serde_json::to_value(v).expect("flag values serialize"));
        }
    }

    /// Like [`Layered::set`] for a field of a nested object.
    pub fn set_in<T: Serialize>(&mut self, outer: &str, key: &str, value: Option<T>) {
        if let Some(v) = value {
            let entry = self.map.entry(outer).or_insert_with(|| Value::Object(Map::new()));
            if let Value::Object(m) = entry {
                m.insert(key.into(), serde_json::to_value(v).expect("flag values serialize"));
            }
        }
    }

    /// Sets a path flag, resolved against the working directory.
    pub fn set_path(&mut self, key: &str, value: Option<&Path>) -> Result<(), CliError> {
        if let Some(p) = value {
            let abs = std::path::absolute(p).map_err(|e| CliError::io(p, e))?;
            self.set(key, Some(abs));
        }
        Ok(())
    }

    /// Makes relative paths that came from the config file absolute.
    pub fn resolve_paths(&mut self, keys: &[&str]) {
        let base = self.base.clone();
        let fix = |v: &mut Value| {
            if let Value::String(s) = v {
                let p = Path::new(s.as_str());
                if p.is_relative() {
                    *s = base.join(p).to_string_lossy().into_owned();
                }
            }
        };
        for key in keys {
            match self.map.get_mut(*key) {
                Some(Value::Array(items)) => items.iter_mut().for_each(fix),
                Some(v) => fix(v),
                None => {}
            }
        }
    }

    pub fn finish<T: DeserializeOwned>(self, what: &str) -> Result<T, CliError> {
        serde_json::from_value(Value::Object(self.map))
            .map_err(|e| CliError::usage(format!("{what} config: {e}")))
    }
}
