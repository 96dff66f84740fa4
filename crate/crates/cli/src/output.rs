//! Output directory bookkeeping: every file a run writes is tracked so a
//! failed run can remove what it produced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub struct OutDir {
    root: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        let created_root = !root.exists();
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), created_root, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.root.join(name);
        self.written.push(path.clone());
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(leadvar::Error::from)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn files(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }

    /// Removes everything this run wrote, and the directory if the run made it.
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

/// Record of one run: enough to repeat it exactly with `replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration (flags merged, paths absolute).
    pub config: serde_json::Value,
    /// Conventions that affect the numbers.
    pub decisions: Vec<String>,
    pub outputs: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn decisions() -> Vec<String> {
    [
        "lambda is per observation: structured fits and lg/glg penalize the summed loss with n_rows * lambda",
        "cv: contiguous blocked folds; lambda paths warm-started (descending for lg/glg, ascending for scvar/mcvar)",
        "cv ties within 1e-12: larger lambda, then smaller kappa, then smaller rank",
        "edge l->k iff block norm > 1e-6 * (1 + ||W||_F) / K",
        "paired one-sided t-test per holdout time point on the across-series mean squared error",
        "mcvar: uniform start; coincident atoms are split by a deterministic k-means seed of G",
    ]
    .map(String::from)
    .to_vec()
}
