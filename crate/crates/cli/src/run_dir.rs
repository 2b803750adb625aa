//! Layout of a run directory and checked access to its artifacts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn metadata(&self) -> PathBuf {
        self.root.join("metadata.json")
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }
    pub fn transform(&self) -> PathBuf {
        self.root.join("transform.json")
    }
    pub fn chains(&self) -> PathBuf {
        self.root.join("chains")
    }
    pub fn chain(&self, k: usize) -> PathBuf {
        self.chains().join(format!("k={k}.jsonl"))
    }
    pub fn trace(&self, k: usize) -> PathBuf {
        self.chains().join(format!("k={k}.trace.csv"))
    }
    pub fn diagnostics(&self, k: usize) -> PathBuf {
        self.chains().join(format!("k={k}.diagnostics.json"))
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn roc(&self, k: usize) -> PathBuf {
        self.root.join("roc").join(format!("k={k}.csv"))
    }
    pub fn selection(&self) -> PathBuf {
        self.root.join("selection.json")
    }
    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.csv")
    }
    pub fn estimate_dir(&self) -> PathBuf {
        self.root.join("estimate")
    }
    pub fn subspace(&self) -> PathBuf {
        self.estimate_dir().join("subspace.csv")
    }
    pub fn importance(&self) -> PathBuf {
        self.estimate_dir().join("importance.csv")
    }
    pub fn estimate_json(&self) -> PathBuf {
        self.estimate_dir().join("estimate.json")
    }
    pub fn baselines(&self) -> PathBuf {
        self.root.join("baselines.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    /// Fail with the artifact and the command that produces it.
    pub fn require(&self, path: &Path, producer: &str) -> Result<()> {
        if !path.exists() {
            bail!(
                "missing {} in run directory {}; run `psc {producer}` first",
                path.strip_prefix(&self.root).unwrap_or(path).display(),
                self.root.display()
            );
        }
        Ok(())
    }

    pub fn read<T: DeserializeOwned>(&self, path: &Path, producer: &str) -> Result<T> {
        self.require(path, producer)?;
        psc_core::io::read_json(path).with_context(|| format!("reading {}", path.display()))
    }
}
