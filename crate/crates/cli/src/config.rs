use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use psc_core::data::{load_csv, load_wbc, CsvSchema, LoadSummary};
use psc_core::{LabeledDataset, PriorConfig, SamplerConfig, ScaleMode, SplitSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// UCI breast-cancer-wisconsin.data layout.
    Wbc { path: PathBuf },
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
}

impl DatasetConfig {
    pub fn path(&self) -> &Path {
        match self {
            Self::Wbc { path } | Self::Csv { path, .. } => path,
        }
    }

    fn path_mut(&mut self) -> &mut PathBuf {
        match self {
            Self::Wbc { path } | Self::Csv { path, .. } => path,
        }
    }

    pub fn load(&self) -> Result<(LabeledDataset, LoadSummary)> {
        let loaded = match self {
            Self::Wbc { path } => load_wbc(path),
            Self::Csv { path, schema } => load_csv(path, schema),
        };
        loaded.with_context(|| format!("loading dataset {}", self.path().display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub knn_grid: Vec<usize>,
    pub gmm_grid: Vec<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            knn_grid: psc_core::baselines::KnnConfig::default().grid,
            gmm_grid: vec![1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub scale: ScaleMode,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Subspace dimensions to fit; all of `1..m` when absent.
    #[serde(default)]
    pub k_grid: Option<Vec<usize>>,
    /// Largest `k` eligible for selection.
    #[serde(default)]
    pub k_max: Option<usize>,
    /// Class name scored as positive for ROC; the last class when absent.
    #[serde(default)]
    pub positive_class: Option<String>,
    #[serde(default)]
    pub baselines: BaselineConfig,
}

impl RunConfig {
    /// Parse a config file, resolving the dataset path against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let data = cfg.dataset.path_mut();
        if data.is_relative() {
            *data = base.join(&*data);
        }
        Ok(cfg)
    }

    /// Seed override applies to both the split and the sampler.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.split.seed = s;
            self.sampler.seed = s;
        }
        self
    }

    pub fn with_k(mut self, k: Option<usize>) -> Self {
        if let Some(k) = k {
            self.k_grid = Some(vec![k]);
        }
        self
    }

    pub fn k_values(&self, m: usize) -> Result<Vec<usize>> {
        let mut ks = self.k_grid.clone().unwrap_or_else(|| (1..m).collect());
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() {
            bail!("k_grid is empty");
        }
        if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > m) {
            bail!("k_grid entry {bad} outside 1..={m}");
        }
        Ok(ks)
    }

    pub fn positive_index(&self, data: &LabeledDataset) -> Result<usize> {
        match &self.positive_class {
            None => Ok(data.classes() - 1),
            Some(name) => data
                .class_names
                .iter()
                .position(|c| c == name)
                .with_context(|| format!("positive_class {name:?} is not one of {:?}", data.class_names)),
        }
    }

    pub fn validate(&self, data: &LabeledDataset) -> Result<()> {
        self.sampler.validate()?;
        self.prior.validate(data.classes())?;
        self.k_values(data.dim())?;
        self.positive_index(data)?;
        if self.baselines.knn_grid.is_empty() || self.baselines.gmm_grid.is_empty() {
            bail!("baseline grids must be non-empty");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"dataset": {"format": "wbc", "path": "a.data"}}"#).unwrap();
        assert_eq!(cfg.scale, ScaleMode::PerFeature);
        assert_eq!(cfg.sampler, SamplerConfig::default());
        assert_eq!(cfg.k_values(9).unwrap(), (1..9).collect::<Vec<_>>());
    }

    #[test]
    fn unknown_field_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, "{\n  \"dataset\": {\"format\": \"wbc\", \"path\": \"a\"},\n  \"sampler\": {\"iters\": 5}\n}").unwrap();
        let err = RunConfig::from_file(&p).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("iters"), "{err}");
    }

    #[test]
    fn relative_dataset_path_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"dataset": {"format": "csv", "path": "d.csv"}}"#).unwrap();
        let cfg = RunConfig::from_file(&p).unwrap();
        assert_eq!(cfg.dataset.path(), dir.path().join("d.csv"));
    }

    #[test]
    fn bad_k_grid() {
        let mut cfg: RunConfig = serde_json::from_str(r#"{"dataset": {"format": "wbc", "path": "a"}, "k_grid": [0, 2]}"#).unwrap();
        assert!(cfg.k_values(3).is_err());
        cfg.k_grid = Some(vec![4]);
        assert!(cfg.k_values(3).is_err());
        cfg = cfg.with_k(Some(2));
        assert_eq!(cfg.k_values(3).unwrap(), vec![2]);
    }
}
