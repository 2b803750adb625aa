//! Labeled datasets: CSV and WBC loaders, standardization, splits and synthetic data.
//!
//! Labels are stored zero-based; files and reports use `1..=c`.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PscError, Result};
use crate::geometry::OrthonormalFrame;
use crate::model::{Atom, MixingMeasure, ModelState, NoiseScales};
use crate::sampler::TrainingData;
use crate::stats::{sample_categorical, standard_normal};

pub const WBC_FEATURES: [&str; 9] = [
    "clump thickness",
    "uniformity of cell size",
    "uniformity of cell shape",
    "marginal adhesion",
    "single epithelial cell size",
    "bare nuclei",
    "bland chromatin",
    "normal nucleoli",
    "mitosis",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub x: DMatrix<f64>,
    /// Zero-based class index per row.
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Original label text, indexed by class.
    pub class_names: Vec<String>,
    /// Transform already applied to `x`, if any.
    pub transform: Option<Standardization>,
}

impl LabeledDataset {
    pub fn new(x: DMatrix<f64>, labels: Vec<usize>, feature_names: Vec<String>, class_names: Vec<String>) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(PscError::DimensionMismatch {
                expected: x.nrows(),
                actual: labels.len(),
                context: "labels",
            });
        }
        if feature_names.len() != x.ncols() {
            return Err(PscError::DimensionMismatch {
                expected: x.ncols(),
                actual: feature_names.len(),
                context: "feature names",
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(PscError::InvalidLabel {
                label: bad + 1,
                classes: class_names.len(),
            });
        }
        Ok(Self {
            x,
            labels,
            feature_names,
            class_names,
            transform: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            transform: self.transform.clone(),
        }
    }

    pub fn training_data(&self) -> Result<TrainingData> {
        TrainingData::new(self.x.clone(), self.labels.clone(), self.classes())
    }

    pub fn content_hash(&self) -> Result<String> {
        crate::io::sha256_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub has_header: bool,
    /// Label column; defaults to the last column.
    pub label_column: Option<ColumnRef>,
    /// Columns ignored entirely, such as identifiers.
    pub drop_columns: Vec<ColumnRef>,
    /// Cell text marking a missing value; rows containing it are dropped.
    pub missing: Option<String>,
    /// Label text in class order. Unlisted labels are an error. When absent,
    /// the distinct labels are sorted (numerically when they all parse).
    pub classes: Option<Vec<String>>,
    /// Feature names when the file has no header.
    pub feature_names: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            has_header: true,
            label_column: None,
            drop_columns: Vec::new(),
            missing: None,
            classes: None,
            feature_names: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub class_counts: Vec<usize>,
}

fn resolve(col: &ColumnRef, header: Option<&[String]>, width: usize, path: &Path) -> Result<usize> {
    let idx = match col {
        ColumnRef::Index(i) => Some(*i),
        ColumnRef::Name(n) => header.and_then(|h| h.iter().position(|c| c.trim() == n)),
    };
    idx.filter(|&i| i < width).ok_or_else(|| PscError::MalformedRow {
        path: path.to_path_buf(),
        row: 0,
        message: format!("column {col:?} not found"),
    })
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<(LabeledDataset, LoadSummary)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Option<Vec<String>> = if schema.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    let width = header
        .as_ref()
        .map(Vec::len)
        .or_else(|| records.first().map(|r| r.len()))
        .unwrap_or(0);
    let label_col = match &schema.label_column {
        Some(c) => resolve(c, header.as_deref(), width, path)?,
        None if width > 0 => width - 1,
        None => return Err(PscError::EmptyTrainingSet),
    };
    let mut dropped = Vec::new();
    for c in &schema.drop_columns {
        dropped.push(resolve(c, header.as_deref(), width, path)?);
    }
    let features: Vec<usize> = (0..width).filter(|c| *c != label_col && !dropped.contains(c)).collect();
    let feature_names = match (&schema.feature_names, &header) {
        (Some(names), _) => {
            if names.len() != features.len() {
                return Err(PscError::DimensionMismatch {
                    expected: features.len(),
                    actual: names.len(),
                    context: "schema feature names",
                });
            }
            names.clone()
        }
        (None, Some(h)) => features.iter().map(|&c| h[c].clone()).collect(),
        (None, None) => features.iter().map(|c| format!("x{}", c + 1)).collect(),
    };

    let first_row = if schema.has_header { 2 } else { 1 };
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut rows_dropped = 0;
    for (r, rec) in records.iter().enumerate() {
        let row = r + first_row;
        if rec.len() != width {
            return Err(PscError::MalformedRow {
                path: path.to_path_buf(),
                row,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        if let Some(tok) = &schema.missing {
            if features.iter().chain([&label_col]).any(|&c| &rec[c] == tok) {
                rows_dropped += 1;
                continue;
            }
        }
        for &c in &features {
            let v: f64 = rec[c].parse().map_err(|_| PscError::Parse {
                path: path.to_path_buf(),
                row,
                column: c + 1,
                message: format!("not a number: {:?}", &rec[c]),
            })?;
            if !v.is_finite() {
                return Err(PscError::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: c + 1,
                    message: "non-finite value".into(),
                });
            }
            values.push(v);
        }
        raw_labels.push(rec[label_col].to_string());
    }

    let class_names = match &schema.classes {
        Some(c) => c.clone(),
        None => infer_classes(&raw_labels),
    };
    let labels = raw_labels
        .iter()
        .map(|l| class_names.iter().position(|c| c == l).ok_or_else(|| PscError::UnknownLabel(l.clone())))
        .collect::<Result<Vec<_>>>()?;
    let x = DMatrix::from_row_slice(labels.len(), features.len(), &values);
    let data = LabeledDataset::new(x, labels, feature_names, class_names)?;
    let summary = LoadSummary {
        rows_read: records.len(),
        rows_dropped,
        class_counts: data.class_counts(),
    };
    Ok((data, summary))
}

fn infer_classes(raw: &[String]) -> Vec<String> {
    let mut distinct: Vec<String> = raw.to_vec();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(distinct).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        return paired.into_iter().map(|p| p.1).collect();
    }
    distinct
}

/// UCI `breast-cancer-wisconsin.data`: id, nine attributes, class 2 or 4.
/// Rows with `?` are dropped. Class 2 (benign) becomes label 1, class 4 label 2.
pub fn load_wbc(path: &Path) -> Result<(LabeledDataset, LoadSummary)> {
    let schema = CsvSchema {
        has_header: false,
        label_column: Some(ColumnRef::Index(10)),
        drop_columns: vec![ColumnRef::Index(0)],
        missing: Some("?".into()),
        classes: Some(vec!["2".into(), "4".into()]),
        feature_names: Some(WBC_FEATURES.iter().map(|s| s.to_string()).collect()),
    };
    let (data, summary) = load_csv(path, &schema)?;
    if data.dim() != 9 {
        return Err(PscError::MalformedRow {
            path: path.to_path_buf(),
            row: 1,
            message: format!("expected 9 attributes, found {}", data.dim()),
        });
    }
    Ok((data, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Center and scale each feature to unit variance.
    #[default]
    PerFeature,
    /// Center each feature; divide all by one pooled standard deviation.
    Global,
    /// Center only.
    Center,
    /// Leave the data as is.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mode: ScaleMode,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Fit on `x`. Zero-variance features keep scale 1 with a warning.
    pub fn fit(x: &DMatrix<f64>, mode: ScaleMode) -> Self {
        let (n, m) = x.shape();
        let mean: Vec<f64> = (0..m).map(|j| if n > 0 { x.column(j).mean() } else { 0.0 }).collect();
        let var: Vec<f64> = (0..m)
            .map(|j| {
                if n < 2 {
                    return 0.0;
                }
                x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / (n - 1) as f64
            })
            .collect();
        let (center, scale) = match mode {
            ScaleMode::None => (vec![0.0; m], vec![1.0; m]),
            ScaleMode::Center => (mean, vec![1.0; m]),
            ScaleMode::Global => {
                let pooled = (var.iter().sum::<f64>() / m.max(1) as f64).sqrt();
                let s = if pooled > 0.0 { pooled } else { 1.0 };
                (mean, vec![s; m])
            }
            ScaleMode::PerFeature => {
                let scale = var
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        if *v > 0.0 {
                            v.sqrt()
                        } else {
                            warn!("feature {} has zero variance; left unscaled", j + 1);
                            1.0
                        }
                    })
                    .collect();
                (mean, scale)
            }
        };
        Self { mode, center, scale }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.center[j]) / self.scale[j]))
    }

    pub fn invert(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * self.scale[j] + self.center[j]))
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.center.len() {
            return Err(PscError::DimensionMismatch {
                expected: self.center.len(),
                actual: x.ncols(),
                context: "standardization",
            });
        }
        Ok(())
    }
}

/// Fit a transform on `data` and apply it.
pub fn standardize(data: &LabeledDataset, mode: ScaleMode) -> Result<(LabeledDataset, Standardization)> {
    if data.transform.is_some() {
        return Err(PscError::InvalidConfig("dataset is already standardized".into()));
    }
    let t = Standardization::fit(&data.x, mode);
    Ok((apply_standardization(data, &t)?, t))
}

/// Apply an existing (training) transform to another dataset.
pub fn apply_standardization(data: &LabeledDataset, t: &Standardization) -> Result<LabeledDataset> {
    if data.transform.is_some() {
        return Err(PscError::InvalidConfig("dataset is already standardized".into()));
    }
    let mut out = data.clone();
    out.x = t.apply(&data.x)?;
    out.transform = Some(t.clone());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: Option<f64>,
    pub test_count: Option<usize>,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: Some(1.0 / 3.0),
            test_count: None,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    fn test_size(&self, n: usize) -> Result<usize> {
        let size = match (self.test_fraction, self.test_count) {
            (Some(_), Some(_)) => return Err(PscError::InvalidConfig("give test_fraction or test_count, not both".into())),
            (Some(f), None) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(PscError::InvalidConfig(format!("test_fraction must lie in (0, 1), got {f}")));
                }
                (f * n as f64).round() as usize
            }
            (None, Some(c)) => c,
            (None, None) => return Err(PscError::InvalidConfig("split needs test_fraction or test_count".into())),
        };
        if size == 0 || size >= n {
            return Err(PscError::InvalidConfig(format!("test size {size} invalid for {n} rows")));
        }
        Ok(size)
    }
}

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class test quotas by largest remainder (ties to the smaller class).
fn stratified_quotas(counts: &[usize], test: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * test as f64 / n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = test - quotas.iter().sum::<usize>();
    for &c in order.iter().take(short) {
        quotas[c] += 1;
    }
    quotas
}

pub fn split_indices(labels: &[usize], classes: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    let n = labels.len();
    let size = spec.test_size(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut test = Vec::with_capacity(size);
    if spec.stratified {
        let mut by_class = vec![Vec::new(); classes];
        for (i, &y) in labels.iter().enumerate() {
            by_class[y].push(i);
        }
        let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
        let quotas = stratified_quotas(&counts, size);
        for (c, (rows, q)) in by_class.iter_mut().zip(&quotas).enumerate() {
            if !rows.is_empty() && *q >= rows.len() {
                return Err(PscError::Stratification(format!(
                    "class {} has {} rows and would have none left for training",
                    c + 1,
                    rows.len()
                )));
            }
            rows.shuffle(&mut rng);
            test.extend_from_slice(&rows[..*q]);
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..size]);
    }
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    let train = (0..n).filter(|&i| !in_test[i]).collect();
    Ok(SplitIndices { train, test })
}

pub fn split(data: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset, SplitIndices)> {
    let idx = split_indices(&data.labels, data.classes(), spec)?;
    Ok((data.subset(&idx.train), data.subset(&idx.test), idx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticAtom {
    pub weight: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomSpec {
    /// `count` equally weighted atoms on a regular polygon in the first two
    /// subspace coordinates (a line when `k = 1`), adjacent atoms `separation`
    /// apart; class vectors put `purity` on a cycling class.
    Random { count: usize, separation: f64, purity: f64 },
    Fixed(Vec<SyntheticAtom>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub m: usize,
    pub k: usize,
    pub c: usize,
    pub n: usize,
    pub atoms: AtomSpec,
    /// Within-subspace scales, one per direction.
    pub sigma: Vec<f64>,
    pub sigma0: f64,
    /// Frame; a Haar-random one is drawn when absent.
    pub frame: Option<Vec<Vec<f64>>>,
    /// Complement coordinates of the origin; drawn `N(0, 4 I)` when absent.
    pub eta: Option<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticSpec {
    fn truth<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ModelState> {
        let (m, k, c) = (self.m, self.k, self.c);
        if k == 0 || k > m || c == 0 {
            return Err(PscError::InvalidDimension { k, m });
        }
        let frame = match &self.frame {
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != k) {
                    return Err(PscError::DimensionMismatch {
                        expected: m * k,
                        actual: rows.iter().map(Vec::len).sum(),
                        context: "synthetic frame",
                    });
                }
                OrthonormalFrame::new(DMatrix::from_fn(m, k, |i, j| rows[i][j]))?
            }
            None => OrthonormalFrame::random(m, k, rng)?,
        };
        let eta = match &self.eta {
            Some(e) => DVector::from_column_slice(e),
            None => DVector::from_fn(m - k, |_, _| 2.0 * standard_normal(rng)),
        };
        let (weights, atoms) = match &self.atoms {
            AtomSpec::Fixed(list) => {
                let w = DVector::from_iterator(list.len(), list.iter().map(|a| a.weight));
                let atoms = list
                    .iter()
                    .map(|a| Atom::new(DVector::from_column_slice(&a.mu), DVector::from_column_slice(&a.nu)))
                    .collect::<Result<Vec<_>>>()?;
                (w, atoms)
            }
            AtomSpec::Random { count, separation, purity } => {
                let count = (*count).max(1);
                if !(0.0..=1.0).contains(purity) {
                    return Err(PscError::InvalidConfig(format!("purity must lie in [0, 1], got {purity}")));
                }
                let atoms = (0..count)
                    .map(|j| {
                        let mu = polygon_vertex(j, count, *separation, k);
                        let rest = if c > 1 { (1.0 - purity) / (c - 1) as f64 } else { 0.0 };
                        let nu = DVector::from_fn(c, |y, _| if c == 1 { 1.0 } else if y == j % c { *purity } else { rest });
                        Atom::new(mu, nu)
                    })
                    .collect::<Result<Vec<_>>>()?;
                (DVector::from_element(count, 1.0 / count as f64), atoms)
            }
        };
        if atoms.len() > 1 && atoms.windows(2).all(|p| p[0].mu == p[1].mu) {
            warn!("all synthetic atoms share one location; the subspace is not identifiable");
        }
        let scales = NoiseScales::new(self.sigma0, DVector::from_column_slice(&self.sigma))?;
        ModelState::new(frame, eta, scales, MixingMeasure::new(weights, atoms)?)
    }
}

fn polygon_vertex(j: usize, count: usize, separation: f64, k: usize) -> DVector<f64> {
    let mut mu = DVector::zeros(k);
    if count == 1 {
        return mu;
    }
    if k == 1 {
        mu[0] = separation * (j as f64 - (count - 1) as f64 / 2.0);
        return mu;
    }
    let radius = separation / (2.0 * (std::f64::consts::PI / count as f64).sin());
    let angle = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
    mu[0] = radius * angle.cos();
    mu[1] = radius * angle.sin();
    mu
}

/// Draw `n` observations from the generative model at `state`.
/// Returns the data matrix, zero-based labels and atom allocations.
pub fn simulate<R: Rng + ?Sized>(state: &ModelState, n: usize, rng: &mut R) -> (DMatrix<f64>, Vec<usize>, Vec<usize>) {
    let (m, k) = (state.m(), state.k());
    let weights = state.mixing().weights().as_slice().to_vec();
    let u = state.frame().as_matrix();
    let mut x = DMatrix::zeros(n, m);
    let mut labels = Vec::with_capacity(n);
    let mut alloc = Vec::with_capacity(n);
    for i in 0..n {
        let j = sample_categorical(&weights, rng);
        let atom = &state.mixing().atoms()[j];
        let coords = DVector::from_fn(k, |l, _| atom.mu[l] + state.scales().sigma[l] * standard_normal(rng));
        let mut row = u * coords + state.theta();
        if let Some(v) = state.complement() {
            let resid = DVector::from_fn(m - k, |_, _| state.scales().sigma0 * standard_normal(rng));
            row += v.as_matrix() * resid;
        }
        x.set_row(i, &row.transpose());
        labels.push(sample_categorical(atom.nu.as_slice(), rng));
        alloc.push(j);
    }
    (x, labels, alloc)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(LabeledDataset, ModelState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = spec.truth(&mut rng)?;
    if truth.n_classes() != spec.c {
        return Err(PscError::DimensionMismatch {
            expected: spec.c,
            actual: truth.n_classes(),
            context: "synthetic class vectors",
        });
    }
    let (x, labels, _) = simulate(&truth, spec.n, &mut rng);
    let names = (1..=spec.m).map(|i| format!("x{i}")).collect();
    let classes = (1..=spec.c).map(|i| i.to_string()).collect();
    Ok((LabeledDataset::new(x, labels, names, classes)?, truth))
}

/// Count of each distinct label text, for reporting.
pub fn label_histogram(data: &LabeledDataset) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (name, count) in data.class_names.iter().zip(data.class_counts()) {
        out.insert(name.clone(), count);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn small_csv_parses_exactly() {
        let f = write_tmp("a,b,y\n1,2.5,no\n-3,4e1,yes\n0,0,no\n");
        let (d, s) = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(3, 2, &[1.0, 2.5, -3.0, 40.0, 0.0, 0.0]));
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.class_names, vec!["no", "yes"]);
        assert_eq!(d.feature_names, vec!["a", "b"]);
        assert_eq!(s, LoadSummary { rows_read: 3, rows_dropped: 0, class_counts: vec![2, 1] });
    }

    #[test]
    fn numeric_labels_map_in_order() {
        let f = write_tmp("1,4\n2,2\n3,4\n4,10\n");
        let schema = CsvSchema { has_header: false, ..Default::default() };
        let (d, _) = load_csv(f.path(), &schema).unwrap();
        assert_eq!(d.class_names, vec!["2", "4", "10"]);
        assert_eq!(d.labels, vec![1, 0, 1, 2]);
    }

    #[test]
    fn bad_cell_reports_position() {
        let f = write_tmp("a,b,y\n1,2,1\n3,x,2\n");
        match load_csv(f.path(), &CsvSchema::default()) {
            Err(PscError::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let f = write_tmp("a,y\n1,2\n2,3\n");
        let schema = CsvSchema { classes: Some(vec!["2".into(), "4".into()]), ..Default::default() };
        assert!(matches!(load_csv(f.path(), &schema), Err(PscError::UnknownLabel(l)) if l == "3"));
    }

    #[test]
    fn wbc_rows_with_missing_values_dropped() {
        let f = write_tmp("1000025,5,1,1,1,2,1,3,1,1,2\n1057013,8,4,5,1,2,?,7,3,1,4\n1017122,8,10,10,8,7,10,9,7,1,4\n");
        let (d, s) = load_wbc(f.path()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(s.rows_dropped, 1);
        assert_eq!(d.labels, vec![0, 1]);
        assert_eq!(d.feature_names[5], "bare nuclei");
        assert_eq!(d.x.row(1).iter().copied().collect::<Vec<_>>(), vec![8., 10., 10., 8., 7., 10., 9., 7., 1.]);
    }

    #[test]
    fn standardization_round_trip_and_constants() {
        let x = DMatrix::from_row_slice(4, 3, &[1., 5., 2., 2., 5., 4., 3., 5., 9., 4., 5., 1.]);
        for mode in [ScaleMode::PerFeature, ScaleMode::Global, ScaleMode::Center, ScaleMode::None] {
            let t = Standardization::fit(&x, mode);
            let y = t.apply(&x).unwrap();
            assert_relative_eq!(t.invert(&y).unwrap(), x, epsilon = 1e-10);
        }
        let t = Standardization::fit(&x, ScaleMode::PerFeature);
        assert_eq!(t.scale[1], 1.0);
        let y = t.apply(&x).unwrap();
        assert_relative_eq!(y.column(0).variance() * 4.0 / 3.0, 1.0, epsilon = 1e-12);
        let again = Standardization::fit(&y, ScaleMode::PerFeature);
        assert!(again.center.iter().all(|c| c.abs() < 1e-12));
        assert!(again.scale.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn global_scale_is_shared() {
        let x = DMatrix::from_row_slice(3, 2, &[0., 0., 1., 10., 2., 20.]);
        let t = Standardization::fit(&x, ScaleMode::Global);
        assert_eq!(t.scale[0], t.scale[1]);
        assert_relative_eq!(t.scale[0], ((1.0 + 100.0) / 2.0f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn singleton_test_split() {
        let spec = SplitSpec { test_fraction: None, test_count: Some(1), seed: 3, stratified: false };
        let idx = split_indices(&[0, 1, 0, 1, 0], 2, &spec).unwrap();
        assert_eq!(idx.test.len(), 1);
        assert_eq!(idx.train.len(), 4);
    }

    #[test]
    fn stratified_split_matches_enumeration() {
        // 8 rows, classes 5:3, 3 test rows; exact shares 15/8 and 9/8
        let labels = [0, 0, 1, 0, 1, 0, 0, 1];
        let mut admissible = std::collections::BTreeSet::new();
        for mask in 0u32..256 {
            if mask.count_ones() != 3 {
                continue;
            }
            let c0 = (0..8).filter(|&i| mask >> i & 1 == 1 && labels[i] == 0).count();
            let c1 = 3 - c0;
            if (c0 as f64 - 15.0 / 8.0).abs() < 1.0 && (c1 as f64 - 9.0 / 8.0).abs() < 1.0 {
                admissible.insert((c0, c1));
            }
        }
        assert_eq!(admissible.iter().copied().collect::<Vec<_>>(), vec![(1, 2), (2, 1)]);
        for seed in 0..50 {
            let spec = SplitSpec { test_fraction: None, test_count: Some(3), seed, stratified: true };
            let idx = split_indices(&labels, 2, &spec).unwrap();
            let c0 = idx.test.iter().filter(|&&i| labels[i] == 0).count();
            assert!(admissible.contains(&(c0, idx.test.len() - c0)));
            // largest remainder gives the extra row to the class with remainder 7/8
            assert_eq!(c0, 2);
        }
    }

    #[test]
    fn impossible_stratification() {
        // quotas 3.2 -> 3 and 0.8 -> 1 leave class 2 without training rows
        let spec = SplitSpec { test_fraction: None, test_count: Some(4), seed: 0, stratified: true };
        assert!(matches!(split_indices(&[0, 0, 0, 0, 1], 2, &spec), Err(PscError::Stratification(_))));
        let spec = SplitSpec { test_fraction: Some(0.5), test_count: None, seed: 0, stratified: true };
        let bad = SplitSpec { test_fraction: Some(1.0), ..spec };
        assert!(split_indices(&[0, 1, 0, 1], 2, &bad).is_err());
    }

    proptest! {
        #[test]
        fn split_deterministic_disjoint_exhaustive(
            labels in proptest::collection::vec(0usize..3, 6..60),
            seed in any::<u64>(),
            frac in 0.1f64..0.9,
            stratified in any::<bool>(),
        ) {
            let spec = SplitSpec { test_fraction: Some(frac), test_count: None, seed, stratified };
            let a = split_indices(&labels, 3, &spec);
            let b = split_indices(&labels, 3, &spec);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(&a, &b);
                    let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                    if stratified {
                        let n = labels.len() as f64;
                        for c in 0..3 {
                            let nc = labels.iter().filter(|&&y| y == c).count() as f64;
                            let tc = a.test.iter().filter(|&&i| labels[i] == c).count() as f64;
                            prop_assert!((tc - nc * a.test.len() as f64 / n).abs() < 1.0);
                        }
                    }
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "nondeterministic outcome"),
            }
        }
    }

    fn spec(n: usize, sigma0: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            m: 4,
            k: 2,
            c: 2,
            n,
            atoms: AtomSpec::Fixed(vec![
                SyntheticAtom { weight: 0.3, mu: vec![-2.0, 1.0], nu: vec![0.9, 0.1] },
                SyntheticAtom { weight: 0.7, mu: vec![2.0, 0.0], nu: vec![0.2, 0.8] },
            ]),
            sigma: vec![1.0, 0.5],
            sigma0,
            frame: None,
            eta: None,
            seed,
        }
    }

    #[test]
    fn zero_residual_single_atom_lies_on_subspace() {
        let s = SyntheticSpec {
            atoms: AtomSpec::Random { count: 1, separation: 0.0, purity: 1.0 },
            sigma0: 1e-12,
            ..spec(200, 1.0, 1)
        };
        let (d, truth) = generate_synthetic(&s).unwrap();
        let sub = crate::geometry::AffineSubspace::from_frame(truth.frame(), truth.theta().clone()).unwrap();
        for i in 0..d.len() {
            let x = d.x.row(i).transpose();
            assert!((sub.project(&x).unwrap() - &x).norm() < 1e-9);
        }
    }

    #[test]
    fn moments_match_mixture_formula() {
        let (d, truth) = generate_synthetic(&spec(100_000, 0.7, 2)).unwrap();
        let n = d.len() as f64;
        let mean = d.x.row_mean().transpose();
        let w = truth.mixing().weights();
        let atoms = truth.mixing().atoms();
        let mu_bar = atoms.iter().zip(w.iter()).fold(DVector::zeros(2), |a, (at, wj)| a + &at.mu * *wj);
        let between = atoms.iter().zip(w.iter()).fold(DMatrix::zeros(2, 2), |a, (at, wj)| {
            let d = &at.mu - &mu_bar;
            a + &d * d.transpose() * *wj
        });
        let u = truth.frame().as_matrix();
        let expected_mean = u * &mu_bar + truth.theta();
        let expected_cov = crate::model::assemble_covariance(&truth) + u * between * u.transpose();
        let centered = DMatrix::from_fn(d.len(), 4, |i, j| d.x[(i, j)] - mean[j]);
        let cov = centered.tr_mul(&centered) / (n - 1.0);
        assert!((mean - expected_mean).norm() < 0.05);
        assert!((cov - expected_cov).abs().max() < 0.08);
        let freq1 = d.class_counts()[1] as f64 / n;
        let expected = w[0] * atoms[0].nu[1] + w[1] * atoms[1].nu[1];
        assert!((freq1 - expected).abs() < 0.005);
    }

    #[test]
    fn labels_follow_conditional_class_probabilities() {
        // chi-square sanity: bucket rows by predicted P(y=2|x) decile and compare counts
        let (d, truth) = generate_synthetic(&spec(10_000, 0.5, 3)).unwrap();
        let mut buckets = vec![(0.0f64, 0.0f64); 10];
        for i in 0..d.len() {
            let p = crate::model::conditional_class_prob(&truth, &d.x.row(i).transpose()).unwrap()[1];
            let b = ((p * 10.0) as usize).min(9);
            buckets[b].0 += p;
            buckets[b].1 += (d.labels[i] == 1) as u8 as f64;
        }
        let mut chi2 = 0.0;
        let mut dof = 0;
        for (expected, observed) in buckets {
            if expected > 5.0 {
                chi2 += (observed - expected).powi(2) / expected;
                dof += 1;
            }
        }
        // 99.9% quantile of chi-square with 10 dof is 29.6
        assert!(dof > 0 && chi2 < 29.6, "chi2 {chi2} on {dof} buckets");
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = generate_synthetic(&spec(50, 0.5, 9)).unwrap();
        let b = generate_synthetic(&spec(50, 0.5, 9)).unwrap();
        assert_eq!(a.0, b.0);
        let polygon = SyntheticSpec {
            atoms: AtomSpec::Random { count: 4, separation: 6.0, purity: 0.9 },
            ..spec(10, 0.5, 1)
        };
        let (_, truth) = generate_synthetic(&polygon).unwrap();
        let atoms = truth.mixing().atoms();
        for i in 0..4 {
            for j in 0..i {
                assert!((&atoms[i].mu - &atoms[j].mu).norm() >= 6.0 - 1e-9);
            }
        }
    }
}
