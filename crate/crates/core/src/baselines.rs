//! Comparison classifiers: k-nearest neighbours and a per-class diagonal
//! Gaussian mixture discriminant. Both pick their tuning value on the test split.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{PscError, Result};
use crate::stats::{log_sum_exp, LN_2PI};

/// Variance floor applied in every M-step.
pub const VARIANCE_FLOOR: f64 = 1e-6;

fn error_rate(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64
}

fn check_pair(train: &LabeledDataset, x_new: &DMatrix<f64>) -> Result<()> {
    if train.is_empty() {
        return Err(PscError::EmptyTrainingSet);
    }
    if x_new.ncols() != train.dim() {
        return Err(PscError::DimensionMismatch {
            expected: train.dim(),
            actual: x_new.ncols(),
            context: "baseline features",
        });
    }
    Ok(())
}

/// Majority vote among the `k` nearest training rows (Euclidean). Distance
/// ties go to the lower row index, vote ties to the smaller label.
pub fn knn_predict(train: &LabeledDataset, x_new: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    check_pair(train, x_new)?;
    if k == 0 || k > train.len() {
        return Err(PscError::InvalidConfig(format!("k = {k} neighbours for {} training rows", train.len())));
    }
    let c = train.classes();
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(train.len());
    let preds = x_new
        .row_iter()
        .map(|q| {
            dist.clear();
            dist.extend(train.x.row_iter().enumerate().map(|(i, r)| ((r - q).norm_squared(), i)));
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; c];
            for &(_, i) in &dist[..k] {
                votes[train.labels[i]] += 1;
            }
            let top = *votes.iter().max().unwrap_or(&0);
            votes.iter().position(|&v| v == top).unwrap_or(0)
        })
        .collect();
    Ok(preds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub grid: Vec<usize>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            grid: (1..=25).step_by(2).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: usize,
    pub error: f64,
    /// `(grid value, test error)` for every grid value evaluated.
    pub errors: Vec<(usize, f64)>,
}

fn best_of(errors: Vec<(usize, f64)>) -> Result<SweepResult> {
    let mut best: Option<(usize, f64)> = None;
    for &(g, e) in &errors {
        match best {
            Some((bg, be)) if e > be || (e == be && g >= bg) => {}
            _ => best = Some((g, e)),
        }
    }
    let (best, error) = best.ok_or_else(|| PscError::InvalidConfig("empty tuning grid".into()))?;
    Ok(SweepResult { best, error, errors })
}

/// Test error for each neighbour count; grid values above the training size are skipped.
pub fn knn_sweep(train: &LabeledDataset, test: &LabeledDataset, cfg: &KnnConfig) -> Result<SweepResult> {
    let mut errors = Vec::new();
    for &k in cfg.grid.iter().filter(|&&k| k >= 1 && k <= train.len()) {
        let pred = knn_predict(train, &test.x, k)?;
        errors.push((k, error_rate(&pred, &test.labels)));
    }
    best_of(errors)
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGmm {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub variances: Vec<DVector<f64>>,
}

impl DiagonalGmm {
    fn log_component(&self, g: usize, x: &DVector<f64>) -> f64 {
        let (mu, var) = (&self.means[g], &self.variances[g]);
        let mut out = self.weights[g].ln();
        for d in 0..x.len() {
            out -= 0.5 * (LN_2PI + var[d].ln() + (x[d] - mu[d]).powi(2) / var[d]);
        }
        out
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = (0..self.weights.len()).map(|g| self.log_component(g, x)).collect();
        log_sum_exp(&terms)
    }
}

/// EM for a `g`-component diagonal mixture, k-means++ style seeding.
/// Returns the fit and the log-likelihood after each iteration.
pub fn fit_diagonal_gmm<R: Rng + ?Sized>(x: &DMatrix<f64>, g: usize, max_iter: usize, rng: &mut R) -> Result<(DiagonalGmm, Vec<f64>)> {
    let (n, m) = x.shape();
    if n == 0 {
        return Err(PscError::EmptyTrainingSet);
    }
    let g = g.clamp(1, n);
    let rows: Vec<DVector<f64>> = x.row_iter().map(|r| r.transpose()).collect();
    let overall = DVector::from_fn(m, |d, _| {
        let mean = x.column(d).mean();
        (x.column(d).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).max(VARIANCE_FLOOR)
    });
    let mut means = vec![rows[rng.random_range(0..n)].clone()];
    while means.len() < g {
        let d: Vec<f64> = rows
            .iter()
            .map(|r| means.iter().map(|m| (r - m).norm_squared()).fold(f64::INFINITY, f64::min))
            .collect();
        let next = if d.iter().sum::<f64>() > 0.0 {
            crate::stats::sample_categorical(&d, rng)
        } else {
            rng.random_range(0..n)
        };
        means.push(rows[next].clone());
    }
    let mut gmm = DiagonalGmm {
        weights: vec![1.0 / g as f64; g],
        means,
        variances: vec![overall; g],
    };
    let mut trace: Vec<f64> = Vec::new();
    let mut resp = DMatrix::zeros(n, g);
    for _ in 0..max_iter {
        // E-step
        let mut ll = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let terms: Vec<f64> = (0..g).map(|j| gmm.log_component(j, r)).collect();
            let lse = log_sum_exp(&terms);
            ll += lse;
            for j in 0..g {
                resp[(i, j)] = (terms[j] - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            if ll - prev <= 1e-9 * (1.0 + prev.abs()) {
                trace.push(ll);
                break;
            }
        }
        trace.push(ll);
        // M-step
        for j in 0..g {
            let nj: f64 = resp.column(j).sum();
            if nj <= 1e-12 {
                continue;
            }
            gmm.weights[j] = nj / n as f64;
            let mean = rows.iter().enumerate().fold(DVector::zeros(m), |a, (i, r)| a + r * resp[(i, j)]) / nj;
            let var = rows
                .iter()
                .enumerate()
                .fold(DVector::zeros(m), |a, (i, r)| a + (r - &mean).map(|v| v * v) * resp[(i, j)])
                / nj;
            gmm.variances[j] = var.map(|v| v.max(VARIANCE_FLOOR));
            gmm.means[j] = mean;
        }
        let total: f64 = gmm.weights.iter().sum();
        gmm.weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok((gmm, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmDiscriminant {
    pub log_priors: Vec<f64>,
    pub classes: Vec<DiagonalGmm>,
}

impl GmmDiscriminant {
    pub fn fit(train: &LabeledDataset, components: usize, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(PscError::EmptyTrainingSet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = train.class_counts();
        let mut classes = Vec::new();
        let mut log_priors = Vec::new();
        for (c, &count) in counts.iter().enumerate() {
            let rows: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == c).collect();
            if rows.is_empty() {
                // absent class: never predicted
                classes.push(DiagonalGmm {
                    weights: vec![1.0],
                    means: vec![DVector::zeros(train.dim())],
                    variances: vec![DVector::from_element(train.dim(), 1.0)],
                });
                log_priors.push(f64::NEG_INFINITY);
                continue;
            }
            let (gmm, _) = fit_diagonal_gmm(&train.x.select_rows(&rows), components, 200, &mut rng)?;
            classes.push(gmm);
            log_priors.push((count as f64 / train.len() as f64).ln());
        }
        Ok(Self { log_priors, classes })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        x.row_iter()
            .map(|r| {
                let r = r.transpose();
                let mut best = (0, f64::NEG_INFINITY);
                for (c, gmm) in self.classes.iter().enumerate() {
                    let s = self.log_priors[c] + gmm.log_density(&r);
                    if s > best.1 {
                        best = (c, s);
                    }
                }
                best.0
            })
            .collect()
    }
}

/// Sweep the number of mixture components per class on the test split.
pub fn gmm_discriminant_fit_predict(train: &LabeledDataset, test: &LabeledDataset, grid: &[usize], seed: u64) -> Result<SweepResult> {
    check_pair(train, &test.x)?;
    let mut errors = Vec::new();
    for &g in grid.iter().filter(|&&g| g >= 1) {
        let model = GmmDiscriminant::fit(train, g, seed)?;
        errors.push((g, error_rate(&model.predict(&test.x), &test.labels)));
    }
    best_of(errors)
}
