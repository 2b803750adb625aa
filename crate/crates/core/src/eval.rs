//! Posterior-predictive classification, error rate, ROC/AUC and choice of `k`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Standardization};
use crate::error::{PscError, Result};
use crate::model::conditional_class_prob;
use crate::sampler::PosteriorChain;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveResult {
    /// `n x c` posterior-predictive class probabilities.
    pub probs: DMatrix<f64>,
    /// Zero-based argmax per row, ties to the smaller class.
    pub predicted: Vec<usize>,
    pub draws: usize,
}

fn argmax(row: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Average `P(y | x, Theta_d)` over the chain's draws.
pub fn posterior_predict(chain: &PosteriorChain, x: &DMatrix<f64>) -> Result<PredictiveResult> {
    let first = chain.draws.first().ok_or(PscError::EmptyChain)?;
    let (m, c) = (first.m(), first.n_classes());
    if x.ncols() != m {
        return Err(PscError::DimensionMismatch {
            expected: m,
            actual: x.ncols(),
            context: "prediction features",
        });
    }
    let mut probs = DMatrix::zeros(x.nrows(), c);
    for i in 0..x.nrows() {
        let xi = x.row(i).transpose();
        for d in &chain.draws {
            let p = conditional_class_prob(d, &xi)?;
            for y in 0..c {
                probs[(i, y)] += p[y];
            }
        }
    }
    probs /= chain.draws.len() as f64;
    let predicted = (0..x.nrows()).map(|i| argmax(probs.row(i).iter().copied())).collect();
    Ok(PredictiveResult {
        probs,
        predicted,
        draws: chain.draws.len(),
    })
}

/// Predict for a dataset, checking it carries the transform the chain was fit under.
pub fn posterior_predict_dataset(
    chain: &PosteriorChain,
    data: &LabeledDataset,
    training_transform: Option<&Standardization>,
) -> Result<PredictiveResult> {
    if data.transform.as_ref() != training_transform {
        return Err(PscError::Unstandardized(match training_transform {
            Some(t) => format!("expected the training transform ({:?} scaling)", t.mode),
            None => "chain was fit on untransformed data".into(),
        }));
    }
    posterior_predict(chain, &data.x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub error_rate: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`; empty unless binary.
    pub roc: Vec<(f64, f64)>,
    /// Trapezoidal area under `roc`; `None` unless binary with both classes present.
    pub auc: Option<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn auc(&self) -> Result<f64> {
        self.auc.ok_or(PscError::BinaryOnly(self.confusion.len()))
    }

    pub fn auc_minus_error(&self) -> Option<f64> {
        self.auc.map(|a| a - self.error_rate)
    }
}

/// ROC curve from scores, sweeping thresholds over the sorted distinct scores.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Vec<(f64, f64)> {
    let p = positive.iter().filter(|&&b| b).count() as f64;
    let q = positive.len() as f64 - p;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((if q > 0.0 { fp / q } else { 0.0 }, if p > 0.0 { tp / p } else { 0.0 }));
    }
    points
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5).sum()
}

/// Error rate, confusion matrix and, for two classes, ROC/AUC on the score of
/// `positive` (zero-based; class 2 is `1`).
pub fn evaluate(pred: &PredictiveResult, y_true: &[usize], positive: usize) -> Result<EvalReport> {
    let c = pred.probs.ncols();
    if y_true.len() != pred.predicted.len() {
        return Err(PscError::DimensionMismatch {
            expected: pred.predicted.len(),
            actual: y_true.len(),
            context: "evaluation labels",
        });
    }
    if let Some(&bad) = y_true.iter().find(|&&y| y >= c) {
        return Err(PscError::InvalidLabel { label: bad + 1, classes: c });
    }
    let mut confusion = vec![vec![0usize; c]; c];
    for (&y, &p) in y_true.iter().zip(&pred.predicted) {
        confusion[y][p] += 1;
    }
    let wrong = y_true.iter().zip(&pred.predicted).filter(|(a, b)| a != b).count();
    let error_rate = if y_true.is_empty() { 0.0 } else { wrong as f64 / y_true.len() as f64 };
    let (roc, auc) = if c == 2 && positive < 2 {
        let scores: Vec<f64> = pred.probs.column(positive).iter().copied().collect();
        let pos: Vec<bool> = y_true.iter().map(|&y| y == positive).collect();
        let both = pos.iter().any(|&b| b) && pos.iter().any(|&b| !b);
        let roc = roc_curve(&scores, &pos);
        let auc = both.then(|| trapezoid_area(&roc));
        (roc, auc)
    } else {
        (Vec::new(), None)
    };
    Ok(EvalReport {
        error_rate,
        roc,
        auc,
        confusion,
    })
}

/// `argmax_k (AUC_k - error_k)` over `k <= k_max`, ties to the smaller `k`.
/// Falls back to `argmin_k error_k` when any candidate lacks an AUC.
pub fn select_k(reports: &[(usize, EvalReport)], k_max: usize) -> Result<usize> {
    let eligible: Vec<&(usize, EvalReport)> = reports.iter().filter(|(k, _)| *k <= k_max).collect();
    if eligible.is_empty() {
        return Err(PscError::InvalidConfig(format!("no candidate k at most {k_max}")));
    }
    let use_auc = eligible.iter().all(|(_, r)| r.auc.is_some());
    let score = |r: &EvalReport| if use_auc { r.auc_minus_error().unwrap_or(f64::NEG_INFINITY) } else { -r.error_rate };
    let mut sorted = eligible;
    sorted.sort_by_key(|(k, _)| *k);
    let mut best = sorted[0];
    for cand in &sorted[1..] {
        if score(&cand.1) > score(&best.1) {
            best = cand;
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLine {
    pub method: String,
    pub k: usize,
    pub error_rate: f64,
    pub auc: Option<f64>,
    pub auc_minus_error: Option<f64>,
}

impl MetricsLine {
    pub fn new(method: &str, k: usize, report: &EvalReport) -> Self {
        Self {
            method: method.to_string(),
            k,
            error_rate: report.error_rate,
            auc: report.auc,
            auc_minus_error: report.auc_minus_error(),
        }
    }
}

pub fn write_eval_metrics(path: &Path, lines: &[MetricsLine]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for l in lines {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eval_metrics(path: &Path) -> Result<Vec<MetricsLine>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

pub fn write_roc(path: &Path, roc: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fpr", "tpr"])?;
    for (f, t) in roc {
        w.write_record([f.to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
