//! Bayes point estimate of the principal subspace under the loss
//! `||R1 - R2||_F^2 + ||theta1 - theta2||^2`, and per-feature importance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PscError, Result};
use crate::geometry::AffineSubspace;
use crate::sampler::PosteriorChain;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceEstimate {
    pub r_hat: DMatrix<f64>,
    pub theta_hat: DVector<f64>,
    pub k_hat: usize,
    /// Eigenvalues of `2 R_bar - theta_bar theta_bar'`, descending.
    pub eigenvalues: DVector<f64>,
    /// Eigenvectors matching `eigenvalues`, one per column.
    pub eigenvectors: DMatrix<f64>,
    /// `k - sum_{j<=k} lambda_j` for `k = 0..=m`.
    pub objective: Vec<f64>,
    pub unique: bool,
}

impl SubspaceEstimate {
    pub fn subspace(&self) -> Result<AffineSubspace> {
        AffineSubspace::new(self.r_hat.clone(), self.theta_hat.clone())
    }

    /// The first `k_hat` eigenvectors, an `m x k_hat` loading matrix.
    pub fn loadings(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.k_hat).into_owned()
    }
}

/// Mean of `UU'` and of `theta` over the draws.
pub fn posterior_means(chain: &PosteriorChain) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let first = chain.draws.first().ok_or(PscError::EmptyChain)?;
    let m = first.m();
    let mut r = DMatrix::zeros(m, m);
    let mut theta = DVector::zeros(m);
    for d in &chain.draws {
        if d.m() != m {
            return Err(PscError::MixedDimension(m, d.m()));
        }
        if d.k() != first.k() {
            return Err(PscError::InvalidConfig(format!(
                "chain mixes subspace dimensions {} and {}",
                first.k(),
                d.k()
            )));
        }
        let u = d.frame().as_matrix();
        r += u * u.transpose();
        theta += d.theta();
    }
    let n = chain.draws.len() as f64;
    r /= n;
    r = (&r + r.transpose()) * 0.5;
    Ok((r, theta / n))
}

pub fn estimate_subspace(r_bar: &DMatrix<f64>, theta_bar: &DVector<f64>) -> Result<SubspaceEstimate> {
    let m = r_bar.nrows();
    if r_bar.ncols() != m || theta_bar.len() != m {
        return Err(PscError::DimensionMismatch {
            expected: m,
            actual: theta_bar.len(),
            context: "posterior mean origin",
        });
    }
    let mut target = r_bar * 2.0 - theta_bar * theta_bar.transpose();
    target = (&target + target.transpose()) * 0.5;
    let eig = target.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = DVector::from_iterator(m, order.iter().map(|&j| eig.eigenvalues[j]));
    let mut eigenvectors = DMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // deterministic sign: largest-magnitude entry positive
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col = -col;
        }
        eigenvectors.set_column(dst, &col);
    }

    let mut objective = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    objective.push(0.0);
    for j in 0..m {
        acc += eigenvalues[j];
        objective.push((j + 1) as f64 - acc);
    }
    let best = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let k_hat = objective.iter().position(|&v| v <= best + TIE_TOL).unwrap_or(0);
    let minimizers = objective.iter().filter(|&&v| v <= best + TIE_TOL).count();
    let gap_ok = k_hat == 0 || k_hat == m || eigenvalues[k_hat - 1] > eigenvalues[k_hat] + TIE_TOL;
    let unique = minimizers == 1 && gap_ok;

    let basis = eigenvectors.columns(0, k_hat);
    let r_hat = &basis * basis.transpose();
    let theta_hat = theta_bar - &r_hat * theta_bar;
    Ok(SubspaceEstimate {
        r_hat,
        theta_hat,
        k_hat,
        eigenvalues,
        eigenvectors,
        objective,
        unique,
    })
}

/// `||R1 - R2||_F^2 + ||theta1 - theta2||^2`.
pub fn loss(a: &AffineSubspace, b: &AffineSubspace) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(PscError::DimensionMismatch {
            expected: a.ambient_dim(),
            actual: b.ambient_dim(),
            context: "subspace loss",
        });
    }
    Ok((a.projection() - b.projection()).norm_squared() + (a.origin() - b.origin()).norm_squared())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub names: Vec<String>,
    /// Diagonal of `R_hat`.
    pub scores: Vec<f64>,
    /// Euclidean row norms of the loadings; `norms[i]^2 = scores[i]`.
    pub norms: Vec<f64>,
    /// Row `i` holds feature `i`'s loadings on the `k_hat` directions.
    pub loadings: Vec<Vec<f64>>,
}

impl FeatureImportance {
    /// Feature indices by descending score, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    pub fn top(&self, n: usize) -> Vec<&str> {
        self.ranking().into_iter().take(n).map(|i| self.names[i].as_str()).collect()
    }
}

pub fn feature_importance(est: &SubspaceEstimate, names: &[String]) -> Result<FeatureImportance> {
    let m = est.r_hat.nrows();
    if names.len() != m {
        return Err(PscError::DimensionMismatch {
            expected: m,
            actual: names.len(),
            context: "feature names",
        });
    }
    let load = est.loadings();
    let scores: Vec<f64> = (0..m).map(|i| est.r_hat[(i, i)]).collect();
    Ok(FeatureImportance {
        names: names.to_vec(),
        norms: (0..m).map(|i| load.row(i).norm()).collect(),
        loadings: (0..m).map(|i| load.row(i).iter().copied().collect()).collect(),
        scores,
    })
}
