//! Joint density model for predictors and class labels.
//!
//! The predictor `x` is split into isometric coordinates `U'x` on the
//! principal subspace, which carry a Gaussian location mixture coupled to a
//! multinomial class kernel, and complement coordinates `V'(x - theta)`,
//! which are isotropic Gaussian noise with variance `sigma0^2`. Densities are
//! always evaluated in this factorized form; the `m x m` covariance is only
//! assembled on request.

use nalgebra::{DMatrix, DVector};

use crate::error::{PscError, Result};
use crate::geometry::OrthonormalFrame;
use crate::stats::{ln_isotropic_normal, log_sum_exp, softmax_in_place, LN_2PI};

pub const SIMPLEX_TOL: f64 = 1e-12;

/// Mixture atom: kernel location `mu` (subspace coordinates) and class
/// probabilities `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub mu: DVector<f64>,
    pub nu: DVector<f64>,
}

impl Atom {
    pub fn new(mu: DVector<f64>, nu: DVector<f64>) -> Result<Self> {
        if mu.iter().chain(nu.iter()).any(|v| !v.is_finite()) {
            return Err(PscError::NonFinite("atom"));
        }
        if nu.iter().any(|&p| p < 0.0) || (nu.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(PscError::InvalidConfig(format!(
                "class probabilities must lie on the simplex (sum = {})",
                nu.sum()
            )));
        }
        Ok(Self { mu, nu })
    }
}

/// Truncated stick-breaking representation of the mixing measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMeasure {
    weights: DVector<f64>,
    atoms: Vec<Atom>,
}

impl MixingMeasure {
    pub fn new(weights: DVector<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if weights.is_empty() || weights.len() != atoms.len() {
            return Err(PscError::DimensionMismatch {
                expected: atoms.len(),
                actual: weights.len(),
                context: "mixture weights",
            });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(PscError::InvalidConfig(format!(
                "mixture weights must be nonnegative and sum to one (sum = {})",
                weights.sum()
            )));
        }
        let (k, c) = (atoms[0].mu.len(), atoms[0].nu.len());
        for a in &atoms {
            if a.mu.len() != k || a.nu.len() != c {
                return Err(PscError::InvalidConfig("atoms have inconsistent dimensions".into()));
            }
        }
        Ok(Self { weights, atoms })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    pub fn n_classes(&self) -> usize {
        self.atoms[0].nu.len()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].mu.len()
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut [Atom] {
        &mut self.atoms
    }

    pub(crate) fn set_weights(&mut self, weights: DVector<f64>) {
        debug_assert_eq!(weights.len(), self.atoms.len());
        self.weights = weights;
    }
}

/// Residual scale `sigma0` and per-direction subspace scales `sigma_1..sigma_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScales {
    pub sigma0: f64,
    pub sigma: DVector<f64>,
}

impl NoiseScales {
    pub fn new(sigma0: f64, sigma: DVector<f64>) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) || sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(PscError::InvalidConfig("noise scales must be positive and finite".into()));
        }
        Ok(Self { sigma0, sigma })
    }
}

/// One full parameter draw `(k, U, theta, scales, P)`.
///
/// `theta` is carried through its complement coordinates `eta`
/// (`theta = V(U) eta`), so `U'theta = 0` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    frame: OrthonormalFrame,
    complement: Option<OrthonormalFrame>,
    eta: DVector<f64>,
    theta: DVector<f64>,
    scales: NoiseScales,
    mixing: MixingMeasure,
}

impl ModelState {
    pub fn new(
        frame: OrthonormalFrame,
        eta: DVector<f64>,
        scales: NoiseScales,
        mixing: MixingMeasure,
    ) -> Result<Self> {
        let (m, k) = (frame.ambient_dim(), frame.dim());
        let complement = if k < m { Some(frame.complement()?) } else { None };
        if eta.len() != m - k {
            return Err(PscError::DimensionMismatch {
                expected: m - k,
                actual: eta.len(),
                context: "origin complement coordinates",
            });
        }
        let theta = match &complement {
            Some(v) => v.as_matrix() * &eta,
            None => DVector::zeros(m),
        };
        let state = Self {
            frame,
            complement,
            eta,
            theta,
            scales,
            mixing,
        };
        state.check_shapes()?;
        Ok(state)
    }

    /// Build from an explicit origin; `eta = V'theta`, and `theta` is kept
    /// verbatim (it must already be orthogonal to `U`).
    pub fn from_theta(
        frame: OrthonormalFrame,
        theta: DVector<f64>,
        scales: NoiseScales,
        mixing: MixingMeasure,
    ) -> Result<Self> {
        let (m, k) = (frame.ambient_dim(), frame.dim());
        if theta.len() != m {
            return Err(PscError::DimensionMismatch {
                expected: m,
                actual: theta.len(),
                context: "origin",
            });
        }
        if frame.coordinates(&theta).norm() > 1e-10 * (1.0 + theta.norm()) {
            return Err(PscError::InvalidConfig("origin is not orthogonal to the frame".into()));
        }
        let complement = if k < m { Some(frame.complement()?) } else { None };
        let eta = match &complement {
            Some(v) => v.as_matrix().tr_mul(&theta),
            None => DVector::zeros(0),
        };
        let state = Self {
            frame,
            complement,
            eta,
            theta,
            scales,
            mixing,
        };
        state.check_shapes()?;
        Ok(state)
    }

    fn check_shapes(&self) -> Result<()> {
        let k = self.k();
        if self.scales.sigma.len() != k {
            return Err(PscError::DimensionMismatch {
                expected: k,
                actual: self.scales.sigma.len(),
                context: "subspace scales",
            });
        }
        if self.mixing.dim() != k {
            return Err(PscError::DimensionMismatch {
                expected: k,
                actual: self.mixing.dim(),
                context: "atom locations",
            });
        }
        Ok(())
    }

    /// Replace the frame, holding `eta` fixed (`theta` follows the new complement).
    pub fn with_frame(&self, frame: OrthonormalFrame) -> Result<Self> {
        Self::new(frame, self.eta.clone(), self.scales.clone(), self.mixing.clone())
    }

    pub fn m(&self) -> usize {
        self.frame.ambient_dim()
    }

    pub fn k(&self) -> usize {
        self.frame.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.mixing.n_classes()
    }

    pub fn frame(&self) -> &OrthonormalFrame {
        &self.frame
    }

    pub fn complement(&self) -> Option<&OrthonormalFrame> {
        self.complement.as_ref()
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn scales(&self) -> &NoiseScales {
        &self.scales
    }

    pub fn mixing(&self) -> &MixingMeasure {
        &self.mixing
    }

    pub(crate) fn mixing_mut(&mut self) -> &mut MixingMeasure {
        &mut self.mixing
    }

    pub(crate) fn set_scales(&mut self, scales: NoiseScales) {
        self.scales = scales;
    }

    pub(crate) fn set_eta(&mut self, eta: DVector<f64>) {
        self.theta = match &self.complement {
            Some(v) => v.as_matrix() * &eta,
            None => DVector::zeros(self.m()),
        };
        self.eta = eta;
    }

    /// Check every state invariant: orthonormal frame, `U'theta = 0`,
    /// `theta = V eta`, simplex weights and class vectors, positive scales.
    pub fn validate(&self) -> Result<()> {
        let drift = self.frame.drift();
        if drift > 1e-10 {
            return Err(PscError::NotOrthonormal { drift });
        }
        if self.frame.coordinates(&self.theta).norm() > 1e-10 {
            return Err(PscError::InvalidConfig("U'theta != 0".into()));
        }
        if let Some(v) = &self.complement {
            if (v.as_matrix() * &self.eta - &self.theta).norm() > 1e-10 {
                return Err(PscError::InvalidConfig("theta != V eta".into()));
            }
        }
        MixingMeasure::new(self.mixing.weights.clone(), self.mixing.atoms.clone())?;
        for a in &self.mixing.atoms {
            Atom::new(a.mu.clone(), a.nu.clone())?;
        }
        NoiseScales::new(self.scales.sigma0, self.scales.sigma.clone())?;
        Ok(())
    }

    /// `log w_j + log N_k(s; mu_j, Sigma_1)` for every atom, given `s = U'x`.
    pub(crate) fn log_location_terms(&self, s: &DVector<f64>, out: &mut Vec<f64>) {
        out.clear();
        let var = self.scales.sigma.map(|v| v * v);
        let log_norm: f64 = -0.5 * var.iter().map(|v| LN_2PI + v.ln()).sum::<f64>();
        for (w, atom) in self.mixing.weights.iter().zip(&self.mixing.atoms) {
            let quad: f64 = s
                .iter()
                .zip(atom.mu.iter())
                .zip(var.iter())
                .map(|((si, mi), vi)| (si - mi) * (si - mi) / vi)
                .sum();
            out.push(w.ln() + log_norm - 0.5 * quad);
        }
    }

    /// `log N_{m-k}(V'x - eta; 0, sigma0^2 I)`; zero when `k = m`.
    pub(crate) fn log_residual_term(&self, x: &DVector<f64>) -> f64 {
        match &self.complement {
            Some(v) => {
                let r = v.as_matrix().tr_mul(x) - &self.eta;
                ln_isotropic_normal(r.len(), r.norm_squared(), self.scales.sigma0.powi(2))
            }
            None => 0.0,
        }
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.m() {
            return Err(PscError::DimensionMismatch {
                expected: self.m(),
                actual: x.len(),
                context: "predictor",
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PscError::NonFinite("predictor"));
        }
        Ok(())
    }
}

/// `Sigma = U (Sigma_1 - sigma0^2 I_k) U' + sigma0^2 I_m`.
pub fn assemble_covariance(state: &ModelState) -> DMatrix<f64> {
    let m = state.m();
    let s0 = state.scales.sigma0.powi(2);
    let inner = DMatrix::from_diagonal(&state.scales.sigma.map(|s| s * s - s0));
    let u = state.frame.as_matrix();
    let sigma = u * inner * u.transpose() + DMatrix::identity(m, m) * s0;
    (&sigma + sigma.transpose()) * 0.5
}

/// Log marginal density of a predictor, `log sum_j w_j N_m(x; U mu_j + theta, Sigma)`,
/// evaluated through the subspace/complement factorization.
pub fn log_marginal_density_x(state: &ModelState, x: &DVector<f64>) -> Result<f64> {
    state.check_point(x)?;
    let s = state.frame.coordinates(x);
    let mut terms = Vec::with_capacity(state.mixing.truncation());
    state.log_location_terms(&s, &mut terms);
    Ok(log_sum_exp(&terms) + state.log_residual_term(x))
}

/// Posterior class probabilities `P(Y = y | X = x)`.
///
/// The atom responsibilities depend on `x` only through `U'x`. If every
/// responsibility underflows even in log space the prior weights are used.
pub fn conditional_class_prob(state: &ModelState, x: &DVector<f64>) -> Result<DVector<f64>> {
    state.check_point(x)?;
    let s = state.frame.coordinates(x);
    let mut resp = Vec::with_capacity(state.mixing.truncation());
    state.log_location_terms(&s, &mut resp);
    if !softmax_in_place(&mut resp) {
        resp.clear();
        resp.extend(state.mixing.weights.iter());
    }
    let mut p = DVector::zeros(state.n_classes());
    for (r, atom) in resp.iter().zip(&state.mixing.atoms) {
        p.axpy(*r, &atom.nu, 1.0);
    }
    let total = p.sum();
    Ok(p / total)
}

/// `log sum_j w_j N_k(U'x; mu_j, Sigma_1) nu_{j,y} N_{m-k}(V'(x - theta); 0, sigma0^2 I)`.
///
/// `label` is a zero-based class index.
pub fn joint_log_density(state: &ModelState, x: &DVector<f64>, label: usize) -> Result<f64> {
    state.check_point(x)?;
    if label >= state.n_classes() {
        return Err(PscError::InvalidLabel {
            label: label + 1,
            classes: state.n_classes(),
        });
    }
    let s = state.frame.coordinates(x);
    let mut terms = Vec::with_capacity(state.mixing.truncation());
    state.log_location_terms(&s, &mut terms);
    for (t, atom) in terms.iter_mut().zip(&state.mixing.atoms) {
        *t += atom.nu[label].ln();
    }
    Ok(log_sum_exp(&terms) + state.log_residual_term(x))
}
