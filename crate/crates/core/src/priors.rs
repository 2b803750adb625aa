//! Priors for every parameter block and a joint prior sampler.
//!
//! Given `k`, the blocks are independent: a matrix Bingham-von Mises-Fisher
//! density on `U`, a Normal on the origin restricted to the complement of
//! `U`, inverse-Gamma on each squared scale and a truncated Dirichlet process
//! `DP(w0 (P0 x Q0))` with `P0 = N_k(m0, tau^2 I)` and `Q0 = Dirichlet(alpha)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PscError, Result};
use crate::geometry::OrthonormalFrame;
use crate::model::{Atom, MixingMeasure, ModelState, NoiseScales};
use crate::stats::{
    ln_beta_pdf, ln_dirichlet_pdf, ln_inverse_gamma_pdf, ln_isotropic_normal, sample_beta,
    sample_dirichlet, sample_inverse_gamma, standard_normal,
};

/// Metropolis steps used to draw `U` from a non-uniform BMF prior.
const BMF_PRIOR_STEPS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// DP concentration `w0`.
    pub concentration: f64,
    /// Location `m0` of the atom-location base measure, broadcast to every coordinate.
    pub base_mean: f64,
    /// Scale `tau` of the atom-location base measure.
    pub base_scale: f64,
    /// Dirichlet parameter of the class-vector base measure; `None` means all ones.
    pub dirichlet_alpha: Option<Vec<f64>>,
    pub sigma0_shape: f64,
    pub sigma0_rate: f64,
    pub sigma_shape: f64,
    pub sigma_rate: f64,
    /// Scale of the Normal prior on the origin's complement coordinates.
    pub theta_scale: f64,
    /// Bingham-von Mises-Fisher parameters; `None` means uniform on the Stiefel manifold.
    pub bmf: Option<BmfParams>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            concentration: 1.0,
            base_mean: 0.0,
            base_scale: 3.0,
            dirichlet_alpha: None,
            sigma0_shape: 2.0,
            sigma0_rate: 1.0,
            sigma_shape: 2.0,
            sigma_rate: 1.0,
            theta_scale: 10.0,
            bmf: None,
        }
    }
}

/// Exponent `Tr(U A + U B U' C)` with `A: k x m`, `B: k x k`, `C: m x m`,
/// each stored row-major as nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmfParams {
    #[serde(with = "crate::io::rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub b: DMatrix<f64>,
    #[serde(with = "crate::io::rows")]
    pub c: DMatrix<f64>,
}

impl BmfParams {
    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(self.b.iter()).chain(self.c.iter()).all(|v| *v == 0.0)
    }

    fn check(&self, m: usize, k: usize) -> Result<()> {
        let ok = self.a.shape() == (k, m) && self.b.shape() == (k, k) && self.c.shape() == (m, m);
        if !ok {
            return Err(PscError::InvalidConfig(format!(
                "BMF parameters must be A: {k}x{m}, B: {k}x{k}, C: {m}x{m}; got {:?}, {:?}, {:?}",
                self.a.shape(),
                self.b.shape(),
                self.c.shape()
            )));
        }
        Ok(())
    }
}

impl PriorConfig {
    pub fn alpha(&self, classes: usize) -> Vec<f64> {
        self.dirichlet_alpha.clone().unwrap_or_else(|| vec![1.0; classes])
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        let positive = [
            ("concentration", self.concentration),
            ("base_scale", self.base_scale),
            ("sigma0_shape", self.sigma0_shape),
            ("sigma0_rate", self.sigma0_rate),
            ("sigma_shape", self.sigma_shape),
            ("sigma_rate", self.sigma_rate),
            ("theta_scale", self.theta_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PscError::InvalidConfig(format!("prior {name} must be positive, got {v}")));
            }
        }
        if !self.base_mean.is_finite() {
            return Err(PscError::InvalidConfig("prior base_mean must be finite".into()));
        }
        let alpha = self.alpha(classes);
        if alpha.len() != classes || alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(PscError::InvalidConfig(format!(
                "dirichlet_alpha must have {classes} positive entries"
            )));
        }
        Ok(())
    }

    fn active_bmf(&self) -> Option<&BmfParams> {
        self.bmf.as_ref().filter(|p| !p.is_zero())
    }
}

/// Unnormalized log BMF density `Tr(U A) + Tr(U B U' C)`; zero for the uniform prior.
pub fn log_bmf_density_unnormalized(frame: &OrthonormalFrame, cfg: &PriorConfig) -> Result<f64> {
    match &cfg.bmf {
        None => Ok(0.0),
        Some(p) => {
            p.check(frame.ambient_dim(), frame.dim())?;
            let u = frame.as_matrix();
            let linear = (u * &p.a).trace();
            let quadratic = (u * &p.b * u.transpose() * &p.c).trace();
            Ok(linear + quadratic)
        }
    }
}

/// Draw a complete state from the prior.
pub fn sample_prior<R: Rng + ?Sized>(
    cfg: &PriorConfig,
    k: usize,
    m: usize,
    classes: usize,
    truncation: usize,
    rng: &mut R,
) -> Result<ModelState> {
    cfg.validate(classes)?;
    if truncation == 0 {
        return Err(PscError::InvalidConfig("truncation must be positive".into()));
    }
    let frame = sample_frame(cfg, m, k, rng)?;
    let eta = DVector::from_fn(m - k, |_, _| cfg.theta_scale * standard_normal(rng));
    let scales = sample_scales(cfg, k, rng);
    let weights = sample_stick_weights(&vec![0; truncation], cfg.concentration, rng);
    let atoms = (0..truncation).map(|_| sample_base_atom(cfg, k, classes, rng)).collect();
    let mixing = MixingMeasure::new(weights, atoms)?;
    ModelState::new(frame, eta, scales, mixing)
}

fn sample_frame<R: Rng + ?Sized>(cfg: &PriorConfig, m: usize, k: usize, rng: &mut R) -> Result<OrthonormalFrame> {
    let mut frame = OrthonormalFrame::random(m, k, rng)?;
    if cfg.active_bmf().is_none() {
        return Ok(frame);
    }
    // Approximate draw: independence start, then a Metropolis run on the prior.
    let mut current = log_bmf_density_unnormalized(&frame, cfg)?;
    for _ in 0..BMF_PRIOR_STEPS {
        let proposal = frame.cayley_perturb(0.3, rng);
        let lp = log_bmf_density_unnormalized(&proposal, cfg)?;
        if rng.random::<f64>().ln() < lp - current {
            frame = proposal;
            current = lp;
        }
    }
    Ok(frame)
}

pub(crate) fn sample_scales<R: Rng + ?Sized>(cfg: &PriorConfig, k: usize, rng: &mut R) -> NoiseScales {
    let sigma0 = sample_inverse_gamma(cfg.sigma0_shape, cfg.sigma0_rate, rng).sqrt();
    let sigma = DVector::from_fn(k, |_, _| sample_inverse_gamma(cfg.sigma_shape, cfg.sigma_rate, rng).sqrt());
    NoiseScales { sigma0, sigma }
}

pub(crate) fn sample_base_atom<R: Rng + ?Sized>(cfg: &PriorConfig, k: usize, classes: usize, rng: &mut R) -> Atom {
    let mu = DVector::from_fn(k, |_, _| cfg.base_mean + cfg.base_scale * standard_normal(rng));
    let nu = DVector::from_vec(sample_dirichlet(&cfg.alpha(classes), rng));
    Atom { mu, nu }
}

/// Truncated stick-breaking weights with stick fractions
/// `v_j ~ Beta(1 + n_j, w0 + sum_{l>j} n_l)`; the last stick takes the remaining mass.
pub(crate) fn sample_stick_weights<R: Rng + ?Sized>(counts: &[usize], concentration: f64, rng: &mut R) -> DVector<f64> {
    let t = counts.len();
    let mut tail: usize = counts.iter().sum();
    let mut remaining = 1.0;
    let mut weights = DVector::zeros(t);
    for j in 0..t - 1 {
        tail -= counts[j];
        let v = sample_beta(1.0 + counts[j] as f64, concentration + tail as f64, rng);
        weights[j] = remaining * v;
        remaining *= 1.0 - v;
    }
    weights[t - 1] = remaining;
    // remaining mass is accumulated multiplicatively; renormalize rounding
    let total = weights.sum();
    weights / total
}

/// Per-block prior log densities. The BMF term is unnormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorTerms {
    pub frame: f64,
    pub origin: f64,
    pub scales: f64,
    pub sticks: f64,
    pub atoms: f64,
}

impl PriorTerms {
    pub fn total(&self) -> f64 {
        self.frame + self.origin + self.scales + self.sticks + self.atoms
    }
}

pub fn log_prior_terms(state: &ModelState, cfg: &PriorConfig) -> Result<PriorTerms> {
    let frame = log_bmf_density_unnormalized(state.frame(), cfg)?;
    let eta = state.eta();
    let origin = ln_isotropic_normal(eta.len(), eta.norm_squared(), cfg.theta_scale.powi(2));

    let s = state.scales();
    let mut scales = ln_inverse_gamma_pdf(s.sigma0 * s.sigma0, cfg.sigma0_shape, cfg.sigma0_rate);
    for sj in s.sigma.iter() {
        scales += ln_inverse_gamma_pdf(sj * sj, cfg.sigma_shape, cfg.sigma_rate);
    }

    // Stick fractions recovered from weights via suffix sums.
    let w = state.mixing().weights();
    let mut sticks = 0.0;
    let mut suffix: f64 = w.iter().sum();
    for j in 0..w.len() - 1 {
        if suffix > 0.0 {
            let v = (w[j] / suffix).clamp(1e-300, 1.0 - 1e-16);
            sticks += ln_beta_pdf(v, 1.0, cfg.concentration);
        }
        suffix -= w[j];
    }

    let alpha = cfg.alpha(state.n_classes());
    let tau2 = cfg.base_scale.powi(2);
    let mut atoms = 0.0;
    for a in state.mixing().atoms() {
        let d2: f64 = a.mu.iter().map(|v| (v - cfg.base_mean).powi(2)).sum();
        atoms += ln_isotropic_normal(a.mu.len(), d2, tau2);
        let nu: Vec<f64> = a.nu.iter().map(|v| v.max(1e-300)).collect();
        atoms += ln_dirichlet_pdf(&nu, &alpha);
    }
    Ok(PriorTerms {
        frame,
        origin,
        scales,
        sticks,
        atoms,
    })
}

/// Sum of the block log densities.
pub fn log_prior(state: &ModelState, cfg: &PriorConfig) -> Result<f64> {
    log_prior_terms(state, cfg).map(|t| t.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::LN_2PI;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bmf(m: usize, k: usize) -> BmfParams {
        BmfParams {
            a: DMatrix::zeros(k, m),
            b: DMatrix::zeros(k, k),
            c: DMatrix::zeros(m, m),
        }
    }

    #[test]
    fn uniform_bmf_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = OrthonormalFrame::random(5, 2, &mut rng).unwrap();
        let mut cfg = PriorConfig::default();
        assert_eq!(log_bmf_density_unnormalized(&u, &cfg).unwrap(), 0.0);
        cfg.bmf = Some(bmf(5, 2));
        assert_eq!(log_bmf_density_unnormalized(&u, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn bmf_linear_term_is_elementwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = OrthonormalFrame::random(4, 2, &mut rng).unwrap();
        let mut p = bmf(4, 2);
        p.a = DMatrix::from_fn(2, 4, |i, j| (i as f64 + 1.0) * 0.3 - j as f64 * 0.7);
        let expected: f64 = (0..2)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| p.a[(i, j)] * u.as_matrix()[(j, i)])
            .sum();
        let cfg = PriorConfig {
            bmf: Some(p),
            ..Default::default()
        };
        assert_relative_eq!(log_bmf_density_unnormalized(&u, &cfg).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn bmf_quadratic_identity_gives_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = bmf(6, 3);
        p.b = DMatrix::identity(3, 3);
        p.c = DMatrix::identity(6, 6);
        let cfg = PriorConfig {
            bmf: Some(p),
            ..Default::default()
        };
        for _ in 0..5 {
            let u = OrthonormalFrame::random(6, 3, &mut rng).unwrap();
            assert_relative_eq!(log_bmf_density_unnormalized(&u, &cfg).unwrap(), 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bmf_dimension_mismatch() {
        let u = OrthonormalFrame::canonical(4, 2).unwrap();
        let cfg = PriorConfig {
            bmf: Some(bmf(5, 2)),
            ..Default::default()
        };
        assert!(log_bmf_density_unnormalized(&u, &cfg).is_err());
    }

    #[test]
    fn full_rank_prior_has_zero_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_prior(&PriorConfig::default(), 3, 3, 2, 5, &mut rng).unwrap();
        assert_eq!(s.theta(), &DVector::zeros(3));
        assert_eq!(s.eta().len(), 0);
    }

    #[test]
    fn prior_draws_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = PriorConfig::default();
        for i in 0..10_000 {
            let m = 2 + i % 6;
            let k = 1 + i % m;
            let s = sample_prior(&cfg, k, m, 3, 5, &mut rng).unwrap();
            s.validate().unwrap();
            assert!(log_prior(&s, &cfg).unwrap().is_finite());
            assert_relative_eq!(s.mixing().weights().sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn prior_class_vectors_average_to_dirichlet_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = PriorConfig {
            dirichlet_alpha: Some(vec![1.0, 2.0, 5.0]),
            ..Default::default()
        };
        let mut mean = DVector::zeros(3);
        let n = 4000;
        for _ in 0..n {
            let s = sample_prior(&cfg, 1, 2, 3, 5, &mut rng).unwrap();
            for a in s.mixing().atoms() {
                mean += &a.nu;
            }
        }
        mean /= (n * 5) as f64;
        // alpha / sum(alpha); per-component sd of the mean < 0.002
        let expected = DVector::from_vec(vec![0.125, 0.25, 0.625]);
        assert!((mean - expected).amax() < 0.01);
    }

    #[test]
    fn log_prior_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = PriorConfig::default();
        let s = sample_prior(&cfg, 2, 4, 2, 4, &mut rng).unwrap();
        let terms = log_prior_terms(&s, &cfg).unwrap();
        assert_eq!(terms.frame, 0.0);
        assert_relative_eq!(terms.total(), log_prior(&s, &cfg).unwrap());

        // scale block against the textbook inverse-Gamma density
        let ig = |x: f64, a: f64, b: f64| (b.powf(a) / statrs::function::gamma::gamma(a) * x.powf(-a - 1.0) * (-b / x).exp()).ln();
        let sc = s.scales();
        let direct = ig(sc.sigma0.powi(2), 2.0, 1.0) + sc.sigma.iter().map(|v| ig(v * v, 2.0, 1.0)).sum::<f64>();
        assert_relative_eq!(terms.scales, direct, epsilon = 1e-10);

        // origin block at eta = 0 is the Gaussian mode
        let zero = ModelState::new(s.frame().clone(), DVector::zeros(2), sc.clone(), s.mixing().clone()).unwrap();
        let mode = -0.5 * 2.0 * (LN_2PI + 100f64.ln());
        assert_relative_eq!(log_prior_terms(&zero, &cfg).unwrap().origin, mode, epsilon = 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = PriorConfig {
            concentration: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate(2).is_err());
        let cfg = PriorConfig {
            dirichlet_alpha: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn stick_weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for t in 1..10 {
            let w = sample_stick_weights(&vec![0; t], 1.0, &mut rng);
            assert_relative_eq!(w.sum(), 1.0, epsilon = 1e-12);
            assert!(w.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = PriorConfig {
            bmf: Some(BmfParams {
                a: DMatrix::from_row_slice(1, 2, &[0.5, -1.0]),
                b: DMatrix::identity(1, 1),
                c: DMatrix::zeros(2, 2),
            }),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("[[0.5,-1.0]]"));
        let back: PriorConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: PriorConfig = serde_json::from_str(r#"{"base_scale": 2.0}"#).unwrap();
        assert_eq!(partial.base_scale, 2.0);
        assert_eq!(partial.concentration, 1.0);
    }
}
