//! Blocked Gibbs sampler over allocations, sticks, atoms, scales, origin and frame.
//!
//! Every block except the frame has a conjugate full conditional. The frame
//! is updated by Metropolis with a Cayley-rotation proposal, holding the
//! origin's complement coordinates `eta` fixed so that `U'theta = 0` survives
//! every move. One sweep runs the blocks in the order
//! allocations, sticks, atoms, scales, origin, frame.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PscError, Result};
use crate::geometry::OrthonormalFrame;
use crate::io::ChainRecord;
use crate::model::{joint_log_density, Atom, MixingMeasure, ModelState, NoiseScales};
use crate::priors::{log_bmf_density_unnormalized, log_prior, sample_base_atom, sample_stick_weights, PriorConfig};
use crate::stats::{sample_dirichlet, sample_inverse_gamma, sample_log_categorical, standard_normal};

const MIN_STEP: f64 = 1e-4;
const MAX_STEP: f64 = 3.0;
const MIN_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Number of stick-breaking atoms `T`.
    pub truncation: usize,
    /// Initial scale of the frame proposal.
    pub metropolis_step: f64,
    /// Frame acceptance rate targeted while adapting during burn-in.
    pub adapt_target: f64,
    /// Frame proposals per sweep.
    pub frame_moves: usize,
    pub init: FrameInit,
    pub seed: u64,
}

/// Starting frame of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameInit {
    /// Leading principal components of the training data.
    #[default]
    Principal,
    /// Haar-random draw.
    Random,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            thin: 1,
            truncation: 20,
            metropolis_step: 0.05,
            adapt_target: 0.3,
            frame_moves: 1,
            init: FrameInit::Principal,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(PscError::InvalidConfig(msg));
        if self.burn_in >= self.iterations {
            return fail(format!("burn_in ({}) must be below iterations ({})", self.burn_in, self.iterations));
        }
        if self.thin == 0 || self.truncation == 0 || self.frame_moves == 0 {
            return fail("thin, truncation and frame_moves must be positive".into());
        }
        if !(self.metropolis_step > 0.0 && self.metropolis_step.is_finite()) {
            return fail(format!("metropolis_step must be positive, got {}", self.metropolis_step));
        }
        if !(self.adapt_target > 0.0 && self.adapt_target < 1.0) {
            return fail(format!("adapt_target must lie in (0, 1), got {}", self.adapt_target));
        }
        Ok(())
    }
}

/// Training matrix with zero-based labels and the sufficient statistics the
/// frame and origin updates need.
#[derive(Debug, Clone)]
pub struct TrainingData {
    x: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
    sum_x: DVector<f64>,
    total_sq: f64,
}

impl TrainingData {
    pub fn new(x: DMatrix<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(PscError::DimensionMismatch {
                expected: x.nrows(),
                actual: labels.len(),
                context: "labels",
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(PscError::InvalidLabel {
                label: bad + 1,
                classes,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PscError::NonFinite("training data"));
        }
        let sum_x = x.row_sum().transpose();
        let total_sq = x.norm_squared();
        Ok(Self {
            x,
            labels,
            classes,
            sum_x,
            total_sq,
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
        self.classes
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `X U`, one row of subspace coordinates per observation.
    fn project(&self, frame: &OrthonormalFrame) -> DMatrix<f64> {
        &self.x * frame.as_matrix()
    }

    /// `sum_i ||V'x_i - eta||^2` from sufficient statistics, given `P = X U`.
    fn residual_sum_sq(&self, proj: &DMatrix<f64>, complement: Option<&OrthonormalFrame>, eta: &DVector<f64>) -> f64 {
        let Some(v) = complement else { return 0.0 };
        let n = self.len() as f64;
        let within = (self.total_sq - proj.norm_squared()).max(0.0);
        let cross = v.as_matrix().tr_mul(&self.sum_x).dot(eta);
        (within - 2.0 * cross + n * eta.norm_squared()).max(0.0)
    }
}

/// Zero-based atom index per observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub z: Vec<usize>,
}

impl Allocation {
    pub fn counts(&self, truncation: usize) -> Vec<usize> {
        let mut counts = vec![0; truncation];
        for &j in &self.z {
            counts[j] += 1;
        }
        counts
    }
}

/// Per-observation log allocation weights `log w_j + log N_k(U'x_i; mu_j, Sigma_1) + log nu_{j,y_i}`.
pub fn allocation_log_weights(state: &ModelState, data: &TrainingData) -> Vec<Vec<f64>> {
    let proj = data.project(state.frame());
    let log_nu: Vec<Vec<f64>> = state.mixing().atoms().iter().map(|a| a.nu.iter().map(|v| v.ln()).collect()).collect();
    let mut buf = Vec::with_capacity(state.mixing().truncation());
    (0..data.len())
        .map(|i| {
            let s = proj.row(i).transpose();
            state.log_location_terms(&s, &mut buf);
            buf.iter().zip(&log_nu).map(|(t, ln)| t + ln[data.labels[i]]).collect()
        })
        .collect()
}

pub fn update_allocations<R: Rng + ?Sized>(state: &ModelState, data: &TrainingData, rng: &mut R) -> Allocation {
    let z = allocation_log_weights(state, data)
        .iter()
        .map(|lw| sample_log_categorical(lw, rng))
        .collect();
    Allocation { z }
}

/// Stick fractions `v_j ~ Beta(1 + n_j, w0 + sum_{l>j} n_l)`, last stick absorbing the rest.
pub fn update_sticks<R: Rng + ?Sized>(z: &Allocation, truncation: usize, cfg: &PriorConfig, rng: &mut R) -> DVector<f64> {
    sample_stick_weights(&z.counts(truncation), cfg.concentration, rng)
}

/// Conjugate Normal update of each location and Dirichlet update of each class vector.
/// Empty clusters are redrawn from the base measure.
pub fn update_atoms<R: Rng + ?Sized>(
    state: &ModelState,
    data: &TrainingData,
    z: &Allocation,
    cfg: &PriorConfig,
    rng: &mut R,
) -> Vec<Atom> {
    let (k, t, c) = (state.k(), state.mixing().truncation(), data.classes);
    let proj = data.project(state.frame());
    let mut sums = vec![DVector::<f64>::zeros(k); t];
    let mut class_counts = vec![vec![0usize; c]; t];
    let mut counts = vec![0usize; t];
    for (i, &j) in z.z.iter().enumerate() {
        sums[j] += proj.row(i).transpose();
        class_counts[j][data.labels[i]] += 1;
        counts[j] += 1;
    }
    let alpha = cfg.alpha(c);
    let prior_prec = cfg.base_scale.powi(-2);
    let var = state.scales().sigma.map(|s| s * s);
    (0..t)
        .map(|j| {
            if counts[j] == 0 {
                return sample_base_atom(cfg, k, c, rng);
            }
            let nj = counts[j] as f64;
            let mu = DVector::from_fn(k, |l, _| {
                let prec = prior_prec + nj / var[l];
                let mean = (cfg.base_mean * prior_prec + sums[j][l] / var[l]) / prec;
                mean + standard_normal(rng) / prec.sqrt()
            });
            let post: Vec<f64> = alpha.iter().zip(&class_counts[j]).map(|(a, n)| a + *n as f64).collect();
            let nu = DVector::from_vec(sample_dirichlet(&post, rng));
            Atom { mu, nu }
        })
        .collect()
}

/// Inverse-Gamma updates of `sigma_l^2` from the per-direction deviations and
/// of `sigma0^2` from the complement residuals. With `k = m` `sigma0` is kept.
pub fn update_scales<R: Rng + ?Sized>(
    state: &ModelState,
    data: &TrainingData,
    z: &Allocation,
    cfg: &PriorConfig,
    rng: &mut R,
) -> NoiseScales {
    let k = state.k();
    let n = data.len() as f64;
    let proj = data.project(state.frame());
    let atoms = state.mixing().atoms();
    let mut ss = DVector::<f64>::zeros(k);
    for (i, &j) in z.z.iter().enumerate() {
        for l in 0..k {
            ss[l] += (proj[(i, l)] - atoms[j].mu[l]).powi(2);
        }
    }
    let sigma = DVector::from_fn(k, |l, _| {
        sample_inverse_gamma(cfg.sigma_shape + 0.5 * n, cfg.sigma_rate + 0.5 * ss[l], rng).sqrt()
    });
    let sigma0 = match state.complement() {
        Some(v) => {
            let dof = (state.m() - k) as f64;
            let rss = data.residual_sum_sq(&proj, Some(v), state.eta());
            sample_inverse_gamma(cfg.sigma0_shape + 0.5 * n * dof, cfg.sigma0_rate + 0.5 * rss, rng).sqrt()
        }
        None => state.scales().sigma0,
    };
    NoiseScales { sigma0, sigma }
}

/// Conjugate Normal update of the origin's complement coordinates:
/// precision `n / sigma0^2 + 1 / sigma_theta^2`, mean shrinking `mean_i V'x_i`.
pub fn update_origin<R: Rng + ?Sized>(state: &ModelState, data: &TrainingData, cfg: &PriorConfig, rng: &mut R) -> DVector<f64> {
    let Some(v) = state.complement() else {
        return DVector::zeros(0);
    };
    let n = data.len() as f64;
    let s0 = state.scales().sigma0.powi(2);
    let prec = n / s0 + cfg.theta_scale.powi(-2);
    let sum_v = v.as_matrix().tr_mul(&data.sum_x);
    let mean = sum_v / (s0 * prec);
    let sd = prec.sqrt().recip();
    DVector::from_fn(mean.len(), |i, _| mean[i] + sd * standard_normal(rng))
}

/// Log full conditional of the frame given everything else (up to a constant).
pub fn frame_log_target(
    frame: &OrthonormalFrame,
    state: &ModelState,
    data: &TrainingData,
    z: &Allocation,
    cfg: &PriorConfig,
) -> Result<f64> {
    let proj = data.project(frame);
    let atoms = state.mixing().atoms();
    let var = state.scales().sigma.map(|s| s * s);
    let mut loc = 0.0;
    for (i, &j) in z.z.iter().enumerate() {
        for l in 0..var.len() {
            loc += (proj[(i, l)] - atoms[j].mu[l]).powi(2) / var[l];
        }
    }
    let resid = if frame.dim() < frame.ambient_dim() {
        let v = frame.complement()?;
        data.residual_sum_sq(&proj, Some(&v), state.eta()) / state.scales().sigma0.powi(2)
    } else {
        0.0
    };
    Ok(-0.5 * (loc + resid) + log_bmf_density_unnormalized(frame, cfg)?)
}

#[derive(Debug, Clone)]
pub struct FrameUpdate {
    pub frame: OrthonormalFrame,
    pub accepted: bool,
    /// Log Metropolis ratio of the proposal (before the min with zero).
    pub log_ratio: f64,
}

/// One Metropolis step on the frame with a Cayley-rotation proposal of scale `step`.
pub fn update_frame<R: Rng + ?Sized>(
    state: &ModelState,
    data: &TrainingData,
    z: &Allocation,
    cfg: &PriorConfig,
    step: f64,
    rng: &mut R,
) -> Result<FrameUpdate> {
    let current = frame_log_target(state.frame(), state, data, z, cfg)?;
    let proposal = state.frame().cayley_perturb(step, rng);
    let proposed = frame_log_target(&proposal, state, data, z, cfg)?;
    let log_ratio = proposed - current;
    let accepted = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    Ok(FrameUpdate {
        frame: if accepted { proposal } else { state.frame().clone() },
        accepted,
        log_ratio,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub state: ModelState,
    pub allocation: Allocation,
    pub frame_accepted: usize,
}

/// One full Gibbs sweep.
pub fn sweep<R: Rng + ?Sized>(
    state: &ModelState,
    data: &TrainingData,
    cfg: &PriorConfig,
    step: f64,
    frame_moves: usize,
    rng: &mut R,
) -> Result<SweepOutcome> {
    let mut next = state.clone();
    let allocation = update_allocations(&next, data, rng);
    let weights = update_sticks(&allocation, next.mixing().truncation(), cfg, rng);
    next.mixing_mut().set_weights(weights);
    let atoms = update_atoms(&next, data, &allocation, cfg, rng);
    next.mixing_mut().atoms_mut().clone_from_slice(&atoms);
    let scales = update_scales(&next, data, &allocation, cfg, rng);
    next.set_scales(scales);
    let eta = update_origin(&next, data, cfg, rng);
    next.set_eta(eta);
    let mut frame_accepted = 0;
    for _ in 0..frame_moves {
        let mv = update_frame(&next, data, &allocation, cfg, step, rng)?;
        if mv.accepted {
            next = next.with_frame(mv.frame)?;
            frame_accepted += 1;
        }
    }
    Ok(SweepOutcome {
        state: next,
        allocation,
        frame_accepted,
    })
}

/// `log p(Theta) + sum_i log p(x_i, y_i | Theta)`, allocations marginalized.
pub fn log_joint(state: &ModelState, data: &TrainingData, cfg: &PriorConfig) -> Result<f64> {
    let mut total = log_prior(state, cfg)?;
    for (i, &y) in data.labels.iter().enumerate() {
        total += joint_log_density(state, &data.x.row(i).transpose(), y)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDiagnostics {
    pub frame_acceptance_burn_in: f64,
    pub frame_acceptance: f64,
    /// Frame proposal scale in use after burn-in.
    pub final_step: f64,
    /// Log joint density after every iteration.
    pub log_joint: Vec<f64>,
    /// Residual scale after every iteration.
    pub sigma0: Vec<f64>,
    /// Number of atoms holding at least one observation, per iteration.
    pub occupied_atoms: Vec<usize>,
}

/// Post burn-in, thinned draws for a fixed subspace dimension.
#[derive(Debug, Clone)]
pub struct PosteriorChain {
    pub k: usize,
    /// Iteration index of each stored draw.
    pub iterations: Vec<usize>,
    pub draws: Vec<ModelState>,
    /// Log joint density of each stored draw.
    pub draw_log_joint: Vec<f64>,
    pub diagnostics: ChainDiagnostics,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn to_records(&self) -> Vec<ChainRecord> {
        self.iterations
            .iter()
            .zip(&self.draws)
            .zip(&self.draw_log_joint)
            .map(|((&iter, s), &lj)| ChainRecord::from_state(iter, s, lj))
            .collect()
    }

    pub fn from_records(records: &[ChainRecord]) -> Result<Self> {
        let first = records.first().ok_or(PscError::EmptyChain)?;
        let draws = records.iter().map(ChainRecord::to_state).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k: first.k,
            iterations: records.iter().map(|r| r.iter).collect(),
            draw_log_joint: records.iter().map(|r| r.log_joint).collect(),
            draws,
            diagnostics: ChainDiagnostics::default(),
        })
    }
}

/// Starting state: principal components (or a random frame) for the frame, the
/// complement part of the sample mean for the origin, k-means on the
/// projected coordinates for the allocations.
pub fn initial_state<R: Rng + ?Sized>(
    data: &TrainingData,
    k: usize,
    cfg: &PriorConfig,
    truncation: usize,
    init: FrameInit,
    rng: &mut R,
) -> Result<ModelState> {
    let (n, m, c) = (data.len(), data.dim(), data.classes);
    let frame = if n >= 2 && init == FrameInit::Principal {
        principal_frame(&data.x, k)?
    } else {
        OrthonormalFrame::random(m, k, rng)?
    };
    let complement = if k < m { Some(frame.complement()?) } else { None };
    let eta = match (&complement, n) {
        (Some(v), n) if n > 0 => v.as_matrix().tr_mul(&data.sum_x) / n as f64,
        (Some(_), _) => DVector::zeros(m - k),
        (None, _) => DVector::zeros(0),
    };
    let proj = data.project(&frame);
    let clusters = truncation.min((2 * c).max(5)).min(n.max(1));
    let z = kmeans(&proj, clusters, rng);

    let mut counts = vec![0usize; truncation];
    let mut sums = vec![DVector::<f64>::zeros(k); truncation];
    let mut class_counts = vec![vec![0usize; c]; truncation];
    for (i, &j) in z.iter().enumerate() {
        counts[j] += 1;
        sums[j] += proj.row(i).transpose();
        class_counts[j][data.labels[i]] += 1;
    }
    let alpha = cfg.alpha(c);
    let atoms: Vec<Atom> = (0..truncation)
        .map(|j| {
            if counts[j] == 0 {
                return sample_base_atom(cfg, k, c, rng);
            }
            let mu = &sums[j] / counts[j] as f64;
            let post: Vec<f64> = alpha.iter().zip(&class_counts[j]).map(|(a, n)| a + *n as f64).collect();
            let total: f64 = post.iter().sum();
            Atom {
                mu,
                nu: DVector::from_iterator(c, post.iter().map(|p| p / total)),
            }
        })
        .collect();
    let allocation = Allocation { z };
    let weights = update_sticks(&allocation, truncation, cfg, rng);

    let mut dev = DVector::<f64>::zeros(k);
    for (i, &j) in allocation.z.iter().enumerate() {
        for l in 0..k {
            dev[l] += (proj[(i, l)] - atoms[j].mu[l]).powi(2);
        }
    }
    let denom = n.max(1) as f64;
    let sigma = dev.map(|d| (d / denom).sqrt().max(MIN_SCALE));
    let sigma0 = match &complement {
        Some(v) if n > 0 => {
            let rss = data.residual_sum_sq(&proj, Some(v), &eta);
            (rss / (denom * (m - k) as f64)).sqrt().max(MIN_SCALE)
        }
        _ => 1.0,
    };
    let scales = NoiseScales::new(sigma0, sigma)?;
    let mixing = MixingMeasure::new(weights, atoms)?;
    ModelState::new(frame, eta, scales, mixing)
}

/// Top-`k` eigenvectors of the sample covariance.
fn principal_frame(x: &DMatrix<f64>, k: usize) -> Result<OrthonormalFrame> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
    let cov = centered.tr_mul(&centered) / (n - 1.0);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let cols: Vec<DVector<f64>> = order[..k].iter().map(|&j| eig.eigenvectors.column(j).into_owned()).collect();
    OrthonormalFrame::orthonormalize(&DMatrix::from_columns(&cols))
}

/// Lloyd's algorithm with k-means++ seeding; returns cluster indices.
fn kmeans<R: Rng + ?Sized>(points: &DMatrix<f64>, clusters: usize, rng: &mut R) -> Vec<usize> {
    let n = points.nrows();
    if n == 0 {
        return Vec::new();
    }
    let sq = |a: usize, c: &DVector<f64>| (points.row(a).transpose() - c).norm_squared();
    let mut centers = vec![points.row(rng.random_range(0..n)).transpose()];
    while centers.len() < clusters {
        let d: Vec<f64> = (0..n).map(|i| centers.iter().map(|c| sq(i, c)).fold(f64::INFINITY, f64::min)).collect();
        if d.iter().sum::<f64>() <= 0.0 {
            break;
        }
        let next = crate::stats::sample_categorical(&d, rng);
        centers.push(points.row(next).transpose());
    }
    let mut z = vec![0usize; n];
    for _ in 0..50 {
        let mut changed = false;
        for (i, zi) in z.iter_mut().enumerate() {
            let best = (0..centers.len())
                .min_by(|&a, &b| sq(i, &centers[a]).total_cmp(&sq(i, &centers[b])))
                .unwrap_or(0);
            changed |= best != *zi;
            *zi = best;
        }
        for (j, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| z[i] == j).collect();
            if !members.is_empty() {
                *center = members.iter().map(|&i| points.row(i).transpose()).sum::<DVector<f64>>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    z
}

/// Run one chain at fixed `k`. Deterministic given `sampler.seed`.
pub fn run_chain(data: &TrainingData, k: usize, prior: &PriorConfig, sampler: &SamplerConfig) -> Result<PosteriorChain> {
    sampler.validate()?;
    prior.validate(data.classes)?;
    if k == 0 || k > data.dim() {
        return Err(PscError::InvalidDimension { k, m: data.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut state = initial_state(data, k, prior, sampler.truncation, sampler.init, &mut rng)?;
    let mut step = sampler.metropolis_step;
    let mut chain = PosteriorChain {
        k,
        iterations: Vec::new(),
        draws: Vec::new(),
        draw_log_joint: Vec::new(),
        diagnostics: ChainDiagnostics::default(),
    };
    let (mut acc_burn, mut acc_main) = (0usize, 0usize);
    for iter in 0..sampler.iterations {
        let burning = iter < sampler.burn_in;
        let out = sweep(&state, data, prior, step, sampler.frame_moves, &mut rng)?;
        state = out.state;
        if burning {
            acc_burn += out.frame_accepted;
            let rate = out.frame_accepted as f64 / sampler.frame_moves as f64;
            let gain = (iter as f64 + 1.0).powf(-0.6);
            step = (step.ln() + gain * (rate - sampler.adapt_target)).exp().clamp(MIN_STEP, MAX_STEP);
        } else {
            acc_main += out.frame_accepted;
        }
        let lj = log_joint(&state, data, prior)?;
        if !lj.is_finite() {
            let dump = serde_json::to_string(&ChainRecord::from_state(iter, &state, lj))?;
            return Err(PscError::NonFiniteLogJoint { iter, dump });
        }
        chain.diagnostics.log_joint.push(lj);
        chain.diagnostics.sigma0.push(state.scales().sigma0);
        chain
            .diagnostics
            .occupied_atoms
            .push(out.allocation.counts(sampler.truncation).iter().filter(|&&c| c > 0).count());
        if !burning && (iter - sampler.burn_in) % sampler.thin == 0 {
            chain.iterations.push(iter);
            chain.draws.push(state.clone());
            chain.draw_log_joint.push(lj);
        }
    }
    let moves = sampler.frame_moves as f64;
    chain.diagnostics.frame_acceptance_burn_in = acc_burn as f64 / (moves * sampler.burn_in.max(1) as f64);
    chain.diagnostics.frame_acceptance = acc_main as f64 / (moves * (sampler.iterations - sampler.burn_in) as f64);
    chain.diagnostics.final_step = step;
    Ok(chain)
}
