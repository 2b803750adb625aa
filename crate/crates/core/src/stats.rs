//! Small numeric helpers shared by the model, priors and sampler.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `log(sum(exp(values)))`, returning `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalize log-weights in place to probabilities. Returns `false` when
/// every entry is `-inf` (nothing to normalize), leaving `values` untouched.
pub fn softmax_in_place(values: &mut [f64]) -> bool {
    let lse = log_sum_exp(values);
    if !lse.is_finite() {
        return false;
    }
    for v in values.iter_mut() {
        *v = (*v - lse).exp();
    }
    true
}

/// Sample an index from unnormalized log-weights.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return rng.random_range(0..log_weights.len());
    }
    let total: f64 = log_weights.iter().map(|v| (v - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, v) in log_weights.iter().enumerate() {
        u -= (v - max).exp();
        if u <= 0.0 {
            return i;
        }
    }
    // rounding left a sliver of mass; return the last admissible index
    log_weights
        .iter()
        .rposition(|v| v.is_finite())
        .unwrap_or(log_weights.len() - 1)
}

/// Sample from a categorical distribution with (possibly unnormalized) weights.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draw from inverse-Gamma(shape, rate): the reciprocal of Gamma(shape, scale = 1/rate).
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    loop {
        let draw = g.sample(rng);
        if draw > 0.0 {
            return 1.0 / draw;
        }
    }
}

pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("positive beta parameters").sample(rng)
}

/// Dirichlet draw via normalized Gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive dirichlet parameter").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            draws.iter_mut().for_each(|d| *d /= total);
            return draws;
        }
    }
}

/// Log density of inverse-Gamma(shape, rate) at `x > 0`.
pub fn ln_inverse_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

/// `(a - 1) ln x`, with the exponent-zero case kept finite at the boundary.
fn power_term(a: f64, x: f64) -> f64 {
    if a == 1.0 {
        0.0
    } else {
        (a - 1.0) * x.ln()
    }
}

pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + power_term(a, x) + power_term(b, 1.0 - x)
}

pub fn ln_dirichlet_pdf(x: &[f64], alpha: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    let mut out = ln_gamma(total);
    for (&xi, &ai) in x.iter().zip(alpha) {
        out += power_term(ai, xi) - ln_gamma(ai);
    }
    out
}

/// Log density of an isotropic normal `N(mean, scale^2 I)` evaluated at `x - mean`
/// given only the squared distance.
pub fn ln_isotropic_normal(dim: usize, sq_dist: f64, variance: f64) -> f64 {
    -0.5 * (dim as f64 * (LN_2PI + variance.ln()) + sq_dist / variance)
}
