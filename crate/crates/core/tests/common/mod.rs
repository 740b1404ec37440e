//! Independent reference implementations used by several test targets.
//! The oracles in this file never call into the library's numeric code;
//! `checks` compares library output against them.

#![allow(dead_code)]

pub mod checks;

use prcl::ProbRep;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random Gaussian representation with means in [-2, 2] and variances
/// log-uniform in [0.05, 5].
pub fn random_rep(rng: &mut ChaCha8Rng, d: usize) -> ProbRep {
    let mu = random_vec(rng, d, -2.0, 2.0);
    let sigma2 = (0..d).map(|_| rng.random_range(0.05f64.ln()..5f64.ln()).exp()).collect();
    ProbRep::new(mu, sigma2).unwrap()
}

/// Scalar evaluation of the mutual likelihood score, term by term.
pub fn mls_scalar(mu_a: &[f64], s_a: &[f64], mu_b: &[f64], s_b: &[f64]) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut total = 0.0;
    for l in 0..mu_a.len() {
        let var = s_a[l] + s_b[l];
        let diff = mu_a[l] - mu_b[l];
        total += -0.5 * (diff * diff / var + var.ln()) - 0.5 * two_pi.ln();
    }
    total
}

/// Closed-form precision-weighted fusion, evaluated per dimension.
pub fn fuse_scalar(obs: &[(Vec<f64>, Vec<f64>)]) -> (Vec<f64>, Vec<f64>) {
    let d = obs[0].0.len();
    let mut mu_hat = vec![0.0; d];
    let mut s_hat = vec![0.0; d];
    for l in 0..d {
        let mut precision = 0.0;
        for (_, s) in obs {
            precision += 1.0 / s[l];
        }
        s_hat[l] = 1.0 / precision;
        for (m, s) in obs {
            mu_hat[l] += s_hat[l] / s[l] * m[l];
        }
    }
    (mu_hat, s_hat)
}

/// Reference contrastive loss for one anchor: scores in, loss out, using a
/// plain (unstabilised) softmax.
pub fn contrast_scalar(pos: f64, negs: &[f64], tau: f64) -> f64 {
    let num = (pos / tau).exp();
    let den = num + negs.iter().map(|s| (s / tau).exp()).sum::<f64>();
    -(num / den).ln()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Relative error with an absolute floor, for comparing gradients that may
/// be close to zero.
pub fn grad_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central finite difference of `f` around `x[i]`.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Fourth-order central difference of `f` around `x[i]`.
pub fn central_diff4(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut at = |k: f64| {
        let mut y = x.to_vec();
        y[i] += k * h;
        f(&y)
    };
    (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}
