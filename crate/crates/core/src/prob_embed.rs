//! Gaussian pixel representations and the similarity / prototype machinery
//! built on top of them.
//!
//! A representation is a diagonal Gaussian `N(mu, diag(sigma2))`. Two
//! representations are compared with the mutual likelihood score, the log
//! density that both emit the same latent point. Class prototypes come in two
//! forms: the precision-weighted posterior of a set of representations
//! ([`DistPrototype`]) and the plain mean of deterministic vectors
//! ([`PointPrototype`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ClassId;

/// Smallest variance a representation may carry.
pub const SIGMA2_MIN: f64 = 1e-6;
/// Largest variance a representation may carry.
pub const SIGMA2_MAX: f64 = 1e6;

/// Anything that can be viewed as a diagonal Gaussian.
pub trait DiagonalGaussian {
    fn mean(&self) -> &[f64];
    fn variance(&self) -> &[f64];

    fn dim(&self) -> usize {
        self.mean().len()
    }
}

/// Probabilistic representation of one pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRep {
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

impl ProbRep {
    /// Builds a representation, rejecting mismatched lengths, non-finite
    /// components and variances outside `[SIGMA2_MIN, SIGMA2_MAX]`.
    pub fn new(mu: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma2.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: sigma2.len(),
            });
        }
        if mu.is_empty() {
            return Err(Error::Empty("representation"));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("representation mean".into()));
        }
        for (dim, &value) in sigma2.iter().enumerate() {
            if !(SIGMA2_MIN..=SIGMA2_MAX).contains(&value) {
                return Err(Error::InvalidVariance { dim, value });
            }
        }
        Ok(Self { mu, sigma2 })
    }

    /// Representation with the same variance `c` in every dimension.
    pub fn isotropic(mu: Vec<f64>, c: f64) -> Result<Self> {
        let sigma2 = vec![c; mu.len()];
        Self::new(mu, sigma2)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    /// l1 norm of the variance vector.
    pub fn sigma2_l1(&self) -> f64 {
        self.sigma2.iter().sum()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.mu, self.sigma2)
    }
}

impl DiagonalGaussian for ProbRep {
    fn mean(&self) -> &[f64] {
        &self.mu
    }
    fn variance(&self) -> &[f64] {
        &self.sigma2
    }
}

/// Class prototype obtained by Bayesian fusion of probabilistic
/// representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistPrototype {
    mu_hat: Vec<f64>,
    sigma2_hat: Vec<f64>,
    n_obs: usize,
    class_id: ClassId,
}

impl DistPrototype {
    /// Assembles a prototype from explicit parameters. Variances only need to
    /// be positive and finite: fusing many observations legitimately drives
    /// them below `SIGMA2_MIN`.
    pub fn from_parts(
        mu_hat: Vec<f64>,
        sigma2_hat: Vec<f64>,
        n_obs: usize,
        class_id: ClassId,
    ) -> Result<Self> {
        check_pair(&mu_hat, &sigma2_hat)?;
        Ok(Self {
            mu_hat,
            sigma2_hat,
            n_obs,
            class_id,
        })
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    pub fn sigma2_hat(&self) -> &[f64] {
        &self.sigma2_hat
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    /// Sequential posterior update with one more observation. Folding this
    /// over a set of observations gives the same prototype as
    /// [`fuse_prototype`] on the whole set.
    pub fn update(&self, z: &ProbRep) -> Result<DistPrototype> {
        check_dims(self.dim(), z.dim())?;
        let mut mu_hat = Vec::with_capacity(self.dim());
        let mut sigma2_hat = Vec::with_capacity(self.dim());
        for l in 0..self.dim() {
            let prior_prec = 1.0 / self.sigma2_hat[l];
            let obs_prec = 1.0 / z.sigma2[l];
            let prec = prior_prec + obs_prec;
            let var = 1.0 / prec;
            sigma2_hat.push(var);
            mu_hat.push(var * (self.mu_hat[l] * prior_prec + z.mu[l] * obs_prec));
        }
        Ok(DistPrototype {
            mu_hat,
            sigma2_hat,
            n_obs: self.n_obs + 1,
            class_id: self.class_id,
        })
    }
}

impl DiagonalGaussian for DistPrototype {
    fn mean(&self) -> &[f64] {
        &self.mu_hat
    }
    fn variance(&self) -> &[f64] {
        &self.sigma2_hat
    }
}

/// Arithmetic-mean prototype of deterministic representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPrototype {
    mu: Vec<f64>,
    class_id: ClassId,
}

impl PointPrototype {
    pub fn new(mu: Vec<f64>, class_id: ClassId) -> Result<Self> {
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point prototype".into()));
        }
        Ok(Self { mu, class_id })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_pair(mu: &[f64], sigma2: &[f64]) -> Result<()> {
    check_dims(mu.len(), sigma2.len())?;
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mean".into()));
    }
    for (dim, &value) in sigma2.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidVariance { dim, value });
        }
    }
    Ok(())
}

fn check_operands<A, B>(a: &A, b: &B) -> Result<()>
where
    A: DiagonalGaussian + ?Sized,
    B: DiagonalGaussian + ?Sized,
{
    check_pair(a.mean(), a.variance())?;
    check_pair(b.mean(), b.variance())?;
    check_dims(a.dim(), b.dim())
}

/// Mutual likelihood score without validation. Callers guarantee equal
/// lengths and positive variances.
pub(crate) fn mls_unchecked(mu_a: &[f64], s_a: &[f64], mu_b: &[f64], s_b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for l in 0..mu_a.len() {
        let diff = mu_a[l] - mu_b[l];
        let s = s_a[l] + s_b[l];
        acc += diff * diff / s + s.ln();
    }
    -0.5 * acc - 0.5 * mu_a.len() as f64 * (2.0 * PI).ln()
}

/// Accumulates `scale * d mls / d(inputs)` into the four gradient buffers.
pub(crate) fn mls_grad_accumulate(
    mu_a: &[f64],
    s_a: &[f64],
    mu_b: &[f64],
    s_b: &[f64],
    scale: f64,
    d_mu_a: &mut [f64],
    d_s_a: &mut [f64],
    d_mu_b: &mut [f64],
    d_s_b: &mut [f64],
) {
    for l in 0..mu_a.len() {
        let diff = mu_a[l] - mu_b[l];
        let s = s_a[l] + s_b[l];
        let g_mu = -diff / s;
        let g_s = (diff * diff - s) / (2.0 * s * s);
        d_mu_a[l] += scale * g_mu;
        d_mu_b[l] -= scale * g_mu;
        d_s_a[l] += scale * g_s;
        d_s_b[l] += scale * g_s;
    }
}

/// Mutual likelihood score `log p(z_a = z_b)` of two diagonal Gaussians.
pub fn mls<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: DiagonalGaussian + ?Sized,
    B: DiagonalGaussian + ?Sized,
{
    check_operands(a, b)?;
    Ok(mls_unchecked(a.mean(), a.variance(), b.mean(), b.variance()))
}

/// Partial derivatives of [`mls`] with respect to both operands.
#[derive(Debug, Clone, PartialEq)]
pub struct MlsGrad {
    pub d_mu_a: Vec<f64>,
    pub d_sigma2_a: Vec<f64>,
    pub d_mu_b: Vec<f64>,
    pub d_sigma2_b: Vec<f64>,
}

pub fn mls_grad<A, B>(a: &A, b: &B) -> Result<MlsGrad>
where
    A: DiagonalGaussian + ?Sized,
    B: DiagonalGaussian + ?Sized,
{
    check_operands(a, b)?;
    let d = a.dim();
    let mut g = MlsGrad {
        d_mu_a: vec![0.0; d],
        d_sigma2_a: vec![0.0; d],
        d_mu_b: vec![0.0; d],
        d_sigma2_b: vec![0.0; d],
    };
    mls_grad_accumulate(
        a.mean(),
        a.variance(),
        b.mean(),
        b.variance(),
        1.0,
        &mut g.d_mu_a,
        &mut g.d_sigma2_a,
        &mut g.d_mu_b,
        &mut g.d_sigma2_b,
    );
    Ok(g)
}

/// Precision-weighted fusion of observations into a distribution prototype:
/// `1/sigma2_hat = sum 1/sigma2_i` and `mu_hat = sum (sigma2_hat/sigma2_i) mu_i`.
pub fn fuse_prototype<'a, I>(obs: I, class_id: ClassId) -> Result<DistPrototype>
where
    I: IntoIterator<Item = &'a ProbRep>,
{
    let mut iter = obs.into_iter();
    let first = iter.next().ok_or(Error::Empty("prototype observations"))?;
    let d = first.dim();
    let mut prec: Vec<f64> = first.sigma2.iter().map(|s| 1.0 / s).collect();
    let mut weighted: Vec<f64> = first
        .mu
        .iter()
        .zip(&first.sigma2)
        .map(|(m, s)| m / s)
        .collect();
    let mut n_obs = 1;
    for z in iter {
        check_dims(d, z.dim())?;
        for l in 0..d {
            prec[l] += 1.0 / z.sigma2[l];
            weighted[l] += z.mu[l] / z.sigma2[l];
        }
        n_obs += 1;
    }
    let sigma2_hat: Vec<f64> = prec.iter().map(|p| 1.0 / p).collect();
    let mu_hat = weighted
        .iter()
        .zip(&sigma2_hat)
        .map(|(w, s)| w * s)
        .collect();
    Ok(DistPrototype {
        mu_hat,
        sigma2_hat,
        n_obs,
        class_id,
    })
}

/// Arithmetic mean of deterministic vectors.
pub fn point_prototype<'a, I>(mus: I, class_id: ClassId) -> Result<PointPrototype>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = mus.into_iter();
    let first = iter.next().ok_or(Error::Empty("prototype observations"))?;
    let mut sum = first.to_vec();
    let mut n = 1usize;
    for v in iter {
        check_dims(sum.len(), v.len())?;
        for (acc, x) in sum.iter_mut().zip(v) {
            *acc += x;
        }
        n += 1;
    }
    let inv = 1.0 / n as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    PointPrototype::new(sum, class_id)
}
