//! Per-pixel toy network with a shared encoder and three heads.
//!
//! ```text
//!            +-> pred head g ------------------------> logits
//! x -> f ----+-> rep head h  (affine-relu-affine) --> mu
//!            +-> prob head p (affine-relu-affine) --> log sigma2 -> clamp -> exp
//! ```
//!
//! All parameters live in one flat vector laid out layer by layer in
//! declaration order (row-major weights, then biases). Gradients share the
//! layout, which keeps SGD, EMA, checkpoints and finite-difference checks
//! simple loops over a slice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob_embed::{ProbRep, SIGMA2_MAX, SIGMA2_MIN};
use crate::ClassId;

const MU_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub feature: usize,
    pub classes: usize,
    pub head_hidden: usize,
    pub embed: usize,
    /// Project the mean embedding onto the unit sphere.
    pub unit_mean: bool,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            input: 8,
            hidden: 32,
            feature: 32,
            classes: 4,
            head_hidden: 32,
            embed: 4,
            unit_mean: true,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.input,
            self.hidden,
            self.feature,
            self.classes,
            self.head_hidden,
            self.embed,
        ];
        if all.contains(&0) {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Encoder,
    Prediction,
    Representation,
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub name: &'static str,
    pub group: ParamGroup,
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl Layer {
    fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.weight_len()
    }

    fn len(&self) -> usize {
        self.weight_len() + self.fan_out
    }
}

const ENC0: usize = 0;
const ENC1: usize = 1;
const PRED: usize = 2;
const REP0: usize = 3;
const REP1: usize = 4;
const PROB0: usize = 5;
const PROB1: usize = 6;

fn build_layout(d: &ModelDims) -> Vec<Layer> {
    let shapes = [
        ("encoder.0", ParamGroup::Encoder, d.input, d.hidden),
        ("encoder.1", ParamGroup::Encoder, d.hidden, d.feature),
        ("pred_head", ParamGroup::Prediction, d.feature, d.classes),
        ("rep_head.0", ParamGroup::Representation, d.feature, d.head_hidden),
        ("rep_head.1", ParamGroup::Representation, d.head_hidden, d.embed),
        ("prob_head.0", ParamGroup::Probability, d.feature, d.head_hidden),
        ("prob_head.1", ParamGroup::Probability, d.head_hidden, d.embed),
    ];
    let mut offset = 0;
    shapes
        .iter()
        .map(|&(name, group, fan_in, fan_out)| {
            let layer = Layer {
                name,
                group,
                fan_in,
                fan_out,
                offset,
            };
            offset += layer.len();
            layer
        })
        .collect()
}

/// The four-head toy network.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    dims: ModelDims,
    layers: Vec<Layer>,
    params: Vec<f64>,
    clamp_variance: bool,
}

/// Everything the backward pass needs from one pixel's forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    x: Vec<f64>,
    h_pre: Vec<f64>,
    h: Vec<f64>,
    f: Vec<f64>,
    r_pre: Vec<f64>,
    r: Vec<f64>,
    /// l2 norm of the rep-head output before projection (unit_mean only)
    mu_norm: f64,
    p_pre: Vec<f64>,
    p: Vec<f64>,
    /// false where the log-variance hit a clamp bound
    var_live: Vec<bool>,
    pub logits: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl Activations {
    pub fn rep(&self) -> Result<ProbRep> {
        ProbRep::new(self.mu.clone(), self.sigma2.clone())
    }
}

fn affine(params: &[f64], l: &Layer, x: &[f64], y: &mut Vec<f64>) {
    y.clear();
    let w = &params[l.offset..l.offset + l.weight_len()];
    let b = &params[l.bias_offset()..l.bias_offset() + l.fan_out];
    for o in 0..l.fan_out {
        let row = &w[o * l.fan_in..(o + 1) * l.fan_in];
        let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        y.push(dot + b[o]);
    }
}

/// Accumulates parameter gradients of `y = W x + b` and, if requested, adds
/// `W^T dy` into `dx`.
fn affine_backward(params: &[f64], l: &Layer, x: &[f64], dy: &[f64], grads: &mut [f64], dx: Option<&mut [f64]>) {
    let (gw, gb) = grads[l.offset..l.offset + l.len()].split_at_mut(l.weight_len());
    for o in 0..l.fan_out {
        let d = dy[o];
        if d == 0.0 {
            continue;
        }
        gb[o] += d;
        let row = &mut gw[o * l.fan_in..(o + 1) * l.fan_in];
        for (g, xi) in row.iter_mut().zip(x) {
            *g += d * xi;
        }
    }
    if let Some(dx) = dx {
        let w = &params[l.offset..l.offset + l.weight_len()];
        for o in 0..l.fan_out {
            let d = dy[o];
            if d == 0.0 {
                continue;
            }
            let row = &w[o * l.fan_in..(o + 1) * l.fan_in];
            for (acc, wi) in dx.iter_mut().zip(row) {
                *acc += d * wi;
            }
        }
    }
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&a| a.max(0.0)).collect()
}

fn relu_backward(pre: &[f64], d: &mut [f64]) {
    for (g, &a) in d.iter_mut().zip(pre) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

impl ToyModel {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialisation of weights
    /// and biases from a seeded ChaCha stream.
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let layers = build_layout(&dims);
        let total = layers.last().map_or(0, |l| l.offset + l.len());
        let mut params = Vec::with_capacity(total);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &layers {
            let bound = 1.0 / (l.fan_in as f64).sqrt();
            for _ in 0..l.len() {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Ok(Self {
            dims,
            layers,
            params,
            clamp_variance: true,
        })
    }

    /// Model with every parameter set to zero.
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let layers = build_layout(&dims);
        let total = layers.last().map_or(0, |l| l.offset + l.len());
        Ok(Self {
            dims,
            layers,
            params: vec![0.0; total],
            clamp_variance: true,
        })
    }

    pub fn from_params(dims: ModelDims, params: Vec<f64>, clamp_variance: bool) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        if params.len() != m.params.len() {
            return Err(Error::DimensionMismatch {
                expected: m.params.len(),
                got: params.len(),
            });
        }
        m.params = params;
        m.clamp_variance = clamp_variance;
        Ok(m)
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access for tests and tooling. Training goes through
    /// [`backward_step`] and [`TeacherStudent::ema_update`].
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn clamp_variance(&self) -> bool {
        self.clamp_variance
    }

    /// Disabling the clamp lets log-variances run free; a variance that then
    /// leaves `[SIGMA2_MIN, SIGMA2_MAX]` makes `forward` fail.
    pub fn set_clamp_variance(&mut self, on: bool) {
        self.clamp_variance = on;
    }

    /// Human-readable location of flat parameter `i`, e.g.
    /// `prob_head.1.weight[3,7]`.
    pub fn param_path(&self, i: usize) -> String {
        for l in &self.layers {
            if i < l.offset || i >= l.offset + l.len() {
                continue;
            }
            let k = i - l.offset;
            return if k < l.weight_len() {
                format!("{}.weight[{},{}]", l.name, k / l.fan_in, k % l.fan_in)
            } else {
                format!("{}.bias[{}]", l.name, k - l.weight_len())
            };
        }
        format!("param[{i}]")
    }

    pub fn group_of(&self, i: usize) -> ParamGroup {
        self.layers
            .iter()
            .find(|l| i >= l.offset && i < l.offset + l.len())
            .map_or(ParamGroup::Encoder, |l| l.group)
    }

    fn encode(&self, x: &[f64], h_pre: &mut Vec<f64>, f: &mut Vec<f64>) -> Vec<f64> {
        affine(&self.params, &self.layers[ENC0], x, h_pre);
        let h = relu(h_pre);
        affine(&self.params, &self.layers[ENC1], &h, f);
        h
    }

    /// Full forward pass keeping intermediate activations.
    pub fn forward_cached(&self, x: &[f64]) -> Result<Activations> {
        if x.len() != self.dims.input {
            return Err(Error::DimensionMismatch {
                expected: self.dims.input,
                got: x.len(),
            });
        }
        let mut h_pre = Vec::new();
        let mut f = Vec::new();
        let h = self.encode(x, &mut h_pre, &mut f);

        let mut logits = Vec::new();
        affine(&self.params, &self.layers[PRED], &f, &mut logits);

        let mut r_pre = Vec::new();
        affine(&self.params, &self.layers[REP0], &f, &mut r_pre);
        let r = relu(&r_pre);
        let mut mu = Vec::new();
        affine(&self.params, &self.layers[REP1], &r, &mut mu);
        let mut mu_norm = 1.0;
        if self.dims.unit_mean {
            mu_norm = mu.iter().map(|v| v * v).sum::<f64>().sqrt().max(MU_NORM_FLOOR);
            mu.iter_mut().for_each(|v| *v /= mu_norm);
        }

        let mut p_pre = Vec::new();
        affine(&self.params, &self.layers[PROB0], &f, &mut p_pre);
        let p = relu(&p_pre);
        let mut log_var = Vec::new();
        affine(&self.params, &self.layers[PROB1], &p, &mut log_var);

        let (lo, hi) = (SIGMA2_MIN.ln(), SIGMA2_MAX.ln());
        let mut var_live = Vec::with_capacity(log_var.len());
        let mut sigma2 = Vec::with_capacity(log_var.len());
        for (dim, &v) in log_var.iter().enumerate() {
            if self.clamp_variance {
                var_live.push(v > lo && v < hi);
                sigma2.push(v.clamp(lo, hi).exp());
            } else {
                let s = v.exp();
                if !(SIGMA2_MIN..=SIGMA2_MAX).contains(&s) {
                    return Err(Error::InvalidVariance { dim, value: s });
                }
                var_live.push(true);
                sigma2.push(s);
            }
        }

        if logits.iter().chain(&mu).chain(&sigma2).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward activations".into()));
        }
        Ok(Activations {
            x: x.to_vec(),
            h_pre,
            h,
            f,
            r_pre,
            r,
            mu_norm,
            p_pre,
            p,
            var_live,
            logits,
            mu,
            sigma2,
        })
    }

    /// `(g(f(x)), N(h(f(x)), exp(clamp(p(f(x))))))`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ProbRep)> {
        let a = self.forward_cached(x)?;
        let rep = ProbRep::new(a.mu, a.sigma2)?;
        Ok((a.logits, rep))
    }

    /// Prediction-head logits only.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims.input {
            return Err(Error::DimensionMismatch {
                expected: self.dims.input,
                got: x.len(),
            });
        }
        let mut h_pre = Vec::new();
        let mut f = Vec::new();
        self.encode(x, &mut h_pre, &mut f);
        let mut logits = Vec::new();
        affine(&self.params, &self.layers[PRED], &f, &mut logits);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits".into()));
        }
        Ok(logits)
    }

    /// Back-propagates per-pixel output gradients into `grads`. Missing
    /// `d_mu` / `d_sigma2` mean the corresponding head receives nothing.
    pub fn backward(
        &self,
        acts: &Activations,
        d_logits: &[f64],
        d_mu: Option<&[f64]>,
        d_sigma2: Option<&[f64]>,
        grads: &mut Gradients,
    ) {
        let g = &mut grads.params;
        let mut d_f = vec![0.0; self.dims.feature];

        affine_backward(&self.params, &self.layers[PRED], &acts.f, d_logits, g, Some(&mut d_f));

        if let Some(d_mu) = d_mu {
            let projected;
            let d_mu = if self.dims.unit_mean {
                let dot: f64 = d_mu.iter().zip(&acts.mu).map(|(a, b)| a * b).sum();
                projected = d_mu
                    .iter()
                    .zip(&acts.mu)
                    .map(|(d, m)| (d - m * dot) / acts.mu_norm)
                    .collect::<Vec<f64>>();
                &projected[..]
            } else {
                d_mu
            };
            let mut d_r = vec![0.0; self.dims.head_hidden];
            affine_backward(&self.params, &self.layers[REP1], &acts.r, d_mu, g, Some(&mut d_r));
            relu_backward(&acts.r_pre, &mut d_r);
            affine_backward(&self.params, &self.layers[REP0], &acts.f, &d_r, g, Some(&mut d_f));
        }

        if let Some(d_s) = d_sigma2 {
            // d sigma2 / d log_var = sigma2 inside the clamp range, 0 outside
            let d_log_var: Vec<f64> = d_s
                .iter()
                .zip(&acts.sigma2)
                .zip(&acts.var_live)
                .map(|((d, s), &live)| if live { d * s } else { 0.0 })
                .collect();
            let mut d_p = vec![0.0; self.dims.head_hidden];
            affine_backward(&self.params, &self.layers[PROB1], &acts.p, &d_log_var, g, Some(&mut d_p));
            relu_backward(&acts.p_pre, &mut d_p);
            affine_backward(&self.params, &self.layers[PROB0], &acts.f, &d_p, g, Some(&mut d_f));
        }

        let mut d_h = vec![0.0; self.dims.hidden];
        affine_backward(&self.params, &self.layers[ENC1], &acts.h, &d_f, g, Some(&mut d_h));
        relu_backward(&acts.h_pre, &mut d_h);
        affine_backward(&self.params, &self.layers[ENC0], &acts.x, &d_h, g, None);
    }
}

/// Parameter gradients, laid out like [`ToyModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    params: Vec<f64>,
}

impl Gradients {
    pub fn zeros_for(model: &ToyModel) -> Self {
        Self {
            params: vec![0.0; model.num_params()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.params
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn scale(&mut self, k: f64) {
        self.params.iter_mut().for_each(|g| *g *= k);
    }

    /// Sum of squared gradients over one parameter group.
    pub fn group_sq_norm(&self, model: &ToyModel, group: ParamGroup) -> f64 {
        model
            .layers()
            .iter()
            .filter(|l| l.group == group)
            .flat_map(|l| &self.params[l.offset..l.offset + l.len()])
            .map(|g| g * g)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub lr_base: f64,
    /// Learning-rate multiplier for the probability head; below 1 this is
    /// soft freezing.
    pub lr_prob_scale: f64,
    pub ema_decay: f64,
    /// Pixels drawn per step from each of the labeled and unlabeled streams.
    pub pixels_per_stream: usize,
    pub steps_per_epoch: usize,
    /// Strength of the jitter applied to unlabeled pixels seen by the student.
    pub augment_strength: f64,
    pub clamp_variance: bool,
    /// Rescale the whole gradient to at most this l2 norm before the step;
    /// 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr_base: 0.02,
            lr_prob_scale: 0.01,
            ema_decay: 0.99,
            pixels_per_stream: 256,
            steps_per_epoch: 20,
            augment_strength: 0.5,
            clamp_variance: true,
            grad_clip: 10.0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_base > 0.0 && self.lr_base.is_finite()) {
            return Err(Error::Config("lr_base must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lr_prob_scale) {
            return Err(Error::Config("lr_prob_scale must lie in [0, 1]".into()));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::Config("grad_clip must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config("ema_decay must lie in [0, 1)".into()));
        }
        if self.pixels_per_stream == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Config("batch sizes and steps must be positive".into()));
        }
        if !(self.augment_strength >= 0.0) {
            return Err(Error::Config("augment_strength must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One SGD step; probability-head parameters use `lr_base * lr_prob_scale`.
/// The gradient is first rescaled to norm `grad_clip` if it is longer.
/// Nothing is written if any gradient is non-finite.
pub fn backward_step(model: &mut ToyModel, grads: &Gradients, cfg: &OptimConfig) -> Result<()> {
    if grads.params.len() != model.params.len() {
        return Err(Error::DimensionMismatch {
            expected: model.params.len(),
            got: grads.params.len(),
        });
    }
    if let Some(i) = grads.params.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(model.param_path(i)));
    }
    let norm = grads.params.iter().map(|g| g * g).sum::<f64>().sqrt();
    let shrink = if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
        cfg.grad_clip / norm
    } else {
        1.0
    };
    for l in &model.layers {
        let lr = match l.group {
            ParamGroup::Probability => cfg.lr_base * cfg.lr_prob_scale,
            _ => cfg.lr_base,
        };
        if lr == 0.0 {
            continue;
        }
        let range = l.offset..l.offset + l.len();
        for (p, g) in model.params[range.clone()].iter_mut().zip(&grads.params[range]) {
            *p -= lr * shrink * g;
        }
    }
    Ok(())
}

/// Student network plus its exponential-moving-average teacher.
#[derive(Debug, Clone)]
pub struct TeacherStudent {
    pub student: ToyModel,
    teacher: ToyModel,
}

impl TeacherStudent {
    /// The teacher starts as an exact copy of the student.
    pub fn new(student: ToyModel) -> Self {
        let teacher = student.clone();
        Self { student, teacher }
    }

    pub fn teacher(&self) -> &ToyModel {
        &self.teacher
    }

    /// `teacher <- m * teacher + (1 - m) * student` for every parameter.
    pub fn ema_update(&mut self, m: f64) -> Result<()> {
        if !(0.0..1.0).contains(&m) {
            return Err(Error::Config(format!("ema decay {m} outside [0, 1)")));
        }
        for (t, s) in self.teacher.params.iter_mut().zip(&self.student.params) {
            *t = m * *t + (1.0 - m) * s;
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Argmax class (lowest index on ties) and its softmax probability.
pub fn confident_class(logits: &[f64]) -> (ClassId, f64) {
    let probs = softmax(logits);
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    (best, probs[best])
}

/// Teacher pseudo-label and confidence for one pixel.
pub fn pseudo_label(teacher: &ToyModel, x: &[f64]) -> Result<(ClassId, f64)> {
    Ok(confident_class(&teacher.logits(x)?))
}

/// Cross-entropy `-log softmax(logits)[target]` and its gradient
/// `softmax(logits) - onehot(target)`.
pub fn ce_loss(logits: &[f64], target: ClassId) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::InvalidClass {
            class: target,
            num_classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss.max(0.0), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelDims {
        ModelDims {
            input: 4,
            hidden: 8,
            feature: 8,
            classes: 3,
            head_hidden: 8,
            embed: 4,
            unit_mean: false,
        }
    }

    #[test]
    fn zero_model_forward() {
        let m = ToyModel::zeros(tiny()).unwrap();
        let (logits, rep) = m.forward(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
        assert!(rep.mu().iter().all(|&v| v == 0.0));
        assert!(rep.sigma2().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let m = ToyModel::new(tiny(), 5).unwrap();
        let x = [0.1, 0.2, -0.3, 0.9];
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
        assert_eq!(m, ToyModel::new(tiny(), 5).unwrap());
        assert_ne!(m, ToyModel::new(tiny(), 6).unwrap());
    }

    #[test]
    fn forward_rejects_wrong_input() {
        let m = ToyModel::new(tiny(), 5).unwrap();
        assert!(m.forward(&[0.0; 3]).is_err());
    }

    #[test]
    fn variance_clamped_to_bounds() {
        let mut m = ToyModel::zeros(tiny()).unwrap();
        let bias = m.layers()[PROB1].bias_offset();
        m.params_mut()[bias] = 100.0;
        m.params_mut()[bias + 1] = -100.0;
        let (_, rep) = m.forward(&[0.0; 4]).unwrap();
        assert!((rep.sigma2()[0] - SIGMA2_MAX).abs() / SIGMA2_MAX < 1e-12);
        assert!((rep.sigma2()[1] - SIGMA2_MIN).abs() / SIGMA2_MIN < 1e-12);
        m.set_clamp_variance(false);
        assert!(matches!(m.forward(&[0.0; 4]), Err(Error::InvalidVariance { .. })));
    }

    #[test]
    fn param_paths() {
        let m = ToyModel::zeros(tiny()).unwrap();
        assert_eq!(m.param_path(0), "encoder.0.weight[0,0]");
        assert_eq!(m.param_path(5), "encoder.0.weight[1,1]");
        assert_eq!(m.param_path(32), "encoder.0.bias[0]");
        assert_eq!(m.param_path(m.num_params() - 1), "prob_head.1.bias[3]");
        assert_eq!(m.group_of(m.num_params() - 1), ParamGroup::Probability);
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut m = ToyModel::new(tiny(), 1).unwrap();
        let before = m.clone();
        backward_step(&mut m, &Gradients::zeros_for(&before), &OptimConfig::default()).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn soft_freezing_rates() {
        let mut m = ToyModel::new(tiny(), 1).unwrap();
        let before = m.clone();
        let mut g = Gradients::zeros_for(&m);
        g.as_mut_slice().iter_mut().for_each(|v| *v = 1.0);
        let cfg = OptimConfig {
            lr_base: 0.1,
            lr_prob_scale: 0.01,
            grad_clip: 0.0,
            ..Default::default()
        };
        backward_step(&mut m, &g, &cfg).unwrap();
        for i in 0..m.num_params() {
            let delta = before.params()[i] - m.params()[i];
            let expect = if m.group_of(i) == ParamGroup::Probability { 0.001 } else { 0.1 };
            assert!((delta - expect).abs() < 1e-12, "{}", m.param_path(i));
        }
        let mut full = before.clone();
        let cfg = OptimConfig {
            lr_base: 0.1,
            lr_prob_scale: 1.0,
            grad_clip: 0.0,
            ..Default::default()
        };
        backward_step(&mut full, &g, &cfg).unwrap();
        assert!(full.params().iter().zip(before.params()).all(|(a, b)| (b - a - 0.1).abs() < 1e-12));
    }

    #[test]
    fn clipping_bounds_the_step() {
        let before = ToyModel::new(tiny(), 1).unwrap();
        let mut m = before.clone();
        let mut g = Gradients::zeros_for(&m);
        g.as_mut_slice().iter_mut().for_each(|v| *v = 3.0);
        let cfg = OptimConfig {
            lr_base: 1.0,
            lr_prob_scale: 1.0,
            grad_clip: 2.0,
            ..Default::default()
        };
        backward_step(&mut m, &g, &cfg).unwrap();
        let step: f64 = m.params().iter().zip(before.params()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!((step - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut m = ToyModel::new(tiny(), 1).unwrap();
        let mut g = Gradients::zeros_for(&m);
        let last = m.num_params() - 1;
        g.as_mut_slice()[last] = f64::NAN;
        let err = backward_step(&mut m, &g, &OptimConfig::default()).unwrap_err();
        assert!(err.to_string().contains("prob_head.1.bias[3]"), "{err}");
    }

    #[test]
    fn ema_scalar_cases() {
        let mut student = ToyModel::zeros(tiny()).unwrap();
        let mut ts = TeacherStudent::new(student.clone());
        ts.teacher.params.iter_mut().for_each(|p| *p = 1.0);
        ts.ema_update(0.99).unwrap();
        assert!(ts.teacher().params().iter().all(|&p| (p - 0.99).abs() < 1e-15));

        student.params_mut().iter_mut().for_each(|p| *p = 0.25);
        ts.student = student;
        ts.ema_update(0.0).unwrap();
        assert_eq!(ts.teacher().params(), ts.student.params());
        assert!(ts.ema_update(1.0).is_err());
    }

    #[test]
    fn ema_geometric_decay() {
        let student = ToyModel::new(tiny(), 3).unwrap();
        let mut ts = TeacherStudent::new(student.clone());
        ts.teacher.params.iter_mut().for_each(|p| *p += 2.0);
        let m: f64 = 0.9;
        for _ in 0..10 {
            ts.ema_update(m).unwrap();
        }
        let expect = m.powi(10) * 2.0;
        for (t, s) in ts.teacher().params().iter().zip(student.params()) {
            assert!(((t - s) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_label_cases() {
        let (c, q) = confident_class(&[2.0, 0.0, 0.0]);
        assert_eq!(c, 0);
        let e2 = 2f64.exp();
        assert!((q - e2 / (e2 + 2.0)).abs() < 1e-15);
        assert!((q - 0.786_986).abs() < 1e-6);

        let (c, q) = confident_class(&[0.3; 4]);
        assert_eq!(c, 0);
        assert!((q - 0.25).abs() < 1e-15);

        let a = confident_class(&[0.1, 1.7, -0.4]);
        let b = confident_class(&[5.1, 6.7, 4.6]);
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).abs() < 1e-15);
    }

    #[test]
    fn ce_loss_cases() {
        let (l, g) = ce_loss(&[0.0; 4], 2).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        assert!((g[2] + 0.75).abs() < 1e-15);
        let (l, _) = ce_loss(&[50.0, 0.0, 0.0], 0).unwrap();
        assert!(l < 1e-6);
        assert!(matches!(ce_loss(&[0.0; 3], 3), Err(Error::InvalidClass { .. })));
    }
}
