//! Prototype contrastive losses, the contrastive-weight scheduler and the
//! total-loss assembly.
//!
//! Both contrastive losses share one softmax-contrast skeleton: every anchor
//! is scored against its own class prototype (the positive) and against a
//! list of sampled representations from other classes (the negatives). The
//! probabilistic variant scores with the mutual likelihood score over
//! Gaussian representations and distribution prototypes; the deterministic
//! baseline scores with negative squared l2 distance over plain vectors and
//! point prototypes.
//!
//! Prototypes are constants inside the loss: no gradient flows into them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob_embed::{mls_grad_accumulate, mls_unchecked, DistPrototype, PointPrototype, ProbRep};
use crate::ClassId;

/// Gradient of a loss with respect to one pooled representation.
/// `d_sigma2` is empty for deterministic representations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RepGrad {
    pub d_mu: Vec<f64>,
    pub d_sigma2: Vec<f64>,
}

/// Scoring rule of a representation space.
pub trait ContrastSpace {
    type Rep: Clone;
    type Proto: Clone;

    fn rep_dim(rep: &Self::Rep) -> usize;
    fn proto_dim(proto: &Self::Proto) -> usize;
    fn proto_class(proto: &Self::Proto) -> ClassId;
    fn zero_grad(rep: &Self::Rep) -> RepGrad;

    fn score_proto(rep: &Self::Rep, proto: &Self::Proto) -> f64;
    fn score_pair(a: &Self::Rep, b: &Self::Rep) -> f64;

    /// Adds `scale * d score_proto / d rep` to `g`.
    fn grad_proto(rep: &Self::Rep, proto: &Self::Proto, scale: f64, g: &mut RepGrad);
    /// Adds `scale * d score_pair / d a` to `ga` and `.. / d b` to `gb`.
    fn grad_pair(a: &Self::Rep, b: &Self::Rep, scale: f64, ga: &mut RepGrad, gb: &mut RepGrad);
}

/// Gaussian representations scored with the mutual likelihood score.
#[derive(Debug, Clone, Copy)]
pub struct Probabilistic;

/// Plain vectors scored with negative squared l2 distance.
#[derive(Debug, Clone, Copy)]
pub struct Deterministic;

impl ContrastSpace for Probabilistic {
    type Rep = ProbRep;
    type Proto = DistPrototype;

    fn rep_dim(rep: &ProbRep) -> usize {
        rep.mu().len()
    }
    fn proto_dim(proto: &DistPrototype) -> usize {
        proto.mu_hat().len()
    }
    fn proto_class(proto: &DistPrototype) -> ClassId {
        proto.class_id()
    }
    fn zero_grad(rep: &ProbRep) -> RepGrad {
        let d = rep.mu().len();
        RepGrad {
            d_mu: vec![0.0; d],
            d_sigma2: vec![0.0; d],
        }
    }

    fn score_proto(rep: &ProbRep, proto: &DistPrototype) -> f64 {
        mls_unchecked(rep.mu(), rep.sigma2(), proto.mu_hat(), proto.sigma2_hat())
    }
    fn score_pair(a: &ProbRep, b: &ProbRep) -> f64 {
        mls_unchecked(a.mu(), a.sigma2(), b.mu(), b.sigma2())
    }

    fn grad_proto(rep: &ProbRep, proto: &DistPrototype, scale: f64, g: &mut RepGrad) {
        let d = rep.mu().len();
        let mut sink_mu = vec![0.0; d];
        let mut sink_s = vec![0.0; d];
        mls_grad_accumulate(
            rep.mu(),
            rep.sigma2(),
            proto.mu_hat(),
            proto.sigma2_hat(),
            scale,
            &mut g.d_mu,
            &mut g.d_sigma2,
            &mut sink_mu,
            &mut sink_s,
        );
    }
    fn grad_pair(a: &ProbRep, b: &ProbRep, scale: f64, ga: &mut RepGrad, gb: &mut RepGrad) {
        mls_grad_accumulate(
            a.mu(),
            a.sigma2(),
            b.mu(),
            b.sigma2(),
            scale,
            &mut ga.d_mu,
            &mut ga.d_sigma2,
            &mut gb.d_mu,
            &mut gb.d_sigma2,
        );
    }
}

fn neg_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    -a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

impl ContrastSpace for Deterministic {
    type Rep = Vec<f64>;
    type Proto = PointPrototype;

    fn rep_dim(rep: &Vec<f64>) -> usize {
        rep.len()
    }
    fn proto_dim(proto: &PointPrototype) -> usize {
        proto.mu().len()
    }
    fn proto_class(proto: &PointPrototype) -> ClassId {
        proto.class_id()
    }
    fn zero_grad(rep: &Vec<f64>) -> RepGrad {
        RepGrad {
            d_mu: vec![0.0; rep.len()],
            d_sigma2: Vec::new(),
        }
    }

    fn score_proto(rep: &Vec<f64>, proto: &PointPrototype) -> f64 {
        neg_sq_dist(rep, proto.mu())
    }
    fn score_pair(a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        neg_sq_dist(a, b)
    }

    fn grad_proto(rep: &Vec<f64>, proto: &PointPrototype, scale: f64, g: &mut RepGrad) {
        for (l, (x, y)) in rep.iter().zip(proto.mu()).enumerate() {
            g.d_mu[l] -= scale * 2.0 * (x - y);
        }
    }
    fn grad_pair(a: &Vec<f64>, b: &Vec<f64>, scale: f64, ga: &mut RepGrad, gb: &mut RepGrad) {
        for l in 0..a.len() {
            let diff = a[l] - b[l];
            ga.d_mu[l] -= scale * 2.0 * diff;
            gb.d_mu[l] += scale * 2.0 * diff;
        }
    }
}

/// Anchors, their negatives and the class prototypes for one loss
/// evaluation.
///
/// Representations live in a shared pool; anchors and negatives refer to pool
/// entries by index, so a representation used both as an anchor and as
/// someone else's negative accumulates a single gradient.
#[derive(Debug, Clone)]
pub struct ContrastBatch<S: ContrastSpace = Probabilistic> {
    reps: Vec<S::Rep>,
    classes: Vec<ClassId>,
    anchors: Vec<usize>,
    negatives: Vec<Vec<usize>>,
    prototypes: BTreeMap<ClassId, S::Proto>,
    temperature: f64,
}

/// Batch for the deterministic l2 baseline.
pub type PointContrastBatch = ContrastBatch<Deterministic>;

impl<S: ContrastSpace> ContrastBatch<S> {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self {
            reps: Vec::new(),
            classes: Vec::new(),
            anchors: Vec::new(),
            negatives: Vec::new(),
            prototypes: BTreeMap::new(),
            temperature,
        })
    }

    fn dim(&self) -> Option<usize> {
        self.reps.first().map(S::rep_dim)
    }

    /// Adds a representation to the pool and returns its index.
    pub fn push_rep(&mut self, rep: S::Rep, class: ClassId) -> Result<usize> {
        if let Some(d) = self.dim() {
            let got = S::rep_dim(&rep);
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        self.reps.push(rep);
        self.classes.push(class);
        Ok(self.reps.len() - 1)
    }

    pub fn insert_prototype(&mut self, proto: S::Proto) -> Result<()> {
        if let Some(d) = self.dim() {
            let got = S::proto_dim(&proto);
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        self.prototypes.insert(S::proto_class(&proto), proto);
        Ok(())
    }

    /// Registers pool entry `anchor` as an anchor contrasted against the
    /// pool entries in `negatives`, none of which may share its class.
    pub fn add_anchor(&mut self, anchor: usize, negatives: Vec<usize>) -> Result<()> {
        let len = self.reps.len();
        if anchor >= len {
            return Err(Error::IndexOutOfRange { index: anchor, len });
        }
        let class = self.classes[anchor];
        for &n in &negatives {
            if n >= len {
                return Err(Error::IndexOutOfRange { index: n, len });
            }
            if self.classes[n] == class {
                return Err(Error::NegativeSameClass { anchor, class });
            }
        }
        self.anchors.push(anchor);
        self.negatives.push(negatives);
        Ok(())
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn reps(&self) -> &[S::Rep] {
        &self.reps
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn negatives_of(&self, anchor_slot: usize) -> &[usize] {
        &self.negatives[anchor_slot]
    }

    pub fn prototypes(&self) -> &BTreeMap<ClassId, S::Proto> {
        &self.prototypes
    }

    /// Loss value only.
    pub fn loss(&self) -> Result<f64> {
        self.evaluate(false).map(|o| o.loss)
    }

    /// Loss and gradient with respect to every pooled representation.
    pub fn loss_and_grad(&self) -> Result<ContrastOutput> {
        self.evaluate(true)
    }

    fn evaluate(&self, with_grad: bool) -> Result<ContrastOutput> {
        let mut grads: Vec<RepGrad> = if with_grad {
            self.reps.iter().map(S::zero_grad).collect()
        } else {
            Vec::new()
        };
        if self.anchors.is_empty() {
            return Ok(ContrastOutput { loss: 0.0, grads });
        }

        let mut per_class: BTreeMap<ClassId, usize> = BTreeMap::new();
        for &a in &self.anchors {
            let class = self.classes[a];
            if !self.prototypes.contains_key(&class) {
                return Err(Error::MissingPrototype(class));
            }
            *per_class.entry(class).or_default() += 1;
        }
        let n_classes = per_class.len() as f64;

        let tau = self.temperature;
        let mut loss = 0.0;
        let mut neg_scores = Vec::new();
        for (slot, &a) in self.anchors.iter().enumerate() {
            let class = self.classes[a];
            let weight = 1.0 / (n_classes * per_class[&class] as f64);
            let anchor = &self.reps[a];
            let proto = &self.prototypes[&class];
            let negs = &self.negatives[slot];

            let pos = S::score_proto(anchor, proto);
            neg_scores.clear();
            neg_scores.extend(negs.iter().map(|&n| S::score_pair(anchor, &self.reps[n])));
            let term = contrast_term(pos, &neg_scores, tau);
            loss += weight * term.loss;

            if with_grad {
                S::grad_proto(anchor, proto, weight * term.d_pos, &mut grads[a]);
                for (&n, &dn) in negs.iter().zip(&term.d_negs) {
                    let (ga, gn) = two_mut(&mut grads, a, n);
                    S::grad_pair(anchor, &self.reps[n], weight * dn, ga, gn);
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("contrastive loss".into()));
        }
        Ok(ContrastOutput { loss, grads })
    }
}

fn two_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (lo, hi) = v.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(i);
        (&mut hi[0], &mut lo[j])
    }
}

/// Loss value plus one gradient per pooled representation (empty when only
/// the value was requested).
#[derive(Debug, Clone)]
pub struct ContrastOutput {
    pub loss: f64,
    pub grads: Vec<RepGrad>,
}

/// One anchor's softmax-contrast term and its derivatives with respect to the
/// raw (un-tempered) scores.
#[derive(Debug, Clone)]
pub struct ContrastTerm {
    pub loss: f64,
    pub d_pos: f64,
    pub d_negs: Vec<f64>,
}

/// `-log(exp(pos/tau) / (exp(pos/tau) + sum_j exp(neg_j/tau)))`, evaluated
/// with a log-sum-exp shift.
pub fn contrast_term(pos: f64, negs: &[f64], tau: f64) -> ContrastTerm {
    let pos_t = pos / tau;
    let max = negs.iter().map(|s| s / tau).fold(pos_t, f64::max);
    let e_pos = (pos_t - max).exp();
    let e_negs: Vec<f64> = negs.iter().map(|s| (s / tau - max).exp()).collect();
    let denom = e_pos + e_negs.iter().sum::<f64>();
    let loss = denom.ln() - (pos_t - max);
    let p_pos = e_pos / denom;
    ContrastTerm {
        loss: loss.max(0.0),
        d_pos: (p_pos - 1.0) / tau,
        d_negs: e_negs.iter().map(|e| e / denom / tau).collect(),
    }
}

/// Probabilistic contrastive loss with mutual-likelihood scoring.
pub fn prcl_loss(batch: &ContrastBatch<Probabilistic>) -> Result<ContrastOutput> {
    batch.loss_and_grad()
}

/// Deterministic infoNCE baseline with `s(u, v) = -||u - v||^2`.
pub fn infonce_l2_loss(batch: &ContrastBatch<Deterministic>) -> Result<ContrastOutput> {
    batch.loss_and_grad()
}

/// Decay schedule for the contrastive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub lambda_c0: f64,
    pub alpha: f64,
    pub total_epochs: usize,
    /// When false the weight stays at `lambda_c0` for the whole run.
    pub enabled: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            lambda_c0: 1.0,
            alpha: -2.0,
            total_epochs: 40,
            enabled: true,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_c0 >= 0.0 && self.lambda_c0.is_finite()) {
            return Err(Error::Config("lambda_c0 must be nonnegative".into()));
        }
        if !(self.alpha < 0.0) {
            return Err(Error::Config("scheduler alpha must be negative".into()));
        }
        if self.total_epochs == 0 {
            return Err(Error::Config("scheduler total_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// `lambda_c(t) = lambda_c0 * exp(alpha * (t / T)^2)`.
pub fn lambda_c(t: usize, cfg: &SchedulerConfig) -> Result<f64> {
    cfg.validate()?;
    if t > cfg.total_epochs {
        return Err(Error::Config(format!(
            "epoch {t} outside scheduler range 0..={}",
            cfg.total_epochs
        )));
    }
    if !cfg.enabled {
        return Ok(cfg.lambda_c0);
    }
    let r = t as f64 / cfg.total_epochs as f64;
    Ok(cfg.lambda_c0 * (cfg.alpha * r * r).exp())
}

/// Fraction of confidences strictly above `delta_u`.
pub fn lambda_u(confidences: &[f64], delta_u: f64) -> f64 {
    if confidences.is_empty() {
        return 0.0;
    }
    let above = confidences.iter().filter(|&&c| c > delta_u).count();
    above as f64 / confidences.len() as f64
}

/// `L_s + lambda_u * L_u + lambda_c * L_contrast`.
pub fn total_loss(l_s: f64, l_u: f64, l_c: f64, lambda_u: f64, lambda_c: f64) -> Result<f64> {
    for (name, v) in [("L_s", l_s), ("L_u", l_u), ("L_contrast", l_c)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    if !(0.0..=1.0).contains(&lambda_u) {
        return Err(Error::Config(format!("lambda_u {lambda_u} outside [0, 1]")));
    }
    if !(lambda_c >= 0.0 && lambda_c.is_finite()) {
        return Err(Error::Config(format!("lambda_c {lambda_c} must be nonnegative")));
    }
    Ok(l_s + lambda_u * l_u + lambda_c * l_c)
}
