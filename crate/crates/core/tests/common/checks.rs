//! Randomised comparisons of library outputs against the oracles in the
//! parent module. Each check returns the worst error it saw.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use prcl::contrastive::{ContrastBatch, Deterministic, Probabilistic};
use prcl::data::{generate, DatasetSpec};
use prcl::harness::{Method, RunConfig, Trainer};
use prcl::model::{ce_loss, ModelDims};
use prcl::{fuse_prototype, mls, mls_grad, point_prototype, ClassId, ProbRep};

use super::{central_diff, central_diff4, contrast_scalar, fuse_scalar, grad_err, mls_scalar, random_rep, rel_err, rng};

/// Pool entries, their classes, and anchors with their negatives.
pub struct Layout {
    pub reps: Vec<ProbRep>,
    pub classes: Vec<ClassId>,
    pub anchors: Vec<(usize, Vec<usize>)>,
}

pub fn random_layout(rng: &mut ChaCha8Rng, d: usize) -> Layout {
    let n = rng.random_range(6..14);
    let reps: Vec<ProbRep> = (0..n).map(|_| random_rep(rng, d)).collect();
    let mut classes: Vec<ClassId> = (0..n).map(|i| i % 3).collect();
    classes.swap(0, n - 1);
    let mut anchors = Vec::new();
    for a in 0..n {
        if rng.random_bool(0.4) || a == 0 {
            let negs: Vec<usize> = (0..n)
                .filter(|&j| classes[j] != classes[a] && rng.random_bool(0.6))
                .collect();
            anchors.push((a, negs));
        }
    }
    Layout { reps, classes, anchors }
}

/// Per-class mean over that class's anchors, then mean over classes, of the
/// scalar contrast.
pub fn reference_loss(
    layout: &Layout,
    score_proto: &dyn Fn(usize) -> f64,
    score_pair: &dyn Fn(usize, usize) -> f64,
    tau: f64,
) -> f64 {
    let mut by_class: BTreeMap<ClassId, Vec<f64>> = BTreeMap::new();
    for (a, negs) in &layout.anchors {
        let neg_scores: Vec<f64> = negs.iter().map(|&j| score_pair(*a, j)).collect();
        by_class
            .entry(layout.classes[*a])
            .or_default()
            .push(contrast_scalar(score_proto(*a), &neg_scores, tau));
    }
    let per_class: Vec<f64> = by_class.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Worst {
    pub value: f64,
    pub grad: f64,
    pub cases: usize,
}

impl Worst {
    fn value(&mut self, e: f64) {
        self.value = self.value.max(e);
    }

    fn grad(&mut self, e: f64) {
        self.grad = self.grad.max(e);
    }
}

pub fn mls_value(cases: usize, seed: u64) -> Worst {
    let mut rng = rng(seed);
    let mut w = Worst::default();
    for _ in 0..cases {
        let d = rng.random_range(1..9);
        let a = random_rep(&mut rng, d);
        let b = random_rep(&mut rng, d);
        let want = mls_scalar(a.mu(), a.sigma2(), b.mu(), b.sigma2());
        w.value(rel_err(mls(&a, &b).unwrap(), want));
        w.cases += 1;
    }
    w
}

pub fn mls_gradient(cases: usize, seed: u64) -> Worst {
    let mut rng = rng(seed);
    let mut w = Worst::default();
    for _ in 0..cases {
        let d = rng.random_range(1..6);
        let a = random_rep(&mut rng, d);
        let b = random_rep(&mut rng, d);
        let g = mls_grad(&a, &b).unwrap();
        for l in 0..d {
            let mut f = |x: &[f64]| mls_scalar(x, a.sigma2(), b.mu(), b.sigma2());
            w.grad(grad_err(g.d_mu_a[l], central_diff4(&mut f, a.mu(), l, 1e-3), 1e-4));
            let mut f = |x: &[f64]| mls_scalar(a.mu(), x, b.mu(), b.sigma2());
            let h = 1e-3 * a.sigma2()[l];
            w.grad(grad_err(g.d_sigma2_a[l], central_diff4(&mut f, a.sigma2(), l, h), 1e-4));
            let mut f = |x: &[f64]| mls_scalar(a.mu(), a.sigma2(), x, b.sigma2());
            w.grad(grad_err(g.d_mu_b[l], central_diff4(&mut f, b.mu(), l, 1e-3), 1e-4));
            let mut f = |x: &[f64]| mls_scalar(a.mu(), a.sigma2(), b.mu(), x);
            let h = 1e-3 * b.sigma2()[l];
            w.grad(grad_err(g.d_sigma2_b[l], central_diff4(&mut f, b.sigma2(), l, h), 1e-4));
        }
        w.cases += 1;
    }
    w
}

/// Batch fusion against the closed form, permutation invariance, and
/// sequential updates against batch fusion.
pub fn fusion(cases: usize, seed: u64) -> Worst {
    use rand::seq::SliceRandom;
    let mut rng = rng(seed);
    let mut w = Worst::default();
    let cmp = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| rel_err(*a, *b)).fold(0.0, f64::max);
    for _ in 0..cases {
        let d = rng.random_range(1..6);
        let n = rng.random_range(1..10);
        let obs: Vec<ProbRep> = (0..n).map(|_| random_rep(&mut rng, d)).collect();
        let raw: Vec<(Vec<f64>, Vec<f64>)> = obs.iter().map(|o| (o.mu().to_vec(), o.sigma2().to_vec())).collect();
        let (mu, s2) = fuse_scalar(&raw);
        let p = fuse_prototype(&obs, 1).unwrap();
        w.value(cmp(p.mu_hat(), &mu).max(cmp(p.sigma2_hat(), &s2)));

        let mut shuffled = obs.clone();
        shuffled.shuffle(&mut rng);
        let q = fuse_prototype(&shuffled, 1).unwrap();
        w.value(cmp(p.mu_hat(), q.mu_hat()).max(cmp(p.sigma2_hat(), q.sigma2_hat())));

        let mut seq = fuse_prototype(&obs[..1], 1).unwrap();
        for z in &obs[1..] {
            seq = seq.update(z).unwrap();
        }
        w.value(cmp(p.mu_hat(), seq.mu_hat()).max(cmp(p.sigma2_hat(), seq.sigma2_hat())));
        w.cases += 1;
    }
    w
}

pub fn prcl(cases: usize, seed: u64) -> Worst {
    let mut rng = rng(seed);
    let mut w = Worst::default();
    for _ in 0..cases {
        let d = rng.random_range(1..5);
        let tau = rng.random_range(0.3..2.0);
        let layout = random_layout(&mut rng, d);
        let mut protos = BTreeMap::new();
        for c in 0..3 {
            let members = layout.reps.iter().zip(&layout.classes).filter(|(_, k)| **k == c).map(|(r, _)| r);
            protos.insert(c, fuse_prototype(members, c).unwrap());
        }
        let mut batch = ContrastBatch::<Probabilistic>::new(tau).unwrap();
        for (r, &c) in layout.reps.iter().zip(&layout.classes) {
            batch.push_rep(r.clone(), c).unwrap();
        }
        for p in protos.values() {
            batch.insert_prototype(p.clone()).unwrap();
        }
        for (a, negs) in &layout.anchors {
            batch.add_anchor(*a, negs.clone()).unwrap();
        }
        let out = prcl::prcl_loss(&batch).unwrap();

        let n = layout.reps.len();
        let mut flat: Vec<f64> = Vec::new();
        for r in &layout.reps {
            flat.extend_from_slice(r.mu());
            flat.extend_from_slice(r.sigma2());
        }
        let mut loss_at = |x: &[f64]| {
            let mus: Vec<&[f64]> = (0..n).map(|i| &x[i * 2 * d..i * 2 * d + d]).collect();
            let sig: Vec<&[f64]> = (0..n).map(|i| &x[i * 2 * d + d..(i + 1) * 2 * d]).collect();
            let sp = |a: usize| {
                let p = &protos[&layout.classes[a]];
                mls_scalar(mus[a], sig[a], p.mu_hat(), p.sigma2_hat())
            };
            let spair = |a: usize, j: usize| mls_scalar(mus[a], sig[a], mus[j], sig[j]);
            reference_loss(&layout, &sp, &spair, tau)
        };
        w.value(rel_err(out.loss, loss_at(&flat)));
        for i in 0..n {
            for l in 0..d {
                let k = i * 2 * d + l;
                let num = central_diff4(&mut loss_at, &flat, k, 1e-3);
                w.grad(grad_err(out.grads[i].d_mu[l], num, 1e-4));
                let k = i * 2 * d + d + l;
                let num = central_diff4(&mut loss_at, &flat, k, 1e-3 * flat[k]);
                w.grad(grad_err(out.grads[i].d_sigma2[l], num, 1e-4));
            }
        }
        w.cases += 1;
    }
    w
}

pub fn infonce(cases: usize, seed: u64) -> Worst {
    let mut rng = rng(seed);
    let mut w = Worst::default();
    for _ in 0..cases {
        let d = rng.random_range(1..5);
        let tau = rng.random_range(0.5..4.0);
        let layout = random_layout(&mut rng, d);
        let mut protos = BTreeMap::new();
        for c in 0..3 {
            let members = layout.reps.iter().zip(&layout.classes).filter(|(_, k)| **k == c).map(|(r, _)| r.mu());
            protos.insert(c, point_prototype(members, c).unwrap());
        }
        let mut batch = ContrastBatch::<Deterministic>::new(tau).unwrap();
        for (r, &c) in layout.reps.iter().zip(&layout.classes) {
            batch.push_rep(r.mu().to_vec(), c).unwrap();
        }
        for p in protos.values() {
            batch.insert_prototype(p.clone()).unwrap();
        }
        for (a, negs) in &layout.anchors {
            batch.add_anchor(*a, negs.clone()).unwrap();
        }
        let out = prcl::infonce_l2_loss(&batch).unwrap();

        let n = layout.reps.len();
        let flat: Vec<f64> = layout.reps.iter().flat_map(|r| r.mu().to_vec()).collect();
        let sq = |u: &[f64], v: &[f64]| -u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut loss_at = |x: &[f64]| {
            let mus: Vec<&[f64]> = (0..n).map(|i| &x[i * d..(i + 1) * d]).collect();
            let sp = |a: usize| sq(mus[a], protos[&layout.classes[a]].mu());
            let spair = |a: usize, j: usize| sq(mus[a], mus[j]);
            reference_loss(&layout, &sp, &spair, tau)
        };
        w.value(rel_err(out.loss, loss_at(&flat)));
        for i in 0..n {
            assert!(out.grads[i].d_sigma2.is_empty());
            for l in 0..d {
                let num = central_diff4(&mut loss_at, &flat, i * d + l, 1e-3);
                w.grad(grad_err(out.grads[i].d_mu[l], num, 1e-4));
            }
        }
        w.cases += 1;
    }
    w
}

pub fn cross_entropy(cases: usize, seed: u64) -> Worst {
    let mut rng = rng(seed);
    let mut w = Worst::default();
    for _ in 0..cases {
        let k = rng.random_range(2..7);
        let logits = super::random_vec(&mut rng, k, -4.0, 4.0);
        let target = rng.random_range(0..k);
        let (loss, grad) = ce_loss(&logits, target).unwrap();
        let lse = logits.iter().map(|z| z.exp()).sum::<f64>().ln();
        w.value(rel_err(loss, lse - logits[target]));
        let mut f = |z: &[f64]| ce_loss(z, target).unwrap().0;
        for i in 0..k {
            w.grad(grad_err(grad[i], central_diff4(&mut f, &logits, i, 1e-3), 1e-6));
        }
        w.cases += 1;
    }
    w
}

/// Run configuration on the tiny network used for whole-model checks.
pub fn tiny_config(method: Method) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.method = method;
    cfg.model = ModelDims {
        input: 4,
        hidden: 8,
        feature: 8,
        classes: 3,
        head_hidden: 8,
        embed: 4,
        unit_mean: true,
    };
    cfg.dataset = DatasetSpec {
        num_classes: 3,
        input_dim: 4,
        height: 8,
        width: 8,
        n_labeled: 2,
        n_unlabeled: 3,
        ..DatasetSpec::default()
    };
    cfg.optim.pixels_per_stream = 12;
    cfg.sampling.delta_w = 0.0;
    cfg.sampling.delta_s = 1.0;
    cfg.sampling.anchors_per_class = 3;
    cfg.sampling.negatives_per_anchor = 6;
    cfg.run.delta_u = 0.2;
    // Finite differences see the full objective, so every path must carry
    // gradient.
    cfg.run.detach_negatives = false;
    cfg
}

/// Planned steps on the tiny model: analytic total-loss gradient against
/// central differences on `n_params` random parameters per step.
pub fn end_to_end(cfg: &RunConfig, steps: usize, n_params: usize, seed: u64) -> Worst {
    let ds = generate(&cfg.dataset).unwrap();
    let trainer = Trainer::new(cfg.clone(), ds.training_view()).unwrap();
    let model = trainer.student().clone();
    let mut rng = rng(seed);
    let mut w = Worst::default();
    for step in 0..steps {
        let plan = trainer.plan_step(step / 4, step, 0.8).unwrap();
        assert!(plan.num_anchors() > 0);
        let (parts, grads) = plan.loss_and_grad(&model).unwrap();
        assert!(parts.l_contrast > 0.0 && parts.l_s > 0.0);
        w.value(rel_err(parts.total, plan.loss(&model).unwrap().total));
        for _ in 0..n_params {
            let i = rng.random_range(0..model.num_params());
            let mut f = |p: &[f64]| {
                let mut m = model.clone();
                m.params_mut()[i] = p[0];
                plan.loss(&m).unwrap().total
            };
            // The loss is only piecewise smooth (relu, clamp), so a kink can
            // land inside the wide stencil; a real gradient bug fails both.
            let x = [model.params()[i]];
            let g = grads.as_slice()[i];
            let wide = grad_err(g, central_diff4(&mut f, &x, 0, 1e-4), 1e-6);
            let narrow = grad_err(g, central_diff(&mut f, &x, 0, 1e-5), 1e-6);
            w.grad(wide.min(narrow));
        }
        w.cases += 1;
    }
    w
}
