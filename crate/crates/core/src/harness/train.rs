//! Mean-teacher training loop with the contrastive term.
//!
//! A step is split in two. [`Trainer::plan_step`] makes every discrete
//! decision (batch pixels, augmentation, pseudo-labels, anchors, negatives,
//! prototypes) from one student forward pass. [`StepPlan`] then evaluates
//! the total loss and its analytic gradient as a smooth function of the
//! student parameters with those decisions frozen, which is what the update
//! uses and what finite differences can check.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Method, RunConfig};
use super::metrics::{evaluate, PrototypeSet, SegMetrics};
use super::report::{EpochRecord, RunReport, RunSummary};
use crate::contrastive::{lambda_c, lambda_u, total_loss, ContrastBatch, Deterministic, Probabilistic, SchedulerConfig};
use crate::data::{augment, corrupt_labels, generate, PixelDataset, TrainingView};
use crate::error::{Error, Result};
use crate::io::{load_dataset, save_checkpoint};
use crate::model::{backward_step, ce_loss, confident_class, Activations, Gradients, TeacherStudent, ToyModel};
use crate::prob_embed::{fuse_prototype, point_prototype, DistPrototype, PointPrototype, ProbRep};
use crate::sampling::{
    allocate_negatives, allocate_negatives_weighted, filter_valid, group_by_class, point_negative_class_weights,
    sample_anchors, PixelCandidate, SamplingConfig, Source,
};
use crate::ClassId;

const TAG_INIT: u64 = 1;
const TAG_BATCH: u64 = 2;
const TAG_FLIP: u64 = 3;
const TAG_AUG: u64 = 4;
const TAG_ANCHOR: u64 = 5;
const TAG_NEG: u64 = 6;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed of `base` for the given path of tags.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(base), |h, &p| splitmix(h ^ splitmix(p)))
}

/// Loss terms of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub l_s: f64,
    pub l_u: f64,
    pub l_contrast: f64,
    pub lambda_u: f64,
    pub lambda_c: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
enum Prototypes {
    Distribution(BTreeMap<ClassId, DistPrototype>),
    Point(BTreeMap<ClassId, PointPrototype>),
}

/// Per-step statistics reported per epoch. The variance sums cover every
/// representation the student computed for the step's mini-batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub sigma2_sum: f64,
    pub sigma2_sq_sum: f64,
    pub sigma2_count: usize,
    pub proto_sigma2_mean: Option<f64>,
    pub anchors: usize,
    pub negatives: usize,
}

/// Frozen decisions of one training step.
#[derive(Debug, Clone)]
pub struct StepPlan {
    method: Method,
    /// Inputs the student sees: labeled pixels first, then augmented
    /// unlabeled pixels.
    inputs: Vec<Vec<f64>>,
    n_labeled: usize,
    /// Cross-entropy target per pixel (`None`: unlabeled pixel below `delta_u`).
    targets: Vec<Option<ClassId>>,
    /// Class each pooled pixel carries into the contrastive term.
    pool_classes: Vec<ClassId>,
    anchors: Vec<(usize, Vec<usize>)>,
    prototypes: Prototypes,
    temperature: f64,
    detach_negatives: bool,
    lambda_u: f64,
    lambda_c: f64,
    pub stats: StepStats,
}

impl StepPlan {
    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    pub fn lambda_u(&self) -> f64 {
        self.lambda_u
    }

    fn forward_all(&self, model: &ToyModel) -> Result<Vec<Activations>> {
        self.inputs.iter().map(|x| model.forward_cached(x)).collect()
    }

    /// Total loss at `model` with this plan's decisions held fixed.
    pub fn loss(&self, model: &ToyModel) -> Result<LossParts> {
        let acts = self.forward_all(model)?;
        self.objective(model, &acts, None)
    }

    pub fn loss_and_grad(&self, model: &ToyModel) -> Result<(LossParts, Gradients)> {
        let acts = self.forward_all(model)?;
        let mut grads = Gradients::zeros_for(model);
        let parts = self.objective(model, &acts, Some(&mut grads))?;
        Ok((parts, grads))
    }

    fn objective(&self, model: &ToyModel, acts: &[Activations], grads: Option<&mut Gradients>) -> Result<LossParts> {
        let n = acts.len();
        let k = model.dims().classes;
        let mut d_logits = vec![vec![0.0; k]; n];

        let mut l_s = 0.0;
        let inv_l = 1.0 / self.n_labeled.max(1) as f64;
        for i in 0..self.n_labeled {
            let target = self.targets[i].expect("labeled pixel has a target");
            let (l, g) = ce_loss(&acts[i].logits, target)?;
            l_s += l * inv_l;
            d_logits[i] = g.into_iter().map(|v| v * inv_l).collect();
        }

        let masked: Vec<usize> = (self.n_labeled..n).filter(|&i| self.targets[i].is_some()).collect();
        let mut l_u = 0.0;
        if !masked.is_empty() {
            let inv_u = 1.0 / masked.len() as f64;
            for &i in &masked {
                let (l, g) = ce_loss(&acts[i].logits, self.targets[i].unwrap())?;
                l_u += l * inv_u;
                d_logits[i] = g.into_iter().map(|v| v * self.lambda_u * inv_u).collect();
            }
        }

        let (l_contrast, rep_grads) = self.contrast(acts)?;
        let total = total_loss(l_s, l_u, l_contrast, self.lambda_u, self.lambda_c)?;

        if let Some(grads) = grads {
            let probabilistic = self.method == Method::Prcl;
            for i in 0..n {
                let (d_mu, d_s) = match rep_grads.get(i) {
                    Some(Some((mu, s))) => (Some(mu.as_slice()), probabilistic.then_some(s.as_slice())),
                    _ => (None, None),
                };
                model.backward(&acts[i], &d_logits[i], d_mu, d_s, grads);
            }
        }
        Ok(LossParts {
            l_s,
            l_u,
            l_contrast,
            lambda_u: self.lambda_u,
            lambda_c: self.lambda_c,
            total,
        })
    }

    /// Contrastive loss and `lambda_c`-scaled gradients for pixels that take
    /// part in it.
    #[allow(clippy::type_complexity)]
    fn contrast(&self, acts: &[Activations]) -> Result<(f64, Vec<Option<(Vec<f64>, Vec<f64>)>>)> {
        if self.anchors.is_empty() {
            return Ok((0.0, Vec::new()));
        }
        let mut used = vec![false; acts.len()];
        for (a, negs) in &self.anchors {
            used[*a] = true;
            if !self.detach_negatives {
                negs.iter().for_each(|&j| used[j] = true);
            }
        }
        let out = match &self.prototypes {
            Prototypes::Distribution(protos) => {
                let mut batch = ContrastBatch::<Probabilistic>::new(self.temperature)?;
                for (a, &c) in acts.iter().zip(&self.pool_classes) {
                    batch.push_rep(ProbRep::new(a.mu.clone(), a.sigma2.clone())?, c)?;
                }
                for p in protos.values() {
                    batch.insert_prototype(p.clone())?;
                }
                for (a, negs) in &self.anchors {
                    batch.add_anchor(*a, negs.clone())?;
                }
                batch.loss_and_grad()?
            }
            Prototypes::Point(protos) => {
                let mut batch = ContrastBatch::<Deterministic>::new(self.temperature)?;
                for (a, &c) in acts.iter().zip(&self.pool_classes) {
                    batch.push_rep(a.mu.clone(), c)?;
                }
                for p in protos.values() {
                    batch.insert_prototype(p.clone())?;
                }
                for (a, negs) in &self.anchors {
                    batch.add_anchor(*a, negs.clone())?;
                }
                batch.loss_and_grad()?
            }
        };
        let lc = self.lambda_c;
        let grads = out
            .grads
            .into_iter()
            .zip(used)
            .map(|(g, u)| {
                u.then(|| {
                    (
                        g.d_mu.iter().map(|v| v * lc).collect(),
                        g.d_sigma2.iter().map(|v| v * lc).collect(),
                    )
                })
            })
            .collect();
        Ok((out.loss, grads))
    }
}

/// Owns the student/teacher pair and steps it over a [`TrainingView`].
pub struct Trainer<'a> {
    cfg: RunConfig,
    view: TrainingView<'a>,
    models: TeacherStudent,
    labeled_px: Vec<(usize, usize)>,
    unlabeled_px: Vec<(usize, usize)>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: RunConfig, view: TrainingView<'a>) -> Result<Self> {
        if view.spec.input_dim != cfg.model.input || view.spec.num_classes != cfg.model.classes {
            return Err(Error::Config("model dimensions disagree with the dataset".into()));
        }
        let mut student = ToyModel::new(cfg.model, derive_seed(cfg.run.seed, &[TAG_INIT]))?;
        student.set_clamp_variance(cfg.optim.clamp_variance);
        let n = view.spec.pixels_per_image();
        let labeled_px = (0..view.labeled.len()).flat_map(|i| (0..n).map(move |p| (i, p))).collect();
        let unlabeled_px = (0..view.unlabeled.len()).flat_map(|i| (0..n).map(move |p| (i, p))).collect();
        Ok(Self {
            cfg,
            view,
            models: TeacherStudent::new(student),
            labeled_px,
            unlabeled_px,
        })
    }

    pub fn student(&self) -> &ToyModel {
        &self.models.student
    }

    pub fn teacher(&self) -> &ToyModel {
        self.models.teacher()
    }

    pub fn into_models(self) -> TeacherStudent {
        self.models
    }

    fn pixel(&self, images: &'a [impl AsFeatures], (img, px): (usize, usize)) -> &'a [f64] {
        let d = self.view.spec.input_dim;
        &images[img].features()[px * d..(px + 1) * d]
    }

    fn draw(&self, rng: &mut ChaCha8Rng, pool: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let b = self.cfg.optim.pixels_per_stream.min(pool.len());
        index::sample(rng, pool.len(), b).into_iter().map(|i| pool[i]).collect()
    }

    /// Makes every discrete decision of step `step` in epoch `epoch`.
    pub fn plan_step(&self, epoch: usize, step: usize, lambda_c: f64) -> Result<StepPlan> {
        let run = &self.cfg.run;
        let spec = self.view.spec;
        let step_seed = derive_seed(run.seed, &[epoch as u64, step as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(step_seed, &[TAG_BATCH]));
        let lab = self.draw(&mut rng, &self.labeled_px);
        let unl = self.draw(&mut rng, &self.unlabeled_px);

        let teacher = self.models.teacher();
        let mut pseudo = Vec::with_capacity(unl.len());
        let mut teacher_conf = Vec::with_capacity(unl.len());
        for &p in &unl {
            let (c, q) = confident_class(&teacher.logits(self.pixel(self.view.unlabeled, p))?);
            pseudo.push(c);
            teacher_conf.push(q);
        }
        let pseudo = corrupt_labels(&pseudo, spec.num_classes, run.p_flip, derive_seed(step_seed, &[TAG_FLIP]))?.labels;

        let clean: Vec<f64> = unl
            .iter()
            .flat_map(|&p| self.pixel(self.view.unlabeled, p).iter().copied())
            .collect();
        let jittered = augment(
            &clean,
            self.cfg.optim.augment_strength,
            spec.spread,
            derive_seed(step_seed, &[TAG_AUG]),
        );

        let mut inputs: Vec<Vec<f64>> = lab.iter().map(|&p| self.pixel(self.view.labeled, p).to_vec()).collect();
        inputs.extend(jittered.chunks(spec.input_dim).map(<[f64]>::to_vec));
        let n_labeled = lab.len();

        let lambda_u = if run.disable_unsupervised {
            0.0
        } else {
            lambda_u(&teacher_conf, run.delta_u)
        };
        let mut targets: Vec<Option<ClassId>> = lab
            .iter()
            .map(|&(img, px)| Some(self.view.labeled[img].labels[px]))
            .collect();
        targets.extend(
            pseudo
                .iter()
                .zip(&teacher_conf)
                .map(|(&c, &q)| (lambda_u > 0.0 && q > run.delta_u).then_some(c)),
        );

        let student = &self.models.student;
        let acts: Vec<Activations> = inputs
            .iter()
            .map(|x| student.forward_cached(x))
            .collect::<Result<_>>()?;

        let mut pool_classes = Vec::with_capacity(inputs.len());
        let mut candidates = Vec::with_capacity(inputs.len());
        for (i, a) in acts.iter().enumerate() {
            let (class, confidence, source) = if i < n_labeled {
                let (img, px) = lab[i];
                (self.view.labeled[img].labels[px], confident_class(&a.logits).1, Source::Labeled)
            } else {
                let j = i - n_labeled;
                (pseudo[j], teacher_conf[j], Source::Unlabeled)
            };
            pool_classes.push(class);
            candidates.push(PixelCandidate {
                rep: (),
                confidence,
                class_id: class,
                source,
                index: i,
            });
        }

        let valid = filter_valid(&candidates, self.cfg.sampling.delta_w);
        let pools = group_by_class(&valid);
        let mut stats = StepStats::default();
        if self.cfg.run.method == Method::Prcl {
            for a in &acts {
                for &s in &a.sigma2 {
                    stats.sigma2_sum += s;
                    stats.sigma2_sq_sum += s * s;
                    stats.sigma2_count += 1;
                }
            }
        }

        let prototypes = match run.method {
            Method::Prcl => {
                let mut out = BTreeMap::new();
                for (&class, members) in &pools {
                    let reps: Vec<ProbRep> = members
                        .iter()
                        .map(|m| ProbRep::new(acts[m.index].mu.clone(), acts[m.index].sigma2.clone()))
                        .collect::<Result<_>>()?;
                    out.insert(class, fuse_prototype(&reps, class)?);
                }
                let set = PrototypeSet::Distribution(out);
                stats.proto_sigma2_mean = set.mean_sigma2();
                let PrototypeSet::Distribution(out) = set else { unreachable!() };
                Prototypes::Distribution(out)
            }
            Method::Deterministic => {
                let mut out = BTreeMap::new();
                for (&class, members) in &pools {
                    let proto = point_prototype(members.iter().map(|m| acts[m.index].mu.as_slice()), class)?;
                    out.insert(class, proto);
                }
                Prototypes::Point(out)
            }
        };

        let sampling = SamplingConfig {
            rng_seed: derive_seed(step_seed, &[TAG_ANCHOR]),
            ..self.cfg.sampling.clone()
        };
        let anchor_sets = sample_anchors(&valid, &sampling);
        let n_neg = self.cfg.sampling.negatives_per_anchor;
        let mut anchors = Vec::new();
        let mut slot = 0u64;
        for (&class, members) in &anchor_sets {
            let has_negatives = pools.iter().any(|(&c, p)| c != class && !p.is_empty());
            if !has_negatives {
                continue;
            }
            for m in members {
                let seed = derive_seed(step_seed, &[TAG_NEG, slot]);
                slot += 1;
                let negs = match &prototypes {
                    Prototypes::Distribution(p) => {
                        allocate_negatives(class, p, &pools, n_neg, run.temperature, seed)?
                    }
                    Prototypes::Point(p) => {
                        let classes = pools.iter().filter(|(_, v)| !v.is_empty()).map(|(&c, _)| c);
                        let w = point_negative_class_weights(class, p, classes, run.temperature)?;
                        allocate_negatives_weighted(class, &w, &pools, n_neg, seed)?
                    }
                };
                stats.anchors += 1;
                stats.negatives += negs.len();
                anchors.push((m.index, negs.iter().map(|c| c.index).collect()));
            }
        }

        Ok(StepPlan {
            method: run.method,
            inputs,
            n_labeled,
            targets,
            pool_classes,
            anchors,
            prototypes,
            temperature: run.temperature,
            detach_negatives: run.detach_negatives,
            lambda_u,
            lambda_c,
            stats,
        })
    }

    /// Plans, differentiates and applies one step, then moves the teacher.
    pub fn step(&mut self, epoch: usize, step: usize, lambda_c: f64) -> Result<(LossParts, StepStats)> {
        let wrap = |e: Error| Error::Divergence {
            epoch,
            batch: step,
            reason: e.to_string(),
        };
        let plan = self.plan_step(epoch, step, lambda_c).map_err(wrap)?;
        let (parts, grads) = plan.loss_and_grad(&self.models.student).map_err(wrap)?;
        backward_step(&mut self.models.student, &grads, &self.cfg.optim).map_err(wrap)?;
        self.models.ema_update(self.cfg.optim.ema_decay).map_err(wrap)?;
        Ok((parts, plan.stats))
    }
}

trait AsFeatures {
    fn features(&self) -> &[f64];
}

impl AsFeatures for crate::data::LabeledImage {
    fn features(&self) -> &[f64] {
        &self.features
    }
}

impl AsFeatures for crate::data::UnlabeledImage {
    fn features(&self) -> &[f64] {
        &self.features
    }
}

/// Metrics of a model on the first `n_images` unlabeled images.
#[derive(Debug, Clone)]
pub struct EvalSnapshot {
    pub seg: SegMetrics,
    pub proto_acc: f64,
    pub labeled_pixel_acc: f64,
    pub boundary_sigma2_l1: Option<f64>,
    pub interior_sigma2_l1: Option<f64>,
}

/// Evaluates `model` on held-out pixels. Prototypes for the nearest-prototype
/// accuracy are built from every labeled pixel with its training label.
pub fn evaluate_snapshot(model: &ToyModel, ds: &PixelDataset, method: Method, n_images: usize) -> Result<EvalSnapshot> {
    let d = ds.spec.input_dim;
    let probabilistic = method == Method::Prcl;

    let mut refs = Vec::new();
    for img in &ds.labeled {
        for (px, &label) in img.labels.iter().enumerate() {
            let (_, rep) = model.forward(&img.features[px * d..(px + 1) * d])?;
            refs.push((rep, label));
        }
    }
    let protos = PrototypeSet::from_reps(&refs, probabilistic)?;

    let labeled_seg = evaluate(
        model,
        ds.labeled.iter().flat_map(|img| {
            img.labels
                .iter()
                .enumerate()
                .map(move |(px, &l)| (&img.features[px * d..(px + 1) * d], l))
        }),
    )?;

    let eval = ds.eval_labels();
    let n_images = n_images.min(ds.unlabeled.len());
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    let mut proto_hits = 0usize;
    let (mut b_sum, mut b_n, mut i_sum, mut i_n) = (0.0, 0usize, 0.0, 0usize);
    for (img_idx, img) in ds.unlabeled.iter().take(n_images).enumerate() {
        for (px, &t) in eval.unlabeled[img_idx].iter().enumerate() {
            let (logits, rep) = model.forward(&img.features[px * d..(px + 1) * d])?;
            pred.push(confident_class(&logits).0);
            truth.push(t);
            if protos.classify(&rep) == Some(t) {
                proto_hits += 1;
            }
            if eval.unlabeled_boundary[img_idx][px] {
                b_sum += rep.sigma2_l1();
                b_n += 1;
            } else {
                i_sum += rep.sigma2_l1();
                i_n += 1;
            }
        }
    }
    let seg = super::metrics::segmentation_metrics(&pred, &truth, ds.spec.num_classes);
    let mean = |s: f64, n: usize| (probabilistic && n > 0).then(|| s / n as f64);
    Ok(EvalSnapshot {
        seg,
        proto_acc: if truth.is_empty() {
            0.0
        } else {
            proto_hits as f64 / truth.len() as f64
        },
        labeled_pixel_acc: labeled_seg.pixel_acc,
        boundary_sigma2_l1: mean(b_sum, b_n),
        interior_sigma2_l1: mean(i_sum, i_n),
    })
}

/// Trains on an in-memory dataset and returns the report with the final
/// student/teacher pair.
pub fn train_on(cfg: &RunConfig, ds: &PixelDataset) -> Result<(RunReport, TeacherStudent)> {
    let mut cfg = cfg.clone();
    cfg.dataset = ds.spec.clone();
    cfg.validate()?;
    let epochs = cfg.run.epochs;
    let sched = SchedulerConfig {
        total_epochs: epochs.max(1),
        ..cfg.scheduler.clone()
    };
    let probabilistic = cfg.run.method == Method::Prcl;

    let mut trainer = Trainer::new(cfg.clone(), ds.training_view())?;
    let mut records = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let lc = lambda_c(epoch, &sched)?;
        let mut sums = [0.0f64; 5];
        let mut stats = StepStats::default();
        let mut proto_sigma2 = (0.0, 0usize);
        let steps = cfg.optim.steps_per_epoch;
        for step in 0..steps {
            let (parts, st) = trainer.step(epoch, step, lc)?;
            if !parts.total.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: step,
                    reason: "non-finite total loss".into(),
                });
            }
            for (s, v) in sums
                .iter_mut()
                .zip([parts.l_s, parts.l_u, parts.l_contrast, parts.lambda_u, parts.total])
            {
                *s += v;
            }
            stats.sigma2_sum += st.sigma2_sum;
            stats.sigma2_sq_sum += st.sigma2_sq_sum;
            stats.sigma2_count += st.sigma2_count;
            stats.anchors += st.anchors;
            stats.negatives += st.negatives;
            if let Some(p) = st.proto_sigma2_mean {
                proto_sigma2.0 += p;
                proto_sigma2.1 += 1;
            }
        }
        let inv = 1.0 / steps as f64;
        let snap = evaluate_snapshot(trainer.student(), ds, cfg.run.method, cfg.run.eval_images)?;
        let (sigma2_mean, sigma2_std) = if probabilistic && stats.sigma2_count > 0 {
            let n = stats.sigma2_count as f64;
            let m = stats.sigma2_sum / n;
            (Some(m), Some((stats.sigma2_sq_sum / n - m * m).max(0.0).sqrt()))
        } else {
            (None, None)
        };
        records.push(EpochRecord {
            epoch,
            l_s: sums[0] * inv,
            l_u: sums[1] * inv,
            l_contrast: sums[2] * inv,
            lambda_u: sums[3] * inv,
            lambda_c: lc,
            total_loss: sums[4] * inv,
            pixel_acc: snap.seg.pixel_acc,
            miou: snap.seg.miou,
            proto_acc: snap.proto_acc,
            sigma2_mean,
            sigma2_std,
            proto_sigma2_mean: (proto_sigma2.1 > 0).then(|| proto_sigma2.0 / proto_sigma2.1 as f64),
            boundary_sigma2_l1: snap.boundary_sigma2_l1,
            interior_sigma2_l1: snap.interior_sigma2_l1,
            anchors_per_step: stats.anchors as f64 * inv,
            negatives_per_anchor: if stats.anchors > 0 {
                stats.negatives as f64 / stats.anchors as f64
            } else {
                0.0
            },
        });
    }

    let models = trainer.into_models();
    let fin = evaluate_snapshot(&models.student, ds, cfg.run.method, ds.unlabeled.len())?;
    let summary = RunSummary {
        method: cfg.run.method,
        seed: cfg.run.seed,
        epochs,
        pixel_acc: fin.seg.pixel_acc,
        miou: fin.seg.miou,
        per_class_iou: fin.seg.per_class_iou,
        proto_acc: fin.proto_acc,
        labeled_pixel_acc: fin.labeled_pixel_acc,
        boundary_sigma2_l1: fin.boundary_sigma2_l1,
        interior_sigma2_l1: fin.interior_sigma2_l1,
    };
    Ok((
        RunReport {
            config: cfg,
            epochs: records,
            summary,
        },
        models,
    ))
}

/// Loads or generates the run's dataset.
pub fn load_run_dataset(cfg: &RunConfig) -> Result<PixelDataset> {
    match &cfg.run.dataset_path {
        Some(p) => load_dataset(p),
        None => generate(&cfg.dataset),
    }
}

/// Full run: dataset, training, and (when `output_dir` is set) the CSV/JSON
/// report plus `model.ckpt` (student) and `teacher.ckpt`.
pub fn train(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let ds = load_run_dataset(cfg)?;
    let (report, models) = train_on(cfg, &ds)?;
    if let Some(dir) = &cfg.run.output_dir {
        report.write_to(dir)?;
        save_checkpoint(&models.student, cfg.run.seed, &dir.join("model.ckpt"))?;
        save_checkpoint(models.teacher(), cfg.run.seed, &dir.join("teacher.ckpt"))?;
    }
    Ok(report)
}
