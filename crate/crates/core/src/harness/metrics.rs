use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contrastive::{ContrastSpace, Deterministic, Probabilistic};
use crate::error::Result;
use crate::model::{confident_class, ToyModel};
use crate::prob_embed::{fuse_prototype, point_prototype, DistPrototype, PointPrototype, ProbRep};
use crate::ClassId;

/// Pixel accuracy, per-class IoU and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub pixel_acc: f64,
    /// `None` for classes absent from both prediction and ground truth.
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
}

/// Confusion-matrix metrics for `K` classes. A class contributes to the
/// mean unless it appears in neither the prediction nor the truth.
pub fn segmentation_metrics(pred: &[ClassId], truth: &[ClassId], num_classes: usize) -> SegMetrics {
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    let mut correct = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let per_class_iou: Vec<Option<f64>> = (0..num_classes)
        .map(|c| {
            let denom = tp[c] + fp[c] + fn_[c];
            (denom > 0).then(|| tp[c] as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = per_class_iou.iter().flatten().copied().collect();
    let miou = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    let pixel_acc = if pred.is_empty() {
        0.0
    } else {
        correct as f64 / pred.len() as f64
    };
    SegMetrics {
        pixel_acc,
        per_class_iou,
        miou,
    }
}

/// Predicts every pixel with the model's prediction head and scores it.
pub fn evaluate<'a, I>(model: &ToyModel, pixels: I) -> Result<SegMetrics>
where
    I: IntoIterator<Item = (&'a [f64], ClassId)>,
{
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (x, t) in pixels {
        pred.push(confident_class(&model.logits(x)?).0);
        truth.push(t);
    }
    Ok(segmentation_metrics(&pred, &truth, model.dims().classes))
}

/// Class prototypes built from reference pixels, used to classify other
/// pixels by nearest prototype under the run's similarity.
#[derive(Debug, Clone)]
pub enum PrototypeSet {
    Distribution(BTreeMap<ClassId, DistPrototype>),
    Point(BTreeMap<ClassId, PointPrototype>),
}

impl PrototypeSet {
    pub fn from_reps(reps: &[(ProbRep, ClassId)], probabilistic: bool) -> Result<Self> {
        let mut by_class: BTreeMap<ClassId, Vec<&ProbRep>> = BTreeMap::new();
        for (r, c) in reps {
            by_class.entry(*c).or_default().push(r);
        }
        if probabilistic {
            let mut out = BTreeMap::new();
            for (c, rs) in by_class {
                out.insert(c, fuse_prototype(rs, c)?);
            }
            Ok(PrototypeSet::Distribution(out))
        } else {
            let mut out = BTreeMap::new();
            for (c, rs) in by_class {
                out.insert(c, point_prototype(rs.iter().map(|r| r.mu()), c)?);
            }
            Ok(PrototypeSet::Point(out))
        }
    }

    /// Class of the highest-scoring prototype (lowest class id on ties).
    pub fn classify(&self, rep: &ProbRep) -> Option<ClassId> {
        fn best<S: ContrastSpace>(
            rep: &S::Rep,
            protos: &BTreeMap<ClassId, S::Proto>,
        ) -> Option<ClassId> {
            let mut out: Option<(ClassId, f64)> = None;
            for (&c, p) in protos {
                let s = S::score_proto(rep, p);
                if out.is_none_or(|(_, b)| s > b) {
                    out = Some((c, s));
                }
            }
            out.map(|(c, _)| c)
        }
        match self {
            PrototypeSet::Distribution(p) => best::<Probabilistic>(rep, p),
            PrototypeSet::Point(p) => best::<Deterministic>(&rep.mu().to_vec(), p),
        }
    }

    /// Mean prototype variance over classes and dimensions (distribution
    /// prototypes only).
    pub fn mean_sigma2(&self) -> Option<f64> {
        match self {
            PrototypeSet::Distribution(p) if !p.is_empty() => {
                let (sum, n) = p
                    .values()
                    .flat_map(|p| p.sigma2_hat())
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                Some(sum / n as f64)
            }
            _ => None,
        }
    }
}
