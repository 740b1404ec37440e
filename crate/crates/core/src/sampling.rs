//! Candidate selection for the contrastive loss: valid-sample filtering,
//! hard-anchor sampling and prototype-similarity-weighted negative
//! allocation.
//!
//! Every random draw comes from a ChaCha stream seeded by the caller, so the
//! same inputs and seed always produce the same selection.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob_embed::{mls_unchecked, DistPrototype, PointPrototype};
use crate::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Labeled,
    Unlabeled,
}

/// A pixel eligible for contrastive sampling.
///
/// `rep` is whatever the caller needs to carry along (a [`crate::ProbRep`],
/// a plain vector, or nothing); `index` is the pixel's position in the
/// caller's pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelCandidate<R = crate::ProbRep> {
    pub rep: R,
    pub confidence: f64,
    pub class_id: ClassId,
    pub source: Source,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub delta_w: f64,
    pub delta_s: f64,
    pub anchors_per_class: usize,
    pub negatives_per_anchor: usize,
    pub rng_seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            delta_w: 0.70,
            delta_s: 0.80,
            anchors_per_class: 16,
            negatives_per_anchor: 512,
            rng_seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta_w", self.delta_w), ("delta_s", self.delta_s)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.anchors_per_class == 0 {
            return Err(Error::Config("anchors_per_class must be >= 1".into()));
        }
        if self.negatives_per_anchor == 0 {
            return Err(Error::Config("negatives_per_anchor must be >= 1".into()));
        }
        Ok(())
    }

    /// Non-fatal configuration smells.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.delta_w >= self.delta_s {
            out.push(format!(
                "delta_w ({}) >= delta_s ({}): no valid candidate can be a hard anchor",
                self.delta_w, self.delta_s
            ));
        }
        out
    }
}

/// Keeps the candidates whose confidence is strictly above `delta_w`.
pub fn filter_valid<R: Clone>(candidates: &[PixelCandidate<R>], delta_w: f64) -> Vec<PixelCandidate<R>> {
    candidates
        .iter()
        .filter(|c| c.confidence > delta_w)
        .cloned()
        .collect()
}

/// Groups candidates by class, preserving input order within a class.
pub fn group_by_class<R: Clone>(candidates: &[PixelCandidate<R>]) -> BTreeMap<ClassId, Vec<PixelCandidate<R>>> {
    let mut out: BTreeMap<ClassId, Vec<PixelCandidate<R>>> = BTreeMap::new();
    for c in candidates {
        out.entry(c.class_id).or_default().push(c.clone());
    }
    out
}

/// Per class, draws up to `anchors_per_class` hard anchors (confidence
/// strictly below `delta_s`) uniformly without replacement. Classes without
/// a hard candidate are absent from the result.
pub fn sample_anchors<R: Clone>(
    valid: &[PixelCandidate<R>],
    cfg: &SamplingConfig,
) -> BTreeMap<ClassId, Vec<PixelCandidate<R>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut hard: BTreeMap<ClassId, Vec<&PixelCandidate<R>>> = BTreeMap::new();
    for c in valid.iter().filter(|c| c.confidence < cfg.delta_s) {
        hard.entry(c.class_id).or_default().push(c);
    }
    hard.into_iter()
        .map(|(class, pool)| {
            let picked = if pool.len() <= cfg.anchors_per_class {
                pool.into_iter().cloned().collect()
            } else {
                index::sample(&mut rng, pool.len(), cfg.anchors_per_class)
                    .into_iter()
                    .map(|i| pool[i].clone())
                    .collect()
            };
            (class, picked)
        })
        .collect()
}

/// Largest-remainder apportionment of `n` slots over `weights`. Returned
/// counts follow the input order and always sum to `n` (for nonempty input).
/// Equal fractional parts are broken by input order.
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| n as f64 * w / total).collect()
    } else {
        vec![n as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Softmax over the non-anchor classes of `MLS(proto_other, proto_anchor) / tau`.
pub fn negative_class_weights(
    anchor_class: ClassId,
    prototypes: &BTreeMap<ClassId, DistPrototype>,
    classes: impl IntoIterator<Item = ClassId>,
    tau: f64,
) -> Result<BTreeMap<ClassId, f64>> {
    let anchor = prototypes
        .get(&anchor_class)
        .ok_or(Error::MissingPrototype(anchor_class))?;
    let mut scores = BTreeMap::new();
    for class in classes.into_iter().filter(|&c| c != anchor_class) {
        let p = prototypes.get(&class).ok_or(Error::MissingPrototype(class))?;
        let s = mls_unchecked(p.mu_hat(), p.sigma2_hat(), anchor.mu_hat(), anchor.sigma2_hat());
        scores.insert(class, s / tau);
    }
    Ok(softmax_map(scores))
}

pub(crate) fn softmax_map(scores: BTreeMap<ClassId, f64>) -> BTreeMap<ClassId, f64> {
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: BTreeMap<ClassId, f64> = scores.into_iter().map(|(c, s)| (c, (s - max).exp())).collect();
    let total: f64 = exps.values().sum();
    exps.into_iter().map(|(c, e)| (c, e / total)).collect()
}

/// Softmax over the non-anchor classes of `-||proto_other - proto_anchor||^2 / tau`,
/// the point-prototype counterpart of [`negative_class_weights`].
pub fn point_negative_class_weights(
    anchor_class: ClassId,
    prototypes: &BTreeMap<ClassId, PointPrototype>,
    classes: impl IntoIterator<Item = ClassId>,
    tau: f64,
) -> Result<BTreeMap<ClassId, f64>> {
    let anchor = prototypes
        .get(&anchor_class)
        .ok_or(Error::MissingPrototype(anchor_class))?;
    let mut scores = BTreeMap::new();
    for class in classes.into_iter().filter(|&c| c != anchor_class) {
        let p = prototypes.get(&class).ok_or(Error::MissingPrototype(class))?;
        let d2: f64 = p.mu().iter().zip(anchor.mu()).map(|(a, b)| (a - b) * (a - b)).sum();
        scores.insert(class, -d2 / tau);
    }
    Ok(softmax_map(scores))
}

/// Negative allocation with class weights derived from distribution
/// prototypes (see [`negative_class_weights`]).
pub fn allocate_negatives<R: Clone>(
    anchor_class: ClassId,
    prototypes: &BTreeMap<ClassId, DistPrototype>,
    pools: &BTreeMap<ClassId, Vec<PixelCandidate<R>>>,
    n: usize,
    tau: f64,
    seed: u64,
) -> Result<Vec<PixelCandidate<R>>> {
    let classes = pools
        .iter()
        .filter(|(&c, pool)| c != anchor_class && !pool.is_empty())
        .map(|(&c, _)| c);
    let weights = negative_class_weights(anchor_class, prototypes, classes, tau)?;
    allocate_negatives_weighted(anchor_class, &weights, pools, n, seed)
}

/// Splits `n` negatives across classes by largest remainder of `n * w`,
/// moves quota a pool cannot fill to the next-heaviest classes with spare
/// room, then draws uniformly without replacement inside each class.
/// Returns fewer than `n` only when all pools together hold fewer.
pub fn allocate_negatives_weighted<R: Clone>(
    anchor_class: ClassId,
    weights: &BTreeMap<ClassId, f64>,
    pools: &BTreeMap<ClassId, Vec<PixelCandidate<R>>>,
    n: usize,
    seed: u64,
) -> Result<Vec<PixelCandidate<R>>> {
    let classes: Vec<ClassId> = weights
        .keys()
        .copied()
        .filter(|&c| c != anchor_class && pools.get(&c).is_some_and(|p| !p.is_empty()))
        .collect();
    if classes.is_empty() {
        return Err(Error::Empty("negative pools"));
    }
    let w: Vec<f64> = classes.iter().map(|c| weights[c]).collect();
    let caps: Vec<usize> = classes.iter().map(|c| pools[c].len()).collect();
    let mut counts = largest_remainder(&w, n);

    let mut overflow = 0;
    for (count, &cap) in counts.iter_mut().zip(&caps) {
        if *count > cap {
            overflow += *count - cap;
            *count = cap;
        }
    }
    if overflow > 0 {
        let mut by_weight: Vec<usize> = (0..classes.len()).collect();
        by_weight.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        for i in by_weight {
            let room = caps[i] - counts[i];
            let take = room.min(overflow);
            counts[i] += take;
            overflow -= take;
            if overflow == 0 {
                break;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for (class, &count) in classes.iter().zip(&counts) {
        let pool = &pools[class];
        if count == pool.len() {
            out.extend(pool.iter().cloned());
        } else {
            out.extend(
                index::sample(&mut rng, pool.len(), count)
                    .into_iter()
                    .map(|i| pool[i].clone()),
            );
        }
    }
    Ok(out)
}
