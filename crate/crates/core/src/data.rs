//! Synthetic per-pixel segmentation data.
//!
//! Each image is a Voronoi partition of the grid from one randomly placed
//! site per class. A pixel's features are Gaussian around its class mean
//! (means sit on a circle in the first two feature dimensions). Pixels within
//! `boundary_blend` of a class boundary draw their mean from a distance-
//! weighted mixture of the two adjacent class means, so they are genuinely
//! ambiguous in feature space; at the boundary itself the mean is the
//! midpoint.
//!
//! True labels of unlabeled images are held in [`EvalLabels`] and are not
//! reachable through [`TrainingView`].

use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ClassId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub num_classes: usize,
    pub input_dim: usize,
    pub height: usize,
    pub width: usize,
    /// Radius of the circle the class means sit on.
    pub mean_radius: f64,
    /// Isotropic per-dimension standard deviation around a class mean.
    pub spread: f64,
    /// Pixels closer than this (in pixel units) to a class boundary get
    /// blended means.
    pub boundary_blend: f64,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    /// Fraction of labeled-image labels flipped at generation time.
    pub p_flip: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            input_dim: 8,
            height: 32,
            width: 32,
            mean_radius: 1.0,
            spread: 0.4,
            boundary_blend: 1.5,
            n_labeled: 4,
            n_unlabeled: 60,
            p_flip: 0.0,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.input_dim < 2 {
            return Err(Error::Config("input_dim must be >= 2".into()));
        }
        if self.num_classes > self.height * self.width {
            return Err(Error::Config(format!(
                "{} classes do not fit on a {}x{} grid",
                self.num_classes, self.height, self.width
            )));
        }
        if !(0.0..=1.0).contains(&self.p_flip) {
            return Err(Error::Config("p_flip must lie in [0, 1]".into()));
        }
        if !(self.boundary_blend >= 0.0) || !(self.spread >= 0.0) || !self.mean_radius.is_finite() {
            return Err(Error::Config("boundary_blend and spread must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn pixels_per_image(&self) -> usize {
        self.height * self.width
    }

    /// Class means: a circle of radius `mean_radius` in dimensions 0 and 1.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        (0..self.num_classes)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / self.num_classes as f64;
                let mut m = vec![0.0; self.input_dim];
                m[0] = self.mean_radius * angle.cos();
                m[1] = self.mean_radius * angle.sin();
                m
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    /// `height * width * input_dim`, pixel-major.
    pub features: Vec<f64>,
    pub labels: Vec<ClassId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledImage {
    pub features: Vec<f64>,
}

/// Evaluation-only ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalLabels {
    /// True labels of each unlabeled image.
    pub unlabeled: Vec<Vec<ClassId>>,
    /// Boundary-blend flags of each unlabeled image.
    pub unlabeled_boundary: Vec<Vec<bool>>,
    /// Which labeled pixels had their label flipped at generation time.
    pub labeled_flips: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelDataset {
    pub spec: DatasetSpec,
    pub labeled: Vec<LabeledImage>,
    pub unlabeled: Vec<UnlabeledImage>,
    eval: EvalLabels,
}

/// What the trainer may see: labeled images with labels, unlabeled images
/// without.
#[derive(Debug, Clone, Copy)]
pub struct TrainingView<'a> {
    pub spec: &'a DatasetSpec,
    pub labeled: &'a [LabeledImage],
    pub unlabeled: &'a [UnlabeledImage],
}

impl PixelDataset {
    pub fn from_parts(
        spec: DatasetSpec,
        labeled: Vec<LabeledImage>,
        unlabeled: Vec<UnlabeledImage>,
        eval: EvalLabels,
    ) -> Result<Self> {
        spec.validate()?;
        let n = spec.pixels_per_image();
        let fdim = n * spec.input_dim;
        let ok = labeled.len() == spec.n_labeled
            && unlabeled.len() == spec.n_unlabeled
            && eval.unlabeled.len() == spec.n_unlabeled
            && eval.unlabeled_boundary.len() == spec.n_unlabeled
            && labeled.iter().all(|i| i.features.len() == fdim && i.labels.len() == n)
            && unlabeled.iter().all(|i| i.features.len() == fdim)
            && eval.unlabeled.iter().all(|l| l.len() == n)
            && eval.unlabeled_boundary.iter().all(|l| l.len() == n);
        if !ok {
            return Err(Error::Config("dataset arrays do not match their spec".into()));
        }
        let k = spec.num_classes;
        let bad = labeled
            .iter()
            .flat_map(|i| &i.labels)
            .chain(eval.unlabeled.iter().flatten())
            .find(|&&c| c >= k);
        if let Some(&class) = bad {
            return Err(Error::InvalidClass { class, num_classes: k });
        }
        Ok(Self {
            spec,
            labeled,
            unlabeled,
            eval,
        })
    }

    pub fn training_view(&self) -> TrainingView<'_> {
        TrainingView {
            spec: &self.spec,
            labeled: &self.labeled,
            unlabeled: &self.unlabeled,
        }
    }

    pub fn eval_labels(&self) -> &EvalLabels {
        &self.eval
    }
}

/// Per-pixel layout of one image.
struct Layout {
    labels: Vec<ClassId>,
    /// adjacent class and blend weight of that class for boundary pixels
    blend: Vec<Option<(ClassId, f64)>>,
}

fn voronoi_layout(spec: &DatasetSpec, rng: &mut ChaCha8Rng) -> Layout {
    let (h, w, k) = (spec.height, spec.width, spec.num_classes);
    let sites: Vec<(f64, f64)> = index::sample(rng, h * w, k)
        .into_iter()
        .map(|i| ((i / w) as f64, (i % w) as f64))
        .collect();
    let mut labels = Vec::with_capacity(h * w);
    let mut blend = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        let mut d2: Vec<(f64, ClassId)> = sites
            .iter()
            .enumerate()
            .map(|(c, &(sy, sx))| ((y - sy).powi(2) + (x - sx).powi(2), c))
            .collect();
        d2.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (da, a) = d2[0];
        let (db, b) = d2[1];
        labels.push(a);
        let (ay, ax) = sites[a];
        let (by, bx) = sites[b];
        let sep = ((ay - by).powi(2) + (ax - bx).powi(2)).sqrt();
        // distance from the pixel to the perpendicular bisector of a and b
        let to_boundary = (db - da) / (2.0 * sep);
        if spec.boundary_blend > 0.0 && to_boundary <= spec.boundary_blend {
            let weight = 0.5 * (1.0 - to_boundary / spec.boundary_blend);
            blend.push(Some((b, weight)));
        } else {
            blend.push(None);
        }
    }
    Layout { labels, blend }
}

fn sample_features(spec: &DatasetSpec, layout: &Layout, means: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = spec.input_dim;
    let mut out = Vec::with_capacity(layout.labels.len() * d);
    for (i, &c) in layout.labels.iter().enumerate() {
        for l in 0..d {
            let mean = match layout.blend[i] {
                Some((b, wb)) => (1.0 - wb) * means[c][l] + wb * means[b][l],
                None => means[c][l],
            };
            let z: f64 = StandardNormal.sample(rng);
            out.push(mean + spec.spread * z);
        }
    }
    out
}

/// Generates a dataset; identical specs give bitwise-identical datasets.
pub fn generate(spec: &DatasetSpec) -> Result<PixelDataset> {
    spec.validate()?;
    let means = spec.class_means();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut labeled = Vec::with_capacity(spec.n_labeled);
    let mut labeled_flips = Vec::with_capacity(spec.n_labeled);
    for _ in 0..spec.n_labeled {
        let layout = voronoi_layout(spec, &mut rng);
        let features = sample_features(spec, &layout, &means, &mut rng);
        let flip_seed = rng.random();
        let corrupted = corrupt_labels(&layout.labels, spec.num_classes, spec.p_flip, flip_seed)?;
        labeled.push(LabeledImage {
            features,
            labels: corrupted.labels,
        });
        labeled_flips.push(corrupted.mask);
    }

    let mut unlabeled = Vec::with_capacity(spec.n_unlabeled);
    let mut truth = Vec::with_capacity(spec.n_unlabeled);
    let mut boundary = Vec::with_capacity(spec.n_unlabeled);
    for _ in 0..spec.n_unlabeled {
        let layout = voronoi_layout(spec, &mut rng);
        let features = sample_features(spec, &layout, &means, &mut rng);
        unlabeled.push(UnlabeledImage { features });
        boundary.push(layout.blend.iter().map(Option::is_some).collect());
        truth.push(layout.labels);
    }

    PixelDataset::from_parts(
        spec.clone(),
        labeled,
        unlabeled,
        EvalLabels {
            unlabeled: truth,
            unlabeled_boundary: boundary,
            labeled_flips,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub labels: Vec<ClassId>,
    /// true where the label was replaced
    pub mask: Vec<bool>,
}

impl Corruption {
    pub fn flip_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Replaces each label, independently with probability `p_flip`, by a
/// uniformly chosen different class.
pub fn corrupt_labels(labels: &[ClassId], num_classes: usize, p_flip: f64, seed: u64) -> Result<Corruption> {
    if !(0.0..=1.0).contains(&p_flip) {
        return Err(Error::Config(format!("p_flip {p_flip} outside [0, 1]")));
    }
    if num_classes < 2 {
        return Err(Error::Config("label corruption needs at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(labels.len());
    let mut mask = Vec::with_capacity(labels.len());
    for &c in labels {
        let flip = p_flip > 0.0 && (p_flip >= 1.0 || rng.random::<f64>() < p_flip);
        if flip {
            let r = rng.random_range(0..num_classes - 1);
            out.push(if r >= c { r + 1 } else { r });
        } else {
            out.push(c);
        }
        mask.push(flip);
    }
    Ok(Corruption { labels: out, mask })
}

/// Adds Gaussian jitter with standard deviation `strength * spread` to every
/// feature. Strength 0 returns the input unchanged.
pub fn augment(features: &[f64], strength: f64, spread: f64, seed: u64) -> Vec<f64> {
    if strength == 0.0 {
        return features.to_vec();
    }
    let sd = strength * spread;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    features
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sd * z
        })
        .collect()
}
