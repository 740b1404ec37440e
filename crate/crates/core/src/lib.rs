//! Probabilistic representation contrastive learning for semi-supervised
//! per-pixel classification.
//!
//! Pixels are embedded as diagonal Gaussians ([`ProbRep`]), compared with
//! the mutual likelihood score ([`mls`]) and grouped into precision-weighted
//! class prototypes ([`fuse_prototype`]). [`contrastive`] turns these into a
//! prototype contrastive loss, [`sampling`] picks anchors and negatives,
//! [`model`] is a small from-scratch MLP with a mean-teacher pair, [`data`]
//! generates seeded synthetic segmentation data and [`harness`] runs the
//! training loop, evaluation and sweeps.

pub mod contrastive;
pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod prob_embed;
pub mod sampling;

/// Index of a semantic class, `0..K`.
pub type ClassId = usize;

pub use contrastive::{
    infonce_l2_loss, lambda_c, lambda_u, prcl_loss, total_loss, ContrastBatch, ContrastOutput, PointContrastBatch,
    SchedulerConfig,
};
pub use error::{Error, Result};
pub use prob_embed::{
    fuse_prototype, mls, mls_grad, point_prototype, DiagonalGaussian, DistPrototype, MlsGrad, PointPrototype, ProbRep,
    SIGMA2_MAX, SIGMA2_MIN,
};
