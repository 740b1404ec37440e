use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Method, RunConfig};
use crate::error::{Error, Result};

/// One row of the per-epoch CSV. Column order is the field order below and
/// is part of the file format. Probabilistic-only columns are empty for the
/// deterministic baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_s: f64,
    pub l_u: f64,
    pub l_contrast: f64,
    pub lambda_u: f64,
    pub lambda_c: f64,
    pub total_loss: f64,
    pub pixel_acc: f64,
    pub miou: f64,
    pub proto_acc: f64,
    /// Mean / std of representation variance over the pixels sampled into
    /// the epoch's mini-batches.
    pub sigma2_mean: Option<f64>,
    pub sigma2_std: Option<f64>,
    pub proto_sigma2_mean: Option<f64>,
    /// Mean l1 norm of sigma2 on boundary-blend / interior evaluation pixels.
    pub boundary_sigma2_l1: Option<f64>,
    pub interior_sigma2_l1: Option<f64>,
    pub anchors_per_step: f64,
    pub negatives_per_anchor: f64,
}

pub const CSV_COLUMNS: [&str; 17] = [
    "epoch",
    "l_s",
    "l_u",
    "l_contrast",
    "lambda_u",
    "lambda_c",
    "total_loss",
    "pixel_acc",
    "miou",
    "proto_acc",
    "sigma2_mean",
    "sigma2_std",
    "proto_sigma2_mean",
    "boundary_sigma2_l1",
    "interior_sigma2_l1",
    "anchors_per_step",
    "negatives_per_anchor",
];

/// Final evaluation on every unlabeled image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub seed: u64,
    pub epochs: usize,
    pub pixel_acc: f64,
    pub miou: f64,
    pub per_class_iou: Vec<Option<f64>>,
    pub proto_acc: f64,
    /// Accuracy on the labeled images against their (possibly corrupted)
    /// training labels.
    pub labeled_pixel_acc: f64,
    pub boundary_sigma2_l1: Option<f64>,
    pub interior_sigma2_l1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub epochs: Vec<EpochRecord>,
    pub summary: RunSummary,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.epochs.is_empty() {
            w.write_record(CSV_COLUMNS)?;
        }
        for rec in &self.epochs {
            w.serialize(rec)?;
        }
        w.into_inner().map_err(|e| Error::NonFinite(e.to_string()))
    }

    /// Writes `epochs.csv` and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("epochs.csv");
        fs::write(&csv_path, self.csv_bytes()?).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join("summary.json");
        fs::write(&json_path, self.to_json()?).map_err(|e| Error::io(&json_path, e))
    }

    /// Mean of `sigma2_mean` over the epochs in `range` that have one.
    pub fn mean_sigma2_over(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let vals: Vec<f64> = self.epochs.get(range)?.iter().filter_map(|e| e.sigma2_mean).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn read_epochs_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::format(path, "unexpected CSV columns"));
    }
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
