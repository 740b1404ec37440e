//! Cross-product sweeps over config keys. The `run.seed` axis is special:
//! summary rows aggregate over it (mean and sample std).

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::report::RunReport;
use super::train::train;
use crate::error::{Error, Result};

pub const SEED_KEY: &str = "run.seed";

/// One swept key with its textual values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for Axis {
    type Err = Error;

    /// Parses `key=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (key, vals) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis `{s}` is not key=v1,v2,...")))?;
        let values: Vec<String> = vals.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if key.trim().is_empty() || values.is_empty() {
            return Err(Error::Config(format!("axis `{s}` has no key or no values")));
        }
        Ok(Axis {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// One executed configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRun {
    /// `(key, value)` for every axis, seed included.
    pub point: Vec<(String, String)>,
    pub seed: u64,
    pub dir: PathBuf,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

/// Aggregate over seeds for one non-seed configuration point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: Vec<(String, String)>,
    pub runs: usize,
    pub failures: usize,
    pub miou_mean: f64,
    pub miou_std: f64,
    pub pixel_acc_mean: f64,
    pub pixel_acc_std: f64,
    pub proto_acc_mean: f64,
    pub proto_acc_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub runs: Vec<SweepRun>,
    pub summary: Vec<SummaryRow>,
}

fn cross_product(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect()
    })
}

fn run_dir_name(point: &[(String, String)]) -> String {
    if point.is_empty() {
        return "base".into();
    }
    point
        .iter()
        .map(|(k, v)| {
            let k = k.rsplit('.').next().unwrap_or(k);
            let v: String = v.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
            format!("{k}={v}")
        })
        .collect::<Vec<_>>()
        .join("__")
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Builds the per-point configurations without running them.
pub fn expand(base: &RunConfig, axes: &[Axis], out_dir: &Path) -> Result<Vec<(Vec<(String, String)>, RunConfig)>> {
    let mut seen = std::collections::BTreeSet::new();
    for a in axes {
        if !seen.insert(a.key.as_str()) {
            return Err(Error::Config(format!("axis `{}` given twice", a.key)));
        }
    }
    cross_product(axes)
        .into_iter()
        .map(|point| {
            let mut cfg = base.clone();
            for (k, v) in &point {
                cfg.set(k, v)?;
            }
            cfg.run.output_dir = Some(out_dir.join("runs").join(run_dir_name(&point)));
            Ok((point, cfg))
        })
        .collect()
}

/// Runs every point of the cross product (in parallel), writes each run to
/// its own directory under `out_dir/runs`, then writes `summary.csv` and
/// `sweep.json`. A failing run is recorded and does not stop the others.
pub fn sweep(base: &RunConfig, axes: &[Axis], out_dir: &Path) -> Result<SweepOutcome> {
    let configs = expand(base, axes, out_dir)?;
    let runs: Vec<SweepRun> = configs
        .into_par_iter()
        .map(|(point, cfg)| {
            let dir = cfg.run.output_dir.clone().expect("set by expand");
            let (report, error) = match train(&cfg) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRun {
                point,
                seed: cfg.run.seed,
                dir,
                report,
                error,
            }
        })
        .collect();

    let mut groups: Vec<(Vec<(String, String)>, Vec<&SweepRun>)> = Vec::new();
    for run in &runs {
        let key: Vec<_> = run.point.iter().filter(|(k, _)| k != SEED_KEY).cloned().collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(run),
            None => groups.push((key, vec![run])),
        }
    }
    let summary = groups
        .into_iter()
        .map(|(point, members)| {
            let ok: Vec<_> = members.iter().filter_map(|r| r.report.as_ref()).collect();
            let col = |f: fn(&RunReport) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (miou_mean, miou_std) = col(|r| r.summary.miou);
            let (pixel_acc_mean, pixel_acc_std) = col(|r| r.summary.pixel_acc);
            let (proto_acc_mean, proto_acc_std) = col(|r| r.summary.proto_acc);
            SummaryRow {
                point,
                runs: members.len(),
                failures: members.len() - ok.len(),
                miou_mean,
                miou_std,
                pixel_acc_mean,
                pixel_acc_std,
                proto_acc_mean,
                proto_acc_std,
            }
        })
        .collect();

    let outcome = SweepOutcome { runs, summary };
    write_outcome(&outcome, axes, out_dir)?;
    Ok(outcome)
}

fn write_outcome(outcome: &SweepOutcome, axes: &[Axis], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let keys: Vec<&str> = axes.iter().map(|a| a.key.as_str()).filter(|k| *k != SEED_KEY).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = keys.clone();
    header.extend([
        "runs",
        "failures",
        "miou_mean",
        "miou_std",
        "pixel_acc_mean",
        "pixel_acc_std",
        "proto_acc_mean",
        "proto_acc_std",
    ]);
    w.write_record(&header)?;
    for row in &outcome.summary {
        let mut rec: Vec<String> = row.point.iter().map(|(_, v)| v.clone()).collect();
        rec.push(row.runs.to_string());
        rec.push(row.failures.to_string());
        for v in [
            row.miou_mean,
            row.miou_std,
            row.pixel_acc_mean,
            row.pixel_acc_std,
            row.proto_acc_mean,
            row.proto_acc_std,
        ] {
            rec.push(v.to_string());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::NonFinite(e.to_string()))?;
    let csv_path = out_dir.join("summary.csv");
    fs::write(&csv_path, bytes).map_err(|e| Error::io(&csv_path, e))?;
    let json_path = out_dir.join("sweep.json");
    fs::write(&json_path, serde_json::to_string_pretty(outcome)?).map_err(|e| Error::io(&json_path, e))
}
