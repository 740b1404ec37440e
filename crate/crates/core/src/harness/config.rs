use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contrastive::SchedulerConfig;
use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::model::{ModelDims, OptimConfig};
use crate::sampling::SamplingConfig;

/// Which contrastive loss and prototype the run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Gaussian representations, distribution prototypes, MLS scoring.
    #[serde(rename = "prcl")]
    Prcl,
    /// Mean vectors only, point prototypes, negative squared l2 scoring.
    #[serde(rename = "deterministic-baseline")]
    Deterministic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Prcl => f.write_str("prcl"),
            Method::Deterministic => f.write_str("deterministic-baseline"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prcl" => Ok(Method::Prcl),
            "deterministic-baseline" | "deterministic" => Ok(Method::Deterministic),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Run-level settings (`[run]` section).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub method: Method,
    pub epochs: usize,
    /// Master seed for initialisation, batching, sampling, augmentation and
    /// pseudo-label corruption.
    pub seed: u64,
    pub temperature: f64,
    pub delta_u: f64,
    /// Rate at which teacher pseudo-labels are replaced by a wrong class.
    pub p_flip: f64,
    /// Forces `lambda_u = 0` (no unsupervised cross-entropy).
    pub disable_unsupervised: bool,
    /// Treat sampled negatives as constants in the contrastive term, so
    /// only anchors receive its gradient.
    pub detach_negatives: bool,
    /// Unlabeled images used for per-epoch metrics; the final summary always
    /// uses all of them.
    pub eval_images: usize,
    pub output_dir: Option<PathBuf>,
    /// Load the dataset from this file instead of generating `[dataset]`.
    pub dataset_path: Option<PathBuf>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            method: Method::Prcl,
            epochs: 40,
            seed: 0,
            temperature: 0.5,
            delta_u: 0.95,
            p_flip: 0.0,
            disable_unsupervised: false,
            detach_negatives: true,
            eval_images: 4,
            output_dir: None,
            dataset_path: None,
        }
    }
}

/// Complete experiment configuration, one TOML section per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub run: RunSettings,
    pub dataset: DatasetSpec,
    pub model: ModelDims,
    pub optim: OptimConfig,
    pub sampling: SamplingConfig,
    pub scheduler: SchedulerConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if !(r.temperature > 0.0 && r.temperature.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if !(0.0..=1.0).contains(&r.delta_u) {
            return Err(Error::Config("delta_u must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&r.p_flip) {
            return Err(Error::Config("p_flip must lie in [0, 1]".into()));
        }
        if let Some(p) = &r.dataset_path {
            if !p.exists() {
                return Err(Error::Config(format!("dataset file {} does not exist", p.display())));
            }
        } else {
            self.dataset.validate()?;
            if self.dataset.input_dim != self.model.input || self.dataset.num_classes != self.model.classes {
                return Err(Error::Config("model input/classes disagree with the dataset spec".into()));
            }
        }
        self.model.validate()?;
        self.optim.validate()?;
        self.sampling.validate()?;
        if !(self.scheduler.lambda_c0 >= 0.0) || !(self.scheduler.alpha < 0.0) {
            return Err(Error::Config("scheduler needs lambda_c0 >= 0 and alpha < 0".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Sets a dotted key such as `sampling.negatives_per_anchor` from its
    /// textual value. Values that do not parse as TOML are taken as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = parse_value(value);
        let parts: Vec<&str> = key.split('.').collect();
        let (last, parents) = parts.split_last().ok_or_else(|| Error::Config("empty key".into()))?;
        let mut node = &mut root;
        for p in parents {
            node = node
                .get_mut(*p)
                .ok_or_else(|| Error::Config(format!("unknown config section `{p}` in `{key}`")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{key}` does not name a field")))?;
        let known = table.contains_key(*last) || is_optional_field(key);
        if !known {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        table.insert((*last).to_string(), parsed);
        *self = root.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{key} = {value}: {e}")))?;
        Ok(())
    }
}

fn is_optional_field(key: &str) -> bool {
    matches!(key, "run.output_dir" | "run.dataset_path")
}

fn parse_value(s: &str) -> toml::Value {
    let doc = format!("v = {s}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(s.to_string())),
        Err(_) => toml::Value::String(s.to_string()),
    }
}
