//! Experiment configuration: JSON schema, defaults, and validation.
//!
//! Parsing is strict (unknown keys are rejected) and validation collects
//! every violation before reporting, so a bad config fails once with the
//! full list.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::raw::RawFormat;
use crate::error::{Error, Result};
use crate::fl::distill::DistillConfig;
use crate::nn::models::ModelId;
use crate::nn::optim::TrainConfig;
use crate::resources::bandwidth::CostModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Fedavg,
    Static,
    Reft,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Fedavg => "fedavg",
            Strategy::Static => "static",
            Strategy::Reft => "reft",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum DatasetConfig {
    Synthetic(SyntheticConfig),
    Raw(RawConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub input_shape: Vec<usize>,
    pub separation: f64,
    /// Held-out evaluation samples per class.
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
}

fn default_test_per_class() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub train_path: PathBuf,
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    pub format: RawFormat,
}

/// Where the unlabeled public set comes from. `SameDomain` reuses the
/// private centroid geometry; `ShiftedDomain` (default) draws fresh
/// centroids over the same label space so classes map by index only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicConfig {
    #[serde(default = "default_public_samples")]
    pub samples: usize,
    #[serde(default)]
    pub domain: PublicDomain,
}

fn default_public_samples() -> usize {
    512
}

impl Default for PublicConfig {
    fn default() -> Self {
        Self { samples: default_public_samples(), domain: PublicDomain::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PublicDomain {
    #[default]
    ShiftedDomain,
    SameDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Defaults to max(2 * batch size, 32), resolved against the train
    /// config.
    #[serde(default)]
    pub min_shard: Option<usize>,
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { alpha: default_alpha(), min_shard: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientProfileConfig {
    pub id: u32,
    pub gflops: f64,
    #[serde(default)]
    pub ram_bytes: Option<u64>,
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub public: PublicConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    pub clients: Vec<ClientProfileConfig>,
    pub f_lambda_gflops: f64,
    pub model: ModelId,
    pub strategy: Strategy,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub distill: DistillConfig,
    #[serde(default)]
    pub cost: CostModel,
    /// Communication rounds; used by fedavg only (one-shot strategies
    /// ignore it).
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_rounds() -> u32 {
    10
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/out")
}

impl ExperimentConfig {
    /// Parse and validate a JSON config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::ConfigParse {
                path: path.to_path_buf(),
                // serde_json errors carry line and column context.
                detail: e.to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
            path: PathBuf::from("<inline>"),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical JSON of the resolved config (all defaults filled in).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Effective minimum shard size.
    pub fn min_shard(&self) -> usize {
        self.partition.min_shard.unwrap_or_else(|| (2 * self.train.batch_size).max(32))
    }

    /// F_lambda in FLOPS.
    pub fn f_lambda(&self) -> f64 {
        self.f_lambda_gflops * 1e9
    }

    /// Collect every validation violation; error if any.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.clients.is_empty() {
            violations.push("clients: at least one client profile is required".to_string());
        }
        let mut ids: Vec<u32> = self.clients.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.clients.len() {
            violations.push("clients: ids must be unique".to_string());
        }
        for c in &self.clients {
            if !crate::error::positive(c.gflops) {
                violations.push(format!("clients[{}]: gflops must be positive", c.id));
            }
        }
        if !crate::error::positive(self.f_lambda_gflops) {
            violations.push(format!(
                "f_lambda_gflops: must be positive, got {}",
                self.f_lambda_gflops
            ));
        }
        if !crate::error::positive(self.partition.alpha) {
            violations.push(format!(
                "partition.alpha: must be positive, got {}",
                self.partition.alpha
            ));
        }
        match &self.dataset {
            DatasetConfig::Synthetic(s) => {
                if s.classes < 2 {
                    violations.push("dataset.synthetic.classes: need at least 2".to_string());
                }
                if s.per_class == 0 {
                    violations.push("dataset.synthetic.per_class: must be positive".to_string());
                }
                if !crate::error::non_negative(s.separation) {
                    violations.push(format!(
                        "dataset.synthetic.separation: must be >= 0, got {}",
                        s.separation
                    ));
                }
                if s.input_shape.is_empty() || s.input_shape.contains(&0) {
                    violations.push(format!(
                        "dataset.synthetic.input_shape: bad shape {:?}",
                        s.input_shape
                    ));
                }
            }
            DatasetConfig::Raw(r) => {
                if let Err(e) = r.format.validate() {
                    violations.push(format!("dataset.raw.format: {e}"));
                }
            }
        }
        if self.public.samples == 0 {
            violations.push("public.samples: must be positive".to_string());
        }
        if let Err(e) = self.train.validate() {
            violations.push(format!("train: {e}"));
        }
        if let Err(e) = self.distill.validate() {
            violations.push(format!("distill: {e}"));
        }
        if let Err(e) = self.cost.validate() {
            violations.push(format!("cost: {e}"));
        }
        if self.strategy == Strategy::Fedavg && self.rounds == 0 {
            violations.push("rounds: fedavg needs at least one round".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid { violations })
        }
    }
}
