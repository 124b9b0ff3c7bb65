//! Experiment configuration: one TOML file describes the network, the
//! training run, the sweep, and the cost model. Every key has a
//! default, unknown keys are rejected, and validation errors name the
//! offending key.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inject::FaultModel;
use crate::net::CnvOptions;
use crate::quant::FLOAT_BITS;
use crate::replicate::CostModel;
use crate::train::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable consulted when the config gives no dataset
/// directory.
pub const DATA_DIR_ENV: &str = "QFAT_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run name; prefixes output files and labels sweep reports.
    pub name: String,
    /// Master seed; every random stream is derived from it by name.
    pub seed: u64,
    pub dataset: DatasetSection,
    pub network: NetworkSection,
    pub train: TrainConfig,
    pub sweep: SweepSection,
    pub cost: CostSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "cnv".into(),
            seed: 1,
            dataset: DatasetSection::default(),
            network: NetworkSection::default(),
            train: TrainConfig::default(),
            sweep: SweepSection::default(),
            cost: CostSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Directory with the dataset files; falls back to `QFAT_DATA_DIR`.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub weight_bits: u8,
    pub act_bits: u8,
    pub fault_model: FaultModel,
    /// Dropout2D baseline strength in percent; 0 disables the layers.
    pub dropout2d_percent: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            weight_bits: 1,
            act_bits: 1,
            fault_model: FaultModel::Channel,
            dropout2d_percent: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub batch_size: usize,
    /// Evaluate on a fixed random subset of the test set this large;
    /// absent means the full test set.
    pub subset_size: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            batch_size: 100,
            subset_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub replication_multiplier: u64,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            replication_multiplier: 3,
        }
    }
}

fn check_bits(key: &str, bits: u8) -> Result<()> {
    if bits == FLOAT_BITS || (1..=4).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{key}: {bits} bits unsupported (use 1-4 or 32 for float)"
        )))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("name: must not be empty".into()));
        }
        check_bits("network.weight_bits", self.network.weight_bits)?;
        check_bits("network.act_bits", self.network.act_bits)?;
        if !(0.0..100.0).contains(&self.network.dropout2d_percent) {
            return Err(Error::Config(format!(
                "network.dropout2d_percent: {} outside [0, 100)",
                self.network.dropout2d_percent
            )));
        }
        if !(0.0..=100.0).contains(&self.train.injection_p) {
            return Err(Error::Config(format!(
                "train.injection_p: {} outside [0, 100]",
                self.train.injection_p
            )));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs: must be at least 1".into()));
        }
        if self.train.batch_size < 2 {
            return Err(Error::Config("train.batch_size: must be at least 2".into()));
        }
        if !(self.train.initial_lr.is_finite() && self.train.initial_lr > 0.0) {
            return Err(Error::Config(format!(
                "train.initial_lr: {} must be positive",
                self.train.initial_lr
            )));
        }
        if self.train.lr_halving_period == 0 {
            return Err(Error::Config(
                "train.lr_halving_period: must be at least 1".into(),
            ));
        }
        if self.train.eval_batch_size == 0 {
            return Err(Error::Config(
                "train.eval_batch_size: must be at least 1".into(),
            ));
        }
        if self.sweep.batch_size == 0 {
            return Err(Error::Config("sweep.batch_size: must be at least 1".into()));
        }
        if self.sweep.subset_size == Some(0) {
            return Err(Error::Config(
                "sweep.subset_size: must be at least 1 when given".into(),
            ));
        }
        if self.cost.replication_multiplier < 2 {
            return Err(Error::Config(
                "cost.replication_multiplier: must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Network builder options with geometry taken from the dataset.
    pub fn cnv_options(&self, data: &Dataset) -> CnvOptions {
        CnvOptions {
            weight_bits: self.network.weight_bits,
            act_bits: self.network.act_bits,
            in_channels: data.channels,
            input_height: data.height,
            input_width: data.width,
            classes: data.classes,
            fault_model: self.network.fault_model,
            dropout2d_p: if self.network.dropout2d_percent > 0.0 {
                Some(self.network.dropout2d_percent / 100.0)
            } else {
                None
            },
        }
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            weight_bits: self.network.weight_bits as u32,
            act_bits: self.network.act_bits as u32,
            replication_multiplier: self.cost.replication_multiplier,
        }
    }

    /// Dataset directory: the config key wins, then the environment
    /// variable.
    pub fn data_dir(&self, env_value: Option<&str>) -> Result<PathBuf> {
        if let Some(dir) = &self.dataset.dir {
            return Ok(dir.clone());
        }
        if let Some(v) = env_value {
            if !v.is_empty() {
                return Ok(PathBuf::from(v));
            }
        }
        Err(Error::Config(format!(
            "no dataset directory: set dataset.dir in the config or {DATA_DIR_ENV}"
        )))
    }
}
