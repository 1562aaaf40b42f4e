use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DatasetMeta;
use crate::loss::LossConfig;
use crate::optim::{AdamWConfig, Schedule};
use crate::unet::{NetworkConfig, Task, Variant};

/// Everything a training run needs. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub in_channels: usize,
    pub num_classes: usize,
    pub num_stages: usize,
    pub base_channels: usize,
    pub channel_cap: usize,
    pub variant: Variant,
    pub patch_size: Vec<usize>,
    pub heads: usize,
    pub expansion: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub loss: LossConfig,
    pub nsd_tau: f64,
    pub schedule: Schedule,
    pub seed: u64,
    /// Random axis flips of training patches.
    pub mirror: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let net = NetworkConfig::desk_2d(3, Variant::Enc);
        let adam = AdamWConfig::default();
        Self {
            task: net.task,
            in_channels: net.in_channels,
            num_classes: net.num_classes,
            num_stages: net.num_stages,
            base_channels: net.base_channels,
            channel_cap: net.channel_cap,
            variant: net.variant,
            patch_size: net.patch_size,
            heads: net.heads,
            expansion: net.expansion,
            lr: 0.01,
            weight_decay: adam.weight_decay,
            beta1: adam.beta1,
            beta2: adam.beta2,
            batch_size: 2,
            epochs: 10,
            steps_per_epoch: 10,
            loss: LossConfig::default(),
            nsd_tau: 1.0,
            schedule: Schedule::Poly,
            seed: 0,
            mirror: false,
            out_dir: None,
        }
    }
}

fn field_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        msg: msg.into(),
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| field_err("config", format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            task: self.task,
            in_channels: self.in_channels,
            num_classes: self.num_classes,
            num_stages: self.num_stages,
            base_channels: self.base_channels,
            channel_cap: self.channel_cap,
            variant: self.variant,
            patch_size: self.patch_size.clone(),
            heads: self.heads,
            expansion: self.expansion,
            seed: self.seed,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network().validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(field_err("lr", format!("must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(field_err("weight_decay", format!("must be >= 0, got {}", self.weight_decay)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(field_err(name, format!("must be in [0, 1), got {b}")));
            }
        }
        if self.batch_size == 0 {
            return Err(field_err("batch_size", "must be positive"));
        }
        if self.steps_per_epoch == 0 {
            return Err(field_err("steps_per_epoch", "must be positive"));
        }
        if !(self.nsd_tau > 0.0) {
            return Err(field_err("nsd_tau", format!("must be positive, got {}", self.nsd_tau)));
        }
        self.loss.validate(self.num_classes)
    }

    /// Checks the run against a dataset's `dataset.json`.
    pub fn check_dataset(&self, meta: &DatasetMeta) -> Result<()> {
        if meta.dims != self.task.rank() {
            return Err(field_err(
                "task",
                format!("dataset is {}D but the run is {}D", meta.dims, self.task.rank()),
            ));
        }
        if meta.in_channels != self.in_channels {
            return Err(field_err(
                "in_channels",
                format!("dataset has {} channels, config says {}", meta.in_channels, self.in_channels),
            ));
        }
        if meta.classes != self.num_classes {
            return Err(field_err(
                "num_classes",
                format!("dataset has {} classes, config says {}", meta.classes, self.num_classes),
            ));
        }
        Ok(())
    }

    /// Every case extent must survive `num_stages` halvings exactly.
    pub fn check_case_shape(&self, case: &str, spatial: &[usize]) -> Result<()> {
        let factor = 1usize << self.num_stages;
        if let Some((axis, &n)) = spatial.iter().enumerate().find(|(_, &n)| n % factor != 0) {
            return Err(field_err(
                "num_stages",
                format!("case `{case}` has extent {n} on axis {axis}, not divisible by 2^{} = {factor}", self.num_stages),
            ));
        }
        Ok(())
    }
}
