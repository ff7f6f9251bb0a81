use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::datasets::SyntheticName;
use crate::netkit::RmsPropConfig;

/// Current config schema version.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Hinge losses, unweighted; logs the IPM estimate.
    Wgan,
    /// Hinge losses with KL importance weights on generated samples; logs the
    /// Donsker–Varadhan estimate.
    Klwgan,
    /// Conjugate-form KL bound as the critic objective; logs the NWJ estimate.
    FganKl,
}

impl LossVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            LossVariant::Wgan => "wgan",
            LossVariant::Klwgan => "klwgan",
            LossVariant::FganKl => "fgan_kl",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic {
        name: SyntheticName,
        #[serde(default = "default_n")]
        n_train: usize,
        #[serde(default = "default_n")]
        n_valid: usize,
        /// Seed of the data stream; independent of the training seed so every
        /// run sees the same data.
        #[serde(default)]
        data_seed: u64,
    },
    Tabular {
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default = "default_valid_fraction")]
        valid_fraction: f64,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_n() -> usize {
    5000
}

fn default_delimiter() -> char {
    ','
}

fn default_valid_fraction() -> f64 {
    0.2
}

/// Full description of one training run. Every field has a default, so
/// `{}` plus a dataset is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    pub dataset: DatasetConfig,
    pub loss_variant: LossVariant,
    /// Divides critic outputs before computing KL weights.
    pub temp: f64,
    /// Stop gradients through the KL weights.
    pub detach_weights: bool,
    /// Use unit weights on the KL-weighted code path (ablation).
    pub force_unit_weights: bool,
    pub batch_size: usize,
    pub epochs: usize,
    pub critic_steps: usize,
    pub optimizer: RmsPropConfig,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub spectral_critic: bool,
    pub spectral_generator: bool,
    /// Power iterations per spectral-normalized forward pass.
    pub power_iters: usize,
    pub seed: u64,
    /// NLL/MMD are computed every this many epochs and at the last epoch.
    pub eval_every: usize,
    pub eval_samples: usize,
    /// `None` picks 0.25 for 2-D data and the median heuristic otherwise.
    pub h_kde: Option<f64>,
    /// `None` picks 0.5 for 2-D data and the median heuristic otherwise.
    pub h_mmd: Option<f64>,
    /// Size of the held-aside real/generated batches for divergence logging.
    pub divergence_batch: usize,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            version: CONFIG_VERSION,
            dataset: DatasetConfig::Synthetic {
                name: SyntheticName::Mog,
                n_train: default_n(),
                n_valid: default_n(),
                data_seed: 0,
            },
            loss_variant: LossVariant::Klwgan,
            temp: 1.0,
            detach_weights: false,
            force_unit_weights: false,
            batch_size: 256,
            epochs: 500,
            critic_steps: 1,
            optimizer: RmsPropConfig::default(),
            latent_dim: 2,
            hidden: vec![100, 100],
            leaky_slope: 0.2,
            spectral_critic: true,
            spectral_generator: false,
            power_iters: 1,
            seed: 0,
            eval_every: 50,
            eval_samples: 5000,
            h_kde: None,
            h_mmd: None,
            divergence_batch: 256,
            checkpoint_every: 0,
        }
    }
}

/// A config field that failed validation.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("invalid config field `{field}`: {msg}")]
pub struct ConfigError {
    pub field: String,
    pub msg: String,
}

fn bad(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        msg: msg.into(),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(bad("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if self.epochs < 1 {
            return Err(bad("epochs", "must be ≥ 1"));
        }
        if self.batch_size < 2 {
            return Err(bad("batch_size", "must be ≥ 2"));
        }
        if self.critic_steps < 1 {
            return Err(bad("critic_steps", "must be ≥ 1"));
        }
        if !(self.temp > 0.0 && self.temp.is_finite()) {
            return Err(bad("temp", "must be a positive number"));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return Err(bad("optimizer.lr", "must be a positive number"));
        }
        if !(0.0..1.0).contains(&o.rho) {
            return Err(bad("optimizer.rho", "must be in [0, 1)"));
        }
        if !(o.eps > 0.0) {
            return Err(bad("optimizer.eps", "must be > 0"));
        }
        if self.latent_dim < 1 {
            return Err(bad("latent_dim", "must be ≥ 1"));
        }
        if self.hidden.contains(&0) {
            return Err(bad("hidden", "widths must be ≥ 1"));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(bad("leaky_slope", "must be in [0, 1)"));
        }
        if self.power_iters < 1 {
            return Err(bad("power_iters", "must be ≥ 1"));
        }
        if self.eval_every < 1 {
            return Err(bad("eval_every", "must be ≥ 1"));
        }
        if self.eval_samples < 1 {
            return Err(bad("eval_samples", "must be ≥ 1"));
        }
        if self.divergence_batch < 1 {
            return Err(bad("divergence_batch", "must be ≥ 1"));
        }
        for (name, h) in [("h_kde", self.h_kde), ("h_mmd", self.h_mmd)] {
            if let Some(h) = h {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(bad(name, "must be a positive number"));
                }
            }
        }
        match &self.dataset {
            DatasetConfig::Synthetic { n_train, n_valid, .. } => {
                if *n_train < self.batch_size * self.critic_steps {
                    return Err(bad(
                        "dataset.n_train",
                        format!("{n_train} samples cannot fill {} batches of {}", self.critic_steps, self.batch_size),
                    ));
                }
                if *n_valid < 1 {
                    return Err(bad("dataset.n_valid", "must be ≥ 1"));
                }
            }
            DatasetConfig::Tabular { path, valid_fraction, delimiter, .. } => {
                if !path.is_file() {
                    return Err(bad("dataset.path", format!("no such file: {}", path.display())));
                }
                if !(*valid_fraction > 0.0 && *valid_fraction < 1.0) {
                    return Err(bad("dataset.valid_fraction", "must be in (0, 1)"));
                }
                if !delimiter.is_ascii() {
                    return Err(bad("dataset.delimiter", "must be a single ASCII character"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| bad(&json_error_field(&e), e.to_string()))
    }

    /// Applies `key=value` overrides with dotted keys (`optimizer.lr=2e-4`).
    /// Values are parsed as JSON, falling back to a plain string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| bad(item, "override must look like key=value"))?;
            let parsed: serde_json::Value =
                serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            let mut slot = &mut value;
            for part in key.split('.') {
                let obj = slot
                    .as_object_mut()
                    .ok_or_else(|| bad(key, "override path goes through a non-object"))?;
                slot = obj.entry(part.to_string()).or_insert(serde_json::Value::Null);
            }
            *slot = parsed;
        }
        serde_json::from_value(value).map_err(|e| bad(&json_error_field(&e), e.to_string()))
    }
}

/// Best-effort field name from a serde error message.
fn json_error_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "<config>".to_string()
}
