//! Run configuration: built-in defaults, overridden by a config file, overridden
//! by command-line flags (the last layer is applied by the caller).
//!
//! The file is flat `section.key = value` text (valid TOML):
//!
//! ```text
//! variant = "hkvad2"
//! seed = 0
//! preprocess.w = 2
//! preprocess.L = 24
//! flow.blocks = 3
//! train.learning_rate = 5e-4
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{KinematicsConfig, Variant};
use crate::preprocess::PreprocessConfig;
use crate::scoring::Fill;
use crate::training::{OptimizerKind, TrainConfig};

/// Every accepted key with a one-line description, for `--help` output.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("variant", "feature set: hkvad1 | hkvad2 | hkvad3 (default hkvad2)"),
    ("seed", "RNG seed for initialization and shuffling (default 0)"),
    ("kinematics.frame_width", "divide x by this before computing features (with frame_height)"),
    ("kinematics.frame_height", "divide y by this before computing features (with frame_width)"),
    ("preprocess.w", "moving-average half-width (default 2)"),
    ("preprocess.L", "segment length in frames (default 24)"),
    ("preprocess.stride", "window step in frames (default 1)"),
    ("preprocess.sigma_k", "outlier threshold in standard deviations (default 3.0)"),
    ("preprocess.standardize", "per-feature standardization before the flow (default true)"),
    ("flow.blocks", "number of MADE blocks (default 3)"),
    ("flow.hidden", "hidden width per block, 0 = direct heads (default 8)"),
    ("train.batch_size", "minibatch size (default 256)"),
    ("train.learning_rate", "optimizer step size (default 5e-4)"),
    ("train.epochs", "passes over the training segments (default 8)"),
    ("train.optimizer", "adamax | adam (default adamax)"),
    ("score.fill", "score for frames no window covers: \"max\" or a number (default max)"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    pub variant: Variant,
    pub kinematics: KinematicsConfig,
    pub preprocess: PreprocessConfig,
    /// Also carries the seed and the flow shape.
    pub train: TrainConfig,
    pub fill: Fill,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    v.as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| Error::Config(format!("{key} must be a non-negative integer, got {v}")))
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .ok_or_else(|| Error::Config(format!("{key} must be a number, got {v}")))
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("{key} must be a string, got {v}")))
}

impl RunConfig {
    /// Applies the keys in `text` on top of `self`.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut width = None;
        let mut height = None;
        for (key, v) in &entries {
            let k = key.as_str();
            match k {
                "variant" => self.variant = as_str(k, v)?.parse()?,
                "seed" => {
                    self.train.seed = v
                        .as_integer()
                        .and_then(|i| u64::try_from(i).ok())
                        .ok_or_else(|| Error::Config(format!("seed must be a non-negative integer, got {v}")))?
                }
                "kinematics.frame_width" => width = Some(as_f64(k, v)?),
                "kinematics.frame_height" => height = Some(as_f64(k, v)?),
                "preprocess.w" => self.preprocess.w = as_usize(k, v)?,
                "preprocess.L" => self.preprocess.segment_length = as_usize(k, v)?,
                "preprocess.stride" => self.preprocess.stride = as_usize(k, v)?,
                "preprocess.sigma_k" => self.preprocess.sigma_k = as_f64(k, v)?,
                "preprocess.standardize" => {
                    self.preprocess.standardize = v
                        .as_bool()
                        .ok_or_else(|| Error::Config(format!("{k} must be true or false, got {v}")))?
                }
                "flow.blocks" => self.train.blocks = as_usize(k, v)?,
                "flow.hidden" => self.train.hidden = as_usize(k, v)?,
                "train.batch_size" => self.train.batch_size = as_usize(k, v)?,
                "train.learning_rate" => self.train.learning_rate = as_f64(k, v)?,
                "train.epochs" => self.train.epochs = as_usize(k, v)?,
                "train.optimizer" => {
                    self.train.optimizer = match as_str(k, v)?.to_ascii_lowercase().as_str() {
                        "adamax" => OptimizerKind::Adamax,
                        "adam" => OptimizerKind::Adam,
                        other => {
                            return Err(Error::Config(format!(
                                "train.optimizer must be adamax or adam, got {other:?}"
                            )))
                        }
                    }
                }
                "score.fill" => {
                    self.fill = match v {
                        toml::Value::String(s) => s.parse()?,
                        other => Fill::Constant(as_f64(k, other)?),
                    }
                }
                _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
            }
        }
        match (width, height) {
            (None, None) => {}
            (Some(w), Some(h)) => self.kinematics.frame_size = Some((w, h)),
            _ => {
                return Err(Error::Config(
                    "kinematics.frame_width and kinematics.frame_height must be set together".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.kinematics.validate()?;
        self.preprocess.validate()?;
        self.train.validate()
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }
}
