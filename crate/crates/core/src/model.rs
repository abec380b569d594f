//! The persisted detector: a trained flow plus everything needed to
//! reproduce its input features at scoring time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Maf;
use crate::kinematics::{KinematicsConfig, Variant};
use crate::preprocess::{self, PreprocessConfig, Segment, Standardizer};
use crate::skeleton::PersonTrack;
use crate::training::{self, EpochStats, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowModel {
    pub format_version: u32,
    pub variant: Variant,
    #[serde(default)]
    pub kinematics: KinematicsConfig,
    pub preprocess: PreprocessConfig,
    pub standardizer: Standardizer,
    pub param_count: usize,
    pub flow: Maf,
}

impl FlowModel {
    pub fn new(
        variant: Variant,
        kinematics: KinematicsConfig,
        preprocess: PreprocessConfig,
        standardizer: Standardizer,
        flow: Maf,
    ) -> Result<Self> {
        let model = FlowModel {
            format_version: FORMAT_VERSION,
            variant,
            kinematics,
            preprocess,
            standardizer,
            param_count: flow.param_count(),
            flow,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let f = self.variant.feature_count();
        if self.standardizer.features() != f
            || self.standardizer.std.len() != f
        {
            return Err(Error::Validation(format!(
                "standardizer has {} channels but {} uses {f} features",
                self.standardizer.features(),
                self.variant
            )));
        }
        let d = self.preprocess.segment_length * f;
        if self.flow.dim() != d {
            return Err(Error::Validation(format!(
                "flow dimension {} does not match L*F = {d}",
                self.flow.dim()
            )));
        }
        if self.param_count != self.flow.param_count() {
            return Err(Error::Validation(format!(
                "stored param_count {} disagrees with the flow ({})",
                self.param_count,
                self.flow.param_count()
            )));
        }
        self.preprocess.validate()?;
        self.kinematics.validate()
    }

    /// Refuses to score with a model trained on a different feature set.
    pub fn ensure_variant(&self, requested: Variant) -> Result<()> {
        if requested != self.variant {
            return Err(Error::Config(format!(
                "model was trained for {} but {requested} was requested",
                self.variant
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FlowModel = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("invalid model file: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FlowModel::from_json(&text)
    }

    /// Windows of one track, cleaned exactly as during training (not yet standardized).
    pub fn segments(&self, track: &PersonTrack) -> Result<Vec<Segment>> {
        preprocess::track_segments(track, self.variant, &self.kinematics, &self.preprocess)
    }

    /// Log-density of a raw (unstandardized) segment.
    pub fn log_prob_segment(&self, segment: &Segment) -> Result<f64> {
        if segment.features != self.standardizer.features() {
            return Err(Error::Validation(format!(
                "segment has {} features, model expects {}",
                segment.features,
                self.standardizer.features()
            )));
        }
        self.flow.log_prob(&self.standardizer.apply(&segment.data))
    }
}

/// Result of [`fit`].
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: FlowModel,
    pub history: Vec<EpochStats>,
    pub initial_nll: f64,
    pub n_segments: usize,
}

/// Extracts, cleans and windows every training track, fits the standardizer and
/// trains the flow.
pub fn fit(
    tracks: &[PersonTrack],
    variant: Variant,
    kinematics: &KinematicsConfig,
    preprocess_cfg: &PreprocessConfig,
    train_cfg: &TrainConfig,
) -> Result<FitOutcome> {
    preprocess_cfg.validate()?;
    kinematics.validate()?;
    let mut segments = Vec::new();
    for track in tracks {
        segments.extend(preprocess::track_segments(track, variant, kinematics, preprocess_cfg)?);
    }
    if segments.is_empty() {
        return Err(Error::Validation(format!(
            "no training segments: every track is shorter than L = {}",
            preprocess_cfg.segment_length
        )));
    }
    let f = variant.feature_count();
    let standardizer = if preprocess_cfg.standardize {
        Standardizer::fit(&segments, f)?
    } else {
        Standardizer::identity(f)
    };
    let data: Vec<Vec<f64>> = segments.iter().map(|s| standardizer.apply(&s.data)).collect();
    let outcome = training::train(&data, train_cfg)?;
    let model = FlowModel::new(variant, *kinematics, *preprocess_cfg, standardizer, outcome.flow)?;
    Ok(FitOutcome {
        model,
        history: outcome.history,
        initial_nll: outcome.initial_nll,
        n_segments: segments.len(),
    })
}
