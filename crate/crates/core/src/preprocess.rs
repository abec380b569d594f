//! Series cleaning and windowing.
//!
//! Fixed order per track: 3-sigma outlier zeroing, then moving-average
//! smoothing (both per feature series), then sliding-window segmentation.
//! Standardization statistics are fit on the training segments and applied
//! identically at scoring time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{self, FeatureMatrix, KinematicsConfig, Variant};
use crate::skeleton::PersonTrack;

/// Minimum standard deviation kept by [`Standardizer`].
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Half-width of the moving-average window.
    pub w: usize,
    /// Segment length in frames.
    #[serde(rename = "L")]
    pub segment_length: usize,
    pub stride: usize,
    pub sigma_k: f64,
    pub standardize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            w: 2,
            segment_length: 24,
            stride: 1,
            sigma_k: 3.0,
            standardize: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment_length < 2 {
            return Err(Error::Config(format!(
                "preprocess.L must be at least 2, got {}",
                self.segment_length
            )));
        }
        if self.stride < 1 {
            return Err(Error::Config("preprocess.stride must be at least 1".into()));
        }
        if !(self.sigma_k > 0.0 && self.sigma_k.is_finite()) {
            return Err(Error::Config(format!(
                "preprocess.sigma_k must be positive, got {}",
                self.sigma_k
            )));
        }
        Ok(())
    }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Replaces every value farther than `sigma_k` population standard deviations
/// from the series mean with 0. Zero-variance series are returned unchanged.
pub fn remove_outliers(series: &[f64], sigma_k: f64) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let (mean, std) = mean_and_std(series);
    if std == 0.0 {
        return series.to_vec();
    }
    let limit = sigma_k * std;
    series
        .iter()
        .map(|&x| if (x - mean).abs() > limit { 0.0 } else { x })
        .collect()
}

/// Centered moving average over `2w + 1` samples; windows are truncated at the ends.
pub fn smooth(series: &[f64], w: usize) -> Vec<f64> {
    if w == 0 {
        return series.to_vec();
    }
    let n = series.len();
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(w);
            let hi = (t + w).min(n - 1);
            let window = &series[lo..=hi];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect()
}

/// Outlier removal followed by smoothing.
pub fn clean_series(series: &[f64], cfg: &PreprocessConfig) -> Vec<f64> {
    smooth(&remove_outliers(series, cfg.sigma_k), cfg.w)
}

/// Extracts the variant's features from a track and cleans each column.
pub fn track_features(
    track: &PersonTrack,
    variant: Variant,
    kin: &KinematicsConfig,
    cfg: &PreprocessConfig,
) -> Result<FeatureMatrix> {
    let kinds = variant.features().to_vec();
    let columns = kinds
        .iter()
        .map(|&k| kinematics::feature_series(track, k, kin).map(|s| clean_series(&s.values, cfg)))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_columns(kinds, &columns)
}

/// A window of `length` consecutive feature rows, flattened time-major.
///
/// Element `t * features + f` holds feature `f` at window offset `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub data: Vec<f64>,
    pub features: usize,
    pub length: usize,
    pub video_id: String,
    pub person_id: String,
    /// First video frame covered by the window.
    pub start_frame: usize,
}

impl Segment {
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// Video frames covered, as a half-open range.
    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start_frame..self.start_frame + self.length
    }
}

/// Where a feature matrix came from; the matrix row 0 is `start_frame`.
#[derive(Debug, Clone, Copy)]
pub struct Provenance<'a> {
    pub video_id: &'a str,
    pub person_id: &'a str,
    pub start_frame: usize,
}

impl<'a> From<&'a PersonTrack> for Provenance<'a> {
    fn from(track: &'a PersonTrack) -> Self {
        Provenance {
            video_id: &track.video_id,
            person_id: &track.person_id,
            start_frame: track.start_frame,
        }
    }
}

/// Slides a window of `cfg.segment_length` rows over the matrix with step `cfg.stride`.
pub fn segment(features: &FeatureMatrix, cfg: &PreprocessConfig, source: Provenance<'_>) -> Vec<Segment> {
    let len = cfg.segment_length;
    let f = features.cols();
    if features.rows < len || len == 0 {
        return Vec::new();
    }
    (0..=features.rows - len)
        .step_by(cfg.stride.max(1))
        .map(|start| Segment {
            data: features.data[start * f..(start + len) * f].to_vec(),
            features: f,
            length: len,
            video_id: source.video_id.to_string(),
            person_id: source.person_id.to_string(),
            start_frame: source.start_frame + start,
        })
        .collect()
}

/// Full per-track preprocessing: features, cleaning and windowing.
pub fn track_segments(
    track: &PersonTrack,
    variant: Variant,
    kin: &KinematicsConfig,
    cfg: &PreprocessConfig,
) -> Result<Vec<Segment>> {
    let features = track_features(track, variant, kin, cfg)?;
    Ok(segment(&features, cfg, track.into()))
}

/// Per-feature-channel affine normalization fit on training segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Mean and population standard deviation per channel over every frame of every segment.
    pub fn fit(segments: &[Segment], features: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Validation(
                "cannot fit a standardizer on zero segments".into(),
            ));
        }
        if features == 0 {
            return Err(Error::Validation("feature count must be positive".into()));
        }
        let mut sum = vec![0.0; features];
        let mut count = 0usize;
        for seg in segments {
            if seg.features != features {
                return Err(Error::Validation(format!(
                    "segment has {} features, expected {features}",
                    seg.features
                )));
            }
            for row in seg.data.chunks_exact(features) {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                count += 1;
            }
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut sq = vec![0.0; features];
        for seg in segments {
            for row in seg.data.chunks_exact(features) {
                for ((acc, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let std = sq.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Standardizer { mean, std })
    }

    /// Identity map for `features` channels.
    pub fn identity(features: usize) -> Self {
        Standardizer {
            mean: vec![0.0; features],
            std: vec![1.0; features],
        }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    /// Normalizes a flattened time-major window in place.
    pub fn apply_in_place(&self, data: &mut [f64]) {
        let f = self.features();
        for row in data.chunks_exact_mut(f) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn apply(&self, data: &[f64]) -> Vec<f64> {
        let mut out = data.to_vec();
        self.apply_in_place(&mut out);
        out
    }
}
