//! Gait time series derived from a person track.
//!
//! * stride: distance between the two feet in each pose;
//! * displacement: movement of the feet midpoint between consecutive poses;
//! * neck displacement: movement of the neck joint between consecutive poses.
//!
//! Both displacement kinds are defined as 0 at the first pose.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Joint, PersonTrack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Stride,
    Displacement,
    NeckDisplacement,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Stride => "stride",
            FeatureKind::Displacement => "displacement",
            FeatureKind::NeckDisplacement => "neck_displacement",
        }
    }
}

/// Feature-set selection. Column order is always stride, displacement, neck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Displacement only.
    Hkvad1,
    /// Stride and displacement.
    #[default]
    Hkvad2,
    /// Stride, displacement and neck displacement.
    Hkvad3,
}

impl Variant {
    pub fn features(self) -> &'static [FeatureKind] {
        use FeatureKind::*;
        match self {
            Variant::Hkvad1 => &[Displacement],
            Variant::Hkvad2 => &[Stride, Displacement],
            Variant::Hkvad3 => &[Stride, Displacement, NeckDisplacement],
        }
    }

    pub fn feature_count(self) -> usize {
        self.features().len()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Hkvad1 => "hkvad1",
            Variant::Hkvad2 => "hkvad2",
            Variant::Hkvad3 => "hkvad3",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "hkvad1" | "1" => Ok(Variant::Hkvad1),
            "hkvad2" | "2" => Ok(Variant::Hkvad2),
            "hkvad3" | "3" => Ok(Variant::Hkvad3),
            _ => Err(Error::Config(format!(
                "unknown variant {s:?} (expected hkvad1, hkvad2 or hkvad3)"
            ))),
        }
    }
}

/// Optional coordinate scaling applied before any distance is taken.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KinematicsConfig {
    /// When set, x is divided by the width and y by the height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<(f64, f64)>,
}

impl KinematicsConfig {
    fn scale(&self, j: &Joint) -> Joint {
        match self.frame_size {
            None => *j,
            Some((w, h)) => Joint {
                x: j.x / w,
                y: j.y / h,
                confidence: j.confidence,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((w, h)) = self.frame_size {
            if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
                return Err(Error::Config(format!(
                    "frame size must be positive, got {w} x {h}"
                )));
            }
        }
        Ok(())
    }
}

/// A univariate per-frame series with the provenance of the track it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
    pub video_id: String,
    pub person_id: String,
    pub start_frame: usize,
}

impl FeatureSeries {
    fn from_track(kind: FeatureKind, track: &PersonTrack, values: Vec<f64>) -> Self {
        FeatureSeries {
            kind,
            values,
            video_id: track.video_id.clone(),
            person_id: track.person_id.clone(),
            start_frame: track.start_frame,
        }
    }
}

fn midpoint(a: &Joint, b: &Joint) -> Joint {
    Joint::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
}

fn consecutive_distances(points: impl Iterator<Item = Joint>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev: Option<Joint> = None;
    for p in points {
        out.push(prev.map_or(0.0, |q| p.distance(&q)));
        prev = Some(p);
    }
    out
}

pub fn stride_series(track: &PersonTrack) -> FeatureSeries {
    stride_series_with(track, &KinematicsConfig::default())
}

pub fn stride_series_with(track: &PersonTrack, cfg: &KinematicsConfig) -> FeatureSeries {
    let map = track.joint_map;
    let values = track
        .frames
        .iter()
        .map(|pose| cfg.scale(&pose[map.left_foot]).distance(&cfg.scale(&pose[map.right_foot])))
        .collect();
    FeatureSeries::from_track(FeatureKind::Stride, track, values)
}

pub fn displacement_series(track: &PersonTrack) -> FeatureSeries {
    displacement_series_with(track, &KinematicsConfig::default())
}

pub fn displacement_series_with(track: &PersonTrack, cfg: &KinematicsConfig) -> FeatureSeries {
    let map = track.joint_map;
    let mids = track
        .frames
        .iter()
        .map(|pose| midpoint(&cfg.scale(&pose[map.left_foot]), &cfg.scale(&pose[map.right_foot])));
    FeatureSeries::from_track(FeatureKind::Displacement, track, consecutive_distances(mids))
}

pub fn neck_displacement_series(track: &PersonTrack) -> Result<FeatureSeries> {
    neck_displacement_series_with(track, &KinematicsConfig::default())
}

pub fn neck_displacement_series_with(
    track: &PersonTrack,
    cfg: &KinematicsConfig,
) -> Result<FeatureSeries> {
    let neck = track.joint_map.neck.ok_or_else(|| {
        Error::Config(format!(
            "track {}/{} has no neck joint in joint_map; hkvad3 needs one",
            track.video_id, track.person_id
        ))
    })?;
    let necks = track.frames.iter().map(|pose| cfg.scale(&pose[neck]));
    Ok(FeatureSeries::from_track(
        FeatureKind::NeckDisplacement,
        track,
        consecutive_distances(necks),
    ))
}

/// Computes the series for one feature kind.
pub fn feature_series(
    track: &PersonTrack,
    kind: FeatureKind,
    cfg: &KinematicsConfig,
) -> Result<FeatureSeries> {
    match kind {
        FeatureKind::Stride => Ok(stride_series_with(track, cfg)),
        FeatureKind::Displacement => Ok(displacement_series_with(track, cfg)),
        FeatureKind::NeckDisplacement => neck_displacement_series_with(track, cfg),
    }
}

/// A T x F matrix stored row-major (time-major), one column per feature kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kinds: Vec<FeatureKind>,
    pub rows: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    /// Interleaves equal-length columns into a row-major matrix.
    pub fn from_columns(kinds: Vec<FeatureKind>, columns: &[Vec<f64>]) -> Result<Self> {
        assert_eq!(kinds.len(), columns.len());
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Validation("feature columns differ in length".into()));
        }
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (f, column) in columns.iter().enumerate() {
            for (t, &v) in column.iter().enumerate() {
                data[t * cols + f] = v;
            }
        }
        Ok(FeatureMatrix { kinds, rows, data })
    }

    pub fn cols(&self) -> usize {
        self.kinds.len()
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.data[t * self.cols() + f]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let f = self.cols();
        &self.data[t * f..(t + 1) * f]
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self.get(t, f)).collect()
    }
}

pub fn assemble_features(track: &PersonTrack, variant: Variant) -> Result<FeatureMatrix> {
    assemble_features_with(track, variant, &KinematicsConfig::default())
}

pub fn assemble_features_with(
    track: &PersonTrack,
    variant: Variant,
    cfg: &KinematicsConfig,
) -> Result<FeatureMatrix> {
    let kinds = variant.features().to_vec();
    let columns = kinds
        .iter()
        .map(|&k| feature_series(track, k, cfg).map(|s| s.values))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_columns(kinds, &columns)
}
