//! Seeded synthetic gait tracks with labelled anomalies.
//!
//! Normal walking: the feet midpoint moves at constant speed along a heading
//! while the feet swing in anti-phase about it, `±(A/2)·sin(2πt/P)` along the
//! heading. Noise-free stride is therefore `A·|sin(2πt/P)|` and noise-free
//! displacement is exactly the speed. The neck sits `neck_height` pixels above
//! the midpoint and bobs vertically with amplitude `A/10` at period `P/2`.
//!
//! Anomalous intervals:
//! * skateboard: feet locked at stride `A/4`, speed `2.5·v`;
//! * run: period `P/2`, amplitude `1.5·A`, speed `2·v`;
//! * fall: feet stop at stride `A/4`; the neck drops by `3·neck_height` over
//!   five frames and stays down for the rest of the track.
//!
//! Every track has joints `[left_foot, right_foot, neck]`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{
    save_labels_csv, save_tracks, DatasetManifest, Joint, JointMap, ManifestFile, PersonTrack,
    VideoLabels,
};

/// Frames over which a fall lowers the neck.
pub const FALL_FRAMES: usize = 5;

pub const JOINT_MAP: JointMap = JointMap {
    left_foot: 0,
    right_foot: 1,
    neck: Some(2),
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    /// Pixels per frame.
    pub speed: f64,
    /// Peak stride in pixels.
    pub amplitude: f64,
    /// Gait period in frames.
    pub period: f64,
    /// Walking direction in radians (image coordinates).
    pub heading: f64,
    /// Standard deviation of per-joint Gaussian noise, pixels.
    pub jitter: f64,
    pub start: (f64, f64),
    /// Vertical distance from feet midpoint to neck, pixels.
    pub neck_height: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        GaitParams {
            speed: 2.0,
            amplitude: 30.0,
            period: 20.0,
            heading: 0.0,
            jitter: 0.25,
            start: (320.0, 240.0),
            neck_height: 60.0,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.speed >= 0.0
            && self.amplitude >= 0.0
            && self.period >= 2.0
            && self.jitter >= 0.0
            && self.neck_height >= 0.0
            && [self.speed, self.amplitude, self.period, self.heading, self.jitter, self.start.0, self.start.1, self.neck_height]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "gait parameters need v >= 0, A >= 0, P >= 2, sigma >= 0: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Skateboard,
    Run,
    Fall,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [AnomalyKind::Skateboard, AnomalyKind::Run, AnomalyKind::Fall];
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalyKind::Skateboard => "skateboard",
            AnomalyKind::Run => "run",
            AnomalyKind::Fall => "fall",
        })
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "skateboard" => Ok(AnomalyKind::Skateboard),
            "run" => Ok(AnomalyKind::Run),
            "fall" => Ok(AnomalyKind::Fall),
            other => Err(Error::Config(format!(
                "unknown anomaly kind {other:?} (expected skateboard, run or fall)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub onset: usize,
    pub duration: usize,
}

impl AnomalySpec {
    pub fn contains(&self, t: usize) -> bool {
        t >= self.onset && t < self.onset + self.duration
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if self.duration == 0 || self.onset + self.duration > len {
            return Err(Error::Validation(format!(
                "anomaly [{}, {}) does not fit a track of {len} frames",
                self.onset,
                self.onset + self.duration
            )));
        }
        Ok(())
    }
}

fn simulate(params: &GaitParams, len: usize, anomaly: Option<&AnomalySpec>, seed: u64) -> Result<PersonTrack> {
    params.validate()?;
    if len == 0 {
        return Err(Error::Validation("track length must be at least 1".into()));
    }
    if let Some(spec) = anomaly {
        spec.validate(len)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.jitter).expect("jitter validated non-negative");
    let (dir_x, dir_y) = (params.heading.cos(), params.heading.sin());
    let a = params.amplitude;

    let (mut px, mut py) = params.start;
    // Gait phase in cycles, so that the normal phase is exactly t / P.
    let mut cycles = 0.0;
    let mut drop = 0.0;
    let mut drop_frames = 0;
    let mut frames = Vec::with_capacity(len);

    for t in 0..len {
        let kind = anomaly.filter(|s| s.contains(t)).map(|s| s.kind);
        let (speed, period, half_stride) = match kind {
            None => (params.speed, Some(params.period), None),
            Some(AnomalyKind::Run) => (2.0 * params.speed, Some(params.period / 2.0), None),
            Some(AnomalyKind::Skateboard) => (2.5 * params.speed, None, Some(a / 8.0)),
            Some(AnomalyKind::Fall) => (0.0, None, Some(a / 8.0)),
        };
        if t > 0 {
            px += speed * dir_x;
            py += speed * dir_y;
            if let Some(p) = period {
                cycles += 1.0 / p;
            }
        }
        if kind == Some(AnomalyKind::Fall) && drop_frames < FALL_FRAMES {
            drop += 3.0 * params.neck_height / FALL_FRAMES as f64;
            drop_frames += 1;
        }
        let swing = match (kind, half_stride) {
            (_, Some(h)) => h,
            (Some(AnomalyKind::Run), None) => 0.75 * a * (TAU * cycles).sin(),
            _ => 0.5 * a * (TAU * cycles).sin(),
        };
        let bob = a / 10.0 * (2.0 * TAU * cycles).sin();
        let clean = [
            (px + swing * dir_x, py + swing * dir_y),
            (px - swing * dir_x, py - swing * dir_y),
            (px, py - params.neck_height + bob + drop),
        ];
        let pose = clean
            .iter()
            .map(|&(x, y)| {
                if params.jitter > 0.0 {
                    Joint::new(x + noise.sample(&mut rng), y + noise.sample(&mut rng))
                } else {
                    Joint::new(x, y)
                }
            })
            .collect();
        frames.push(pose);
    }
    PersonTrack::new("synthetic", "p0", 0, frames, JOINT_MAP)
}

/// A normal walking track of `len` frames.
pub fn generate_walk(params: &GaitParams, len: usize, seed: u64) -> Result<PersonTrack> {
    simulate(params, len, None, seed)
}

/// A walking track with one anomalous interval, and its frame labels.
pub fn generate_anomaly(
    params: &GaitParams,
    spec: &AnomalySpec,
    len: usize,
    seed: u64,
) -> Result<(PersonTrack, VideoLabels)> {
    let track = simulate(params, len, Some(spec), seed)?;
    let labels = (0..len).map(|t| u8::from(spec.contains(t))).collect();
    let labels = VideoLabels::new(track.video_id.clone(), labels)?;
    Ok((track, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_test_normal: usize,
    pub n_test_anomalous: usize,
    /// Anomaly kinds, assigned round-robin to anomalous test tracks.
    pub kinds: Vec<AnomalyKind>,
    pub track_len: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_train: 200,
            n_test_normal: 50,
            n_test_anomalous: 50,
            kinds: AnomalyKind::ALL.to_vec(),
            track_len: 100,
            seed: 0,
        }
    }
}

fn sample_params<R: Rng>(rng: &mut R) -> GaitParams {
    GaitParams {
        speed: rng.random_range(1.5..3.0),
        amplitude: rng.random_range(20.0..40.0),
        period: rng.random_range(16.0..24.0),
        heading: rng.random_range(0.0..2.0 * PI),
        jitter: 0.25,
        start: (rng.random_range(100.0..540.0), rng.random_range(100.0..380.0)),
        neck_height: rng.random_range(50.0..70.0),
    }
}

/// Anomaly onset and duration for a track of `len` frames.
///
/// For the default 100-frame tracks: onset in [20, 35], duration in [40, 60].
fn sample_spec<R: Rng>(rng: &mut R, kind: AnomalyKind, len: usize) -> AnomalySpec {
    let onset_lo = len / 5;
    let onset_hi = (len * 7 / 20).max(onset_lo);
    let onset = rng.random_range(onset_lo..=onset_hi).min(len - 1);
    let dur_lo = (len * 2 / 5).max(1);
    let dur_hi = (len * 3 / 5).max(dur_lo);
    let duration = rng.random_range(dur_lo..=dur_hi).min(len - onset);
    AnomalySpec { kind, onset, duration }
}

/// Train (normals only) and test splits, fully in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub train: DatasetManifest,
    pub test: DatasetManifest,
    /// Ground-truth anomaly per test video, for diagnostics.
    pub anomalies: Vec<(String, AnomalySpec)>,
}

pub fn synthesize(cfg: &DatasetConfig) -> Result<SyntheticDataset> {
    if cfg.track_len < 2 {
        return Err(Error::Validation("track_len must be at least 2".into()));
    }
    if cfg.n_test_anomalous > 0 && cfg.kinds.is_empty() {
        return Err(Error::Validation("anomalous tracks requested but no kinds given".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let len = cfg.track_len;

    let mut train_tracks = Vec::with_capacity(cfg.n_train);
    let mut train_counts = BTreeMap::new();
    for i in 0..cfg.n_train {
        let params = sample_params(&mut rng);
        let mut track = generate_walk(&params, len, rng.random())?;
        track.video_id = format!("train_{i:04}");
        train_counts.insert(track.video_id.clone(), len);
        train_tracks.push(track);
    }

    let mut test_tracks = Vec::new();
    let mut test_labels = Vec::new();
    let mut test_counts = BTreeMap::new();
    let mut anomalies = Vec::new();
    for i in 0..cfg.n_test_normal + cfg.n_test_anomalous {
        let params = sample_params(&mut rng);
        let video_id = format!("test_{i:04}");
        let (mut track, labels) = if i < cfg.n_test_normal {
            let track = generate_walk(&params, len, rng.random())?;
            (track, vec![0; len])
        } else {
            let kind = cfg.kinds[(i - cfg.n_test_normal) % cfg.kinds.len()];
            let spec = sample_spec(&mut rng, kind, len);
            anomalies.push((video_id.clone(), spec));
            let (track, labels) = generate_anomaly(&params, &spec, len, rng.random())?;
            (track, labels.labels)
        };
        track.video_id = video_id.clone();
        test_counts.insert(video_id.clone(), len);
        test_labels.push(VideoLabels::new(video_id, labels)?);
        test_tracks.push(track);
    }

    Ok(SyntheticDataset {
        train: DatasetManifest::new("synthetic-train", train_tracks, Vec::new(), train_counts)?,
        test: DatasetManifest::new("synthetic-test", test_tracks, test_labels, test_counts)?,
        anomalies,
    })
}

/// Paths written by [`write_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenDataset {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
}

/// Writes `train/` and `test/` subdirectories, each with tracks and a manifest.
pub fn write_dataset(dir: impl AsRef<Path>, data: &SyntheticDataset) -> Result<WrittenDataset> {
    let dir = dir.as_ref();
    let write_split = |name: &str, split: &DatasetManifest| -> Result<PathBuf> {
        let sub = dir.join(name);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        save_tracks(sub.join("tracks.jsonl"), &split.tracks)?;
        let mut label_files = Vec::new();
        if !split.labels.is_empty() {
            save_labels_csv(sub.join("labels.csv"), &split.labels)?;
            label_files.push(PathBuf::from("labels.csv"));
        }
        let manifest = ManifestFile {
            name: split.name.clone(),
            track_files: vec![PathBuf::from("tracks.jsonl")],
            label_files,
            frame_counts: split.frame_counts.clone(),
        };
        let path = sub.join("manifest.json");
        manifest.save(&path)?;
        Ok(path)
    };
    Ok(WrittenDataset {
        train_manifest: write_split("train", &data.train)?,
        test_manifest: write_split("test", &data.test)?,
    })
}

/// [`synthesize`] followed by [`write_dataset`].
pub fn generate_dataset(dir: impl AsRef<Path>, cfg: &DatasetConfig) -> Result<(SyntheticDataset, WrittenDataset)> {
    let data = synthesize(cfg)?;
    let written = write_dataset(dir, &data)?;
    Ok((data, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{displacement_series, neck_displacement_series, stride_series};

    fn clean() -> GaitParams {
        GaitParams {
            jitter: 0.0,
            heading: 0.7,
            ..Default::default()
        }
    }

    #[test]
    fn noise_free_stride_is_closed_form() {
        let p = clean();
        let track = generate_walk(&p, 120, 1).unwrap();
        let stride = stride_series(&track).values;
        for (t, s) in stride.iter().enumerate() {
            let expected = p.amplitude * (TAU * t as f64 / p.period).sin().abs();
            assert!((s - expected).abs() < 1e-9, "t={t}: {s} vs {expected}");
        }
    }

    #[test]
    fn noise_free_displacement_is_speed() {
        let p = clean();
        let track = generate_walk(&p, 80, 1).unwrap();
        let d = displacement_series(&track).values;
        assert_eq!(d[0], 0.0);
        assert!(d[1..].iter().all(|v| (v - p.speed).abs() < 1e-9));
    }

    #[test]
    fn same_seed_same_track() {
        let p = GaitParams::default();
        assert_eq!(generate_walk(&p, 50, 9).unwrap(), generate_walk(&p, 50, 9).unwrap());
        assert_ne!(generate_walk(&p, 50, 9).unwrap(), generate_walk(&p, 50, 10).unwrap());
    }

    #[test]
    fn skateboard_stride_is_constant_quarter_amplitude() {
        let p = clean();
        let spec = AnomalySpec {
            kind: AnomalyKind::Skateboard,
            onset: 30,
            duration: 40,
        };
        let (track, labels) = generate_anomaly(&p, &spec, 100, 3).unwrap();
        let stride = stride_series(&track).values;
        let disp = displacement_series(&track).values;
        for t in 30..70 {
            assert!((stride[t] - p.amplitude / 4.0).abs() < 1e-9);
            assert!((disp[t] - 2.5 * p.speed).abs() < 1e-9);
        }
        assert_eq!(labels.labels.iter().map(|&l| l as usize).sum::<usize>(), 40);
    }

    #[test]
    fn run_is_faster_with_wider_stride() {
        let p = clean();
        let spec = AnomalySpec {
            kind: AnomalyKind::Run,
            onset: 10,
            duration: 50,
        };
        let (track, _) = generate_anomaly(&p, &spec, 80, 3).unwrap();
        let stride = stride_series(&track).values;
        let disp = displacement_series(&track).values;
        let peak = stride[10..60].iter().cloned().fold(0.0, f64::max);
        assert!(peak > 1.4 * p.amplitude && peak <= 1.5 * p.amplitude + 1e-9);
        assert!(disp[10..60].iter().all(|d| (d - 2.0 * p.speed).abs() < 1e-9));
    }

    #[test]
    fn fall_neck_burst() {
        let p = clean();
        let spec = AnomalySpec {
            kind: AnomalyKind::Fall,
            onset: 40,
            duration: 30,
        };
        let (track, _) = generate_anomaly(&p, &spec, 100, 3).unwrap();
        let neck = neck_displacement_series(&track).unwrap().values;
        let burst = 3.0 * p.neck_height / 5.0;
        for (t, v) in neck.iter().enumerate().take(45).skip(40) {
            assert!(*v >= burst - 1e-9, "t={t}: {v}");
        }
        assert!(neck[45..70].iter().all(|&v| v < 1e-9));
        let disp = displacement_series(&track).values;
        assert!(disp[41..70].iter().all(|&d| d < 1e-9));
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let spec = AnomalySpec {
            kind: AnomalyKind::Run,
            onset: 90,
            duration: 20,
        };
        assert!(generate_anomaly(&clean(), &spec, 100, 0).is_err());
    }

    #[test]
    fn empty_dataset() {
        let cfg = DatasetConfig {
            n_train: 0,
            n_test_normal: 0,
            n_test_anomalous: 0,
            ..Default::default()
        };
        let data = synthesize(&cfg).unwrap();
        assert!(data.train.tracks.is_empty() && data.test.tracks.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let written = write_dataset(dir.path(), &data).unwrap();
        assert!(DatasetManifest::load(&written.test_manifest).unwrap().tracks.is_empty());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Fall".parse::<AnomalyKind>().unwrap(), AnomalyKind::Fall);
        assert!("dance".parse::<AnomalyKind>().is_err());
    }
}
