//! Tracked skeleton sequences, per-frame labels and dataset manifests.
//!
//! Track files are JSON Lines, one person track per line:
//!
//! ```text
//! {"video_id": "v1", "person_id": "p0", "start_frame": 0,
//!  "joint_map": {"left_foot": 0, "right_foot": 1, "neck": 2},
//!  "frames": [[[x, y, conf?], ...k joints], ...T poses]}
//! ```
//!
//! Label files are CSV (`video_id,frame,label`) or JSON Lines
//! (`{"video_id": str, "labels": [0, 1, ...]}`), chosen by file extension.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One 2-D keypoint in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub x: f64,
    pub y: f64,
    /// Detector confidence. Carried through I/O but not used by the pipeline.
    pub confidence: f64,
}

impl Joint {
    pub fn new(x: f64, y: f64) -> Self {
        Joint {
            x,
            y,
            confidence: 1.0,
        }
    }

    pub fn distance(&self, other: &Joint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Which joint indices play the roles the kinematic features need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointMap {
    pub left_foot: usize,
    pub right_foot: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neck: Option<usize>,
}

/// A single person's contiguous skeleton sequence within one video.
///
/// Pose `j` corresponds to video frame `start_frame + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack {
    pub video_id: String,
    pub person_id: String,
    pub start_frame: usize,
    pub frames: Vec<Vec<Joint>>,
    pub joint_map: JointMap,
}

impl PersonTrack {
    /// Builds a track and checks its invariants.
    pub fn new(
        video_id: impl Into<String>,
        person_id: impl Into<String>,
        start_frame: usize,
        frames: Vec<Vec<Joint>>,
        joint_map: JointMap,
    ) -> Result<Self> {
        let track = PersonTrack {
            video_id: video_id.into(),
            person_id: person_id.into(),
            start_frame,
            frames,
            joint_map,
        };
        track.validate().map_err(Error::Validation)?;
        Ok(track)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Number of joints per pose.
    pub fn joints_per_pose(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    /// One past the last video frame covered by this track.
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.frames.len()
    }

    /// Checks the structural invariants, returning a description of the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.frames.is_empty() {
            return Err(format!(
                "track {}/{} has no poses",
                self.video_id, self.person_id
            ));
        }
        let k = self.frames[0].len();
        if k == 0 {
            return Err("poses must contain at least one joint".into());
        }
        for (t, pose) in self.frames.iter().enumerate() {
            if pose.len() != k {
                return Err(format!(
                    "inconsistent joint count: pose 0 has {k} joints, pose {t} has {}",
                    pose.len()
                ));
            }
            for (j, joint) in pose.iter().enumerate() {
                if !joint.x.is_finite() {
                    return Err(format!("frames[{t}][{j}].x is not finite"));
                }
                if !joint.y.is_finite() {
                    return Err(format!("frames[{t}][{j}].y is not finite"));
                }
            }
        }
        let roles = [
            ("left_foot", Some(self.joint_map.left_foot)),
            ("right_foot", Some(self.joint_map.right_foot)),
            ("neck", self.joint_map.neck),
        ];
        for (role, idx) in roles {
            if let Some(idx) = idx {
                if idx >= k {
                    return Err(format!(
                        "joint_map.{role} = {idx} is out of range for {k} joints"
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawJointMap {
    left_foot: Option<usize>,
    right_foot: Option<usize>,
    neck: Option<usize>,
}

#[derive(Deserialize)]
struct RawTrack {
    video_id: String,
    person_id: String,
    start_frame: usize,
    joint_map: RawJointMap,
    frames: Vec<Vec<Vec<Value>>>,
}

fn parse_coord(value: &Value, t: usize, j: usize, name: &str) -> std::result::Result<f64, String> {
    match value.as_f64() {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(format!(
            "frames[{t}][{j}].{name}: expected a finite number, got {value}"
        )),
    }
}

fn parse_joint(raw: &[Value], t: usize, j: usize) -> std::result::Result<Joint, String> {
    if raw.len() != 2 && raw.len() != 3 {
        return Err(format!(
            "frames[{t}][{j}]: expected [x, y] or [x, y, conf], got {} values",
            raw.len()
        ));
    }
    let x = parse_coord(&raw[0], t, j, "x")?;
    let y = parse_coord(&raw[1], t, j, "y")?;
    let confidence = match raw.get(2) {
        None => 1.0,
        Some(v) => match v.as_f64() {
            Some(c) if (0.0..=1.0).contains(&c) => c,
            _ => {
                return Err(format!(
                    "frames[{t}][{j}].confidence: expected a number in [0, 1], got {v}"
                ))
            }
        },
    };
    Ok(Joint { x, y, confidence })
}

/// Parses one JSON-Lines record into a validated track.
pub fn parse_track_line(line: &str) -> std::result::Result<PersonTrack, String> {
    let raw: RawTrack = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let left_foot = raw
        .joint_map
        .left_foot
        .ok_or("joint_map is missing required role left_foot")?;
    let right_foot = raw
        .joint_map
        .right_foot
        .ok_or("joint_map is missing required role right_foot")?;
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (t, pose) in raw.frames.iter().enumerate() {
        let joints = pose
            .iter()
            .enumerate()
            .map(|(j, joint)| parse_joint(joint, t, j))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        frames.push(joints);
    }
    let track = PersonTrack {
        video_id: raw.video_id,
        person_id: raw.person_id,
        start_frame: raw.start_frame,
        frames,
        joint_map: JointMap {
            left_foot,
            right_foot,
            neck: raw.joint_map.neck,
        },
    };
    track.validate()?;
    Ok(track)
}

/// Loads every track in a JSON-Lines file, preserving file order.
///
/// Blank lines are skipped. Any malformed or invalid record fails the whole load.
pub fn load_tracks(path: impl AsRef<Path>) -> Result<Vec<PersonTrack>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut tracks = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let track = parse_track_line(&line).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        })?;
        tracks.push(track);
    }
    Ok(tracks)
}

fn coord_value(v: f64) -> Value {
    // Finite by construction; from_f64 only fails on NaN/Inf.
    Value::from(v)
}

/// Serializes a track as a single JSON line (no trailing newline).
pub fn track_to_json_line(track: &PersonTrack) -> String {
    let frames: Vec<Value> = track
        .frames
        .iter()
        .map(|pose| {
            Value::Array(
                pose.iter()
                    .map(|j| {
                        let mut v = vec![coord_value(j.x), coord_value(j.y)];
                        if j.confidence != 1.0 {
                            v.push(coord_value(j.confidence));
                        }
                        Value::Array(v)
                    })
                    .collect(),
            )
        })
        .collect();
    let mut record = serde_json::Map::new();
    record.insert("video_id".into(), Value::from(track.video_id.clone()));
    record.insert("person_id".into(), Value::from(track.person_id.clone()));
    record.insert("start_frame".into(), Value::from(track.start_frame));
    record.insert(
        "joint_map".into(),
        serde_json::to_value(track.joint_map).expect("joint map serializes"),
    );
    record.insert("frames".into(), Value::Array(frames));
    Value::Object(record).to_string()
}

pub fn save_tracks(path: impl AsRef<Path>, tracks: &[PersonTrack]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for track in tracks {
        writeln!(out, "{}", track_to_json_line(track)).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Dense per-frame ground truth for one video (0 = normal, 1 = anomalous).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoLabels {
    pub video_id: String,
    pub labels: Vec<u8>,
}

impl VideoLabels {
    pub fn new(video_id: impl Into<String>, labels: Vec<u8>) -> Result<Self> {
        let video_id = video_id.into();
        if labels.is_empty() {
            return Err(Error::Validation(format!("video {video_id} has no labels")));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Validation(format!(
                "video {video_id}: label {bad} is not 0 or 1"
            )));
        }
        Ok(VideoLabels { video_id, labels })
    }

    pub fn n_frames(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Deserialize)]
struct LabelRow {
    video_id: String,
    frame: usize,
    label: i64,
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Loads per-video frame labels from CSV or JSON Lines.
///
/// CSV rows may appear in any order but must cover every frame `0..n` of a
/// video exactly once. Videos are returned in order of first appearance.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<VideoLabels>> {
    let path = path.as_ref();
    if is_csv(path) {
        load_labels_csv(path)
    } else {
        load_labels_jsonl(path)
    }
}

fn load_labels_csv(path: &Path) -> Result<Vec<VideoLabels>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut order: Vec<String> = Vec::new();
    let mut per_video: HashMap<String, BTreeMap<usize, u8>> = HashMap::new();
    for (idx, row) in reader.deserialize::<LabelRow>().enumerate() {
        // Header is line 1.
        let line = idx + 2;
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        })?;
        if row.label != 0 && row.label != 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("label {} is not 0 or 1", row.label),
            });
        }
        let frames = per_video.entry(row.video_id.clone()).or_insert_with(|| {
            order.push(row.video_id.clone());
            BTreeMap::new()
        });
        if frames.insert(row.frame, row.label as u8).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("duplicate label for {} frame {}", row.video_id, row.frame),
            });
        }
    }
    order
        .into_iter()
        .map(|video_id| {
            let frames = &per_video[&video_id];
            for (expected, &frame) in frames.keys().enumerate() {
                if frame != expected {
                    return Err(Error::Validation(format!(
                        "{}: video {video_id} has no label for frame {expected}",
                        path.display()
                    )));
                }
            }
            VideoLabels::new(video_id.clone(), frames.values().copied().collect())
        })
        .collect()
}

#[derive(Deserialize)]
struct RawVideoLabels {
    video_id: String,
    labels: Vec<i64>,
}

fn load_labels_jsonl(path: &Path) -> Result<Vec<VideoLabels>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let raw: RawVideoLabels =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if let Some(bad) = raw.labels.iter().find(|&&l| l != 0 && l != 1) {
            return Err(parse_err(format!("label {bad} is not 0 or 1")));
        }
        let labels = raw.labels.iter().map(|&l| l as u8).collect();
        out.push(VideoLabels::new(raw.video_id, labels).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}

/// Writes labels in the CSV layout accepted by [`load_labels`].
pub fn save_labels_csv(path: impl AsRef<Path>, videos: &[VideoLabels]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer
        .write_record(["video_id", "frame", "label"])
        .map_err(csv_err)?;
    for video in videos {
        for (frame, label) in video.labels.iter().enumerate() {
            writer
                .write_record([
                    video.video_id.as_str(),
                    &frame.to_string(),
                    &label.to_string(),
                ])
                .map_err(csv_err)?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// On-disk manifest layout. Paths are resolved relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub track_files: Vec<PathBuf>,
    #[serde(default)]
    pub label_files: Vec<PathBuf>,
    pub frame_counts: BTreeMap<String, usize>,
}

impl ManifestFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A fully loaded and cross-validated dataset split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub tracks: Vec<PersonTrack>,
    /// Present for test splits; in label-file order.
    pub labels: Vec<VideoLabels>,
    pub frame_counts: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn new(
        name: impl Into<String>,
        tracks: Vec<PersonTrack>,
        labels: Vec<VideoLabels>,
        frame_counts: BTreeMap<String, usize>,
    ) -> Result<Self> {
        let dataset = DatasetManifest {
            name: name.into(),
            tracks,
            labels,
            frame_counts,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Reads a manifest and every file it references.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ManifestFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut tracks = Vec::new();
        for track_file in &file.track_files {
            tracks.extend(load_tracks(base.join(track_file))?);
        }
        let mut labels = Vec::new();
        for label_file in &file.label_files {
            labels.extend(load_labels(base.join(label_file))?);
        }
        DatasetManifest::new(file.name, tracks, labels, file.frame_counts)
    }

    fn validate(&self) -> Result<()> {
        for track in &self.tracks {
            let n = self.frame_counts.get(&track.video_id).ok_or_else(|| {
                Error::Validation(format!(
                    "track {}/{} refers to video {} missing from frame_counts",
                    track.video_id, track.person_id, track.video_id
                ))
            })?;
            if track.end_frame() > *n {
                return Err(Error::Validation(format!(
                    "track {}/{} covers frames up to {} but video has {n} frames",
                    track.video_id,
                    track.person_id,
                    track.end_frame()
                )));
            }
        }
        for video in &self.labels {
            match self.frame_counts.get(&video.video_id) {
                None => {
                    return Err(Error::Validation(format!(
                        "labels for video {} missing from frame_counts",
                        video.video_id
                    )))
                }
                Some(&n) if n != video.n_frames() => {
                    return Err(Error::Validation(format!(
                        "video {} has {} labels but frame_counts says {n}",
                        video.video_id,
                        video.n_frames()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Tracks grouped by video, in order of first appearance.
    pub fn tracks_by_video(&self) -> Vec<(&str, Vec<&PersonTrack>)> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: HashMap<&str, Vec<&PersonTrack>> = HashMap::new();
        for track in &self.tracks {
            groups
                .entry(track.video_id.as_str())
                .or_insert_with(|| {
                    order.push(track.video_id.as_str());
                    Vec::new()
                })
                .push(track);
        }
        order
            .into_iter()
            .map(|v| (v, groups.remove(v).unwrap_or_default()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(name: &str, contents: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        (dir, path)
    }

    const ONE_TRACK: &str = r#"{"video_id":"v1","person_id":"p1","start_frame":3,"joint_map":{"left_foot":0,"right_foot":1,"neck":2},"frames":[[[1,2],[3,4,0.5],[5,6]],[[1.5,2],[3,4],[5,6]]]}"#;

    #[test]
    fn loads_well_formed_record() {
        let (_d, path) = write_temp("t.jsonl", ONE_TRACK);
        let tracks = load_tracks(&path).unwrap();
        assert_eq!(tracks.len(), 1);
        let t = &tracks[0];
        assert_eq!(t.len(), 2);
        assert_eq!(t.joints_per_pose(), 3);
        assert_eq!(t.start_frame, 3);
        assert_eq!(t.frames[0][1].confidence, 0.5);
        assert_eq!(t.frames[1][0].x, 1.5);
        assert_eq!(t.joint_map.neck, Some(2));
    }

    #[test]
    fn nan_string_is_rejected_with_field_name() {
        let bad = ONE_TRACK.replace("[5,6]],[[1.5", "[5,\"NaN\"]],[[1.5");
        let (_d, path) = write_temp("t.jsonl", &format!("{ONE_TRACK}\n{bad}\n"));
        match load_tracks(&path).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("frames[0][2].y"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_no_tracks() {
        let (_d, path) = write_temp("t.jsonl", "");
        assert!(load_tracks(&path).unwrap().is_empty());
    }

    #[test]
    fn inconsistent_joint_count_is_rejected() {
        let bad = ONE_TRACK.replace(",[[1.5,2],[3,4],[5,6]]", ",[[1.5,2],[3,4]]");
        let (_d, path) = write_temp("t.jsonl", &bad);
        let err = load_tracks(&path).unwrap_err().to_string();
        assert!(err.contains("inconsistent joint count"), "{err}");
    }

    #[test]
    fn missing_foot_role_is_rejected() {
        let bad = ONE_TRACK.replace("\"left_foot\":0,", "");
        let (_d, path) = write_temp("t.jsonl", &bad);
        let err = load_tracks(&path).unwrap_err().to_string();
        assert!(err.contains("left_foot"), "{err}");
    }

    #[test]
    fn out_of_range_joint_index_is_rejected() {
        let bad = ONE_TRACK.replace("\"neck\":2", "\"neck\":7");
        let (_d, path) = write_temp("t.jsonl", &bad);
        let err = load_tracks(&path).unwrap_err().to_string();
        assert!(err.contains("joint_map.neck"), "{err}");
    }

    #[test]
    fn save_then_load_is_identical() {
        let (dir, path) = write_temp("t.jsonl", ONE_TRACK);
        let tracks = load_tracks(&path).unwrap();
        let out = dir.path().join("out.jsonl");
        save_tracks(&out, &tracks).unwrap();
        assert_eq!(load_tracks(&out).unwrap(), tracks);
    }

    #[test]
    fn csv_labels_dense() {
        let (_d, path) = write_temp(
            "l.csv",
            "video_id,frame,label\nv1,0,0\nv1,2,1\nv1,1,0\n",
        );
        let labels = load_labels(&path).unwrap();
        assert_eq!(labels, vec![VideoLabels::new("v1", vec![0, 0, 1]).unwrap()]);
    }

    #[test]
    fn csv_labels_gap_is_error() {
        let (_d, path) = write_temp("l.csv", "video_id,frame,label\nv1,0,0\nv1,2,1\n");
        let err = load_labels(&path).unwrap_err().to_string();
        assert!(err.contains("frame 1"), "{err}");
    }

    #[test]
    fn csv_label_out_of_set_is_error() {
        let (_d, path) = write_temp("l.csv", "video_id,frame,label\nv1,0,2\n");
        let err = load_labels(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn jsonl_labels() {
        let (_d, path) = write_temp(
            "l.jsonl",
            "{\"video_id\":\"a\",\"labels\":[0,1]}\n{\"video_id\":\"b\",\"labels\":[1]}\n",
        );
        let labels = load_labels(&path).unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(labels[0].labels, vec![0, 1]);
        assert_eq!(labels[1].video_id, "b");
    }

    #[test]
    fn manifest_rejects_track_past_video_end() {
        let (_d, path) = write_temp("t.jsonl", ONE_TRACK);
        let tracks = load_tracks(&path).unwrap();
        let mut counts = BTreeMap::new();
        counts.insert("v1".to_string(), 4);
        let err = DatasetManifest::new("x", tracks.clone(), vec![], counts.clone()).unwrap_err();
        assert!(err.to_string().contains("covers frames up to 5"), "{err}");
        counts.insert("v1".to_string(), 5);
        assert!(DatasetManifest::new("x", tracks, vec![], counts).is_ok());
    }

    #[test]
    fn manifest_rejects_unknown_video() {
        let (_d, path) = write_temp("t.jsonl", ONE_TRACK);
        let tracks = load_tracks(&path).unwrap();
        let err = DatasetManifest::new("x", tracks, vec![], BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("missing from frame_counts"));
    }
}
