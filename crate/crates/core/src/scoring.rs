//! Per-frame normality scores: each frame takes the lowest log-density of any
//! window (from any person) that covers it.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::FlowModel;
use crate::preprocess::Segment;
use crate::skeleton::PersonTrack;

/// Value assigned to frames no window covers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Fill {
    /// The highest covered-frame score in the same video (0 if nothing is covered).
    #[default]
    VideoMax,
    Constant(f64),
}

impl Serialize for Fill {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Fill::VideoMax => s.serialize_str("max"),
            Fill::Constant(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Fill {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Value(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Value(v) => Ok(Fill::Constant(v)),
            Repr::Name(n) => n.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for Fill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(Fill::VideoMax);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Fill::Constant(v)),
            _ => Err(Error::Config(format!(
                "score.fill must be \"max\" or a finite number, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Fill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fill::VideoMax => f.write_str("max"),
            Fill::Constant(v) => write!(f, "{v}"),
        }
    }
}

/// A window's provenance and its log-density under the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegment {
    pub video_id: String,
    pub person_id: String,
    pub start_frame: usize,
    pub length: usize,
    pub log_prob: f64,
}

impl ScoredSegment {
    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start_frame..self.start_frame + self.length
    }
}

/// Scores raw segments, applying the model's stored standardizer.
pub fn score_segments(model: &FlowModel, segments: &[Segment]) -> Result<Vec<ScoredSegment>> {
    segments
        .iter()
        .map(|seg| {
            let log_prob = model.log_prob_segment(seg).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!(
                    "segment {}/{} at frame {}: {msg}",
                    seg.video_id, seg.person_id, seg.start_frame
                )),
                other => other,
            })?;
            Ok(ScoredSegment {
                video_id: seg.video_id.clone(),
                person_id: seg.person_id.clone(),
                start_frame: seg.start_frame,
                length: seg.length,
                log_prob,
            })
        })
        .collect()
}

/// Frame-level normality scores for one video (higher = more normal).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredVideo {
    pub video_id: String,
    pub scores: Vec<f64>,
    pub covered: Vec<bool>,
}

impl ScoredVideo {
    pub fn n_frames(&self) -> usize {
        self.scores.len()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "frame,score,covered")?;
        for (t, (s, c)) in self.scores.iter().zip(&self.covered).enumerate() {
            writeln!(out, "{t},{s},{}", u8::from(*c))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Reads a `frame,score,covered` file written by [`ScoredVideo::save_csv`].
    pub fn load_csv(video_id: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut scores = Vec::new();
        let mut covered = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: msg.to_string(),
            };
            let mut cells = line.split(',');
            let frame: usize = cells
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| err("bad frame index"))?;
            if frame != scores.len() {
                return Err(err("frames must be listed densely from 0"));
            }
            let score: f64 = cells
                .next()
                .and_then(|c| c.trim().parse().ok())
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| err("bad score"))?;
            let cov = match cells.next().map(str::trim) {
                Some("1") | Some("true") => true,
                Some("0") | Some("false") => false,
                _ => return Err(err("bad covered flag")),
            };
            scores.push(score);
            covered.push(cov);
        }
        Ok(ScoredVideo {
            video_id: video_id.into(),
            scores,
            covered,
        })
    }
}

/// Min-over-covering-windows frame scores; uncovered frames get `fill`.
pub fn frame_scores(
    video_id: &str,
    segments: &[ScoredSegment],
    n_frames: usize,
    fill: Fill,
) -> Result<ScoredVideo> {
    let mut scores = vec![f64::INFINITY; n_frames];
    let mut covered = vec![false; n_frames];
    for seg in segments {
        if seg.frames().end > n_frames {
            return Err(Error::Validation(format!(
                "segment {}/{} covers frames {}..{} but video {video_id} has {n_frames} frames",
                seg.video_id,
                seg.person_id,
                seg.start_frame,
                seg.frames().end
            )));
        }
        if !seg.log_prob.is_finite() {
            return Err(Error::Numeric(format!(
                "segment {}/{} at frame {} has a non-finite score",
                seg.video_id, seg.person_id, seg.start_frame
            )));
        }
        for t in seg.frames() {
            scores[t] = scores[t].min(seg.log_prob);
            covered[t] = true;
        }
    }
    let fill_value = match fill {
        Fill::Constant(v) => v,
        Fill::VideoMax => scores
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| c)
            .map(|(&s, _)| s)
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
            .unwrap_or(0.0),
    };
    for (s, &c) in scores.iter_mut().zip(&covered) {
        if !c {
            *s = fill_value;
        }
    }
    Ok(ScoredVideo {
        video_id: video_id.to_string(),
        scores,
        covered,
    })
}

/// Scores every track of one video and reduces to frame scores.
pub fn score_video(
    model: &FlowModel,
    video_id: &str,
    tracks: &[&PersonTrack],
    n_frames: usize,
    fill: Fill,
) -> Result<ScoredVideo> {
    let mut scored = Vec::new();
    for track in tracks {
        let segments = model.segments(track)?;
        scored.extend(score_segments(model, &segments)?);
    }
    frame_scores(video_id, &scored, n_frames, fill)
}
