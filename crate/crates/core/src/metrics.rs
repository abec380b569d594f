//! Frame-level ROC AUC over all test videos concatenated ("micro" AUC).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoredVideo;
use crate::skeleton::VideoLabels;

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("scores contain NaN".into()));
    }
    let mut pos = 0;
    for &l in labels {
        match l {
            0 => {}
            1 => pos += 1,
            other => {
                return Err(Error::Validation(format!("label {other} is not 0 or 1")))
            }
        }
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc(format!(
            "need both classes, got {pos} positive and {neg} negative frames"
        )));
    }
    Ok((pos, neg))
}

/// Rank-statistic AUC: `(R_pos - P(P+1)/2) / (P N)` with average ranks for ties.
///
/// Scores are anomaly scores (higher = more anomalous). Labels are 0/1.
pub fn micro_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share their average.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_run = idx[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += avg_rank * pos_in_run as f64;
        i = j;
    }
    let p = pos as f64;
    let n = neg as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Frames with anomaly score >= threshold are flagged.
    pub threshold: f64,
}

/// ROC curve from the strictest threshold (+inf) down to the loosest score.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let thr = scores[idx[i]];
        while i < idx.len() && scores[idx[i]].total_cmp(&thr) == Ordering::Equal {
            if labels[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: thr,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAuc {
    pub video_id: String,
    pub n_frames: usize,
    /// `None` when the video holds only one class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_auc: f64,
    pub n_frames: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub per_video: Vec<VideoAuc>,
}

/// Concatenated anomaly scores (negated normality) and labels, in label order.
pub fn concatenate(scored: &[ScoredVideo], labels: &[VideoLabels]) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut all_scores = Vec::new();
    let mut all_labels = Vec::new();
    for video in labels {
        let sv = scored
            .iter()
            .find(|s| s.video_id == video.video_id)
            .ok_or_else(|| Error::Validation(format!("no scores for video {}", video.video_id)))?;
        if sv.n_frames() != video.n_frames() {
            return Err(Error::Validation(format!(
                "video {}: {} scored frames but {} labels",
                video.video_id,
                sv.n_frames(),
                video.n_frames()
            )));
        }
        all_scores.extend(sv.scores.iter().map(|s| -s));
        all_labels.extend_from_slice(&video.labels);
    }
    Ok((all_scores, all_labels))
}

/// Micro-AUC over every labelled video plus per-video diagnostics.
pub fn evaluate(scored: &[ScoredVideo], labels: &[VideoLabels]) -> Result<EvalReport> {
    let (scores, flat_labels) = concatenate(scored, labels)?;
    let auc = micro_auc(&scores, &flat_labels)?;
    let n_positive = flat_labels.iter().filter(|&&l| l == 1).count();
    let mut per_video = Vec::with_capacity(labels.len());
    let mut off = 0;
    for video in labels {
        let n = video.n_frames();
        let auc = micro_auc(&scores[off..off + n], &video.labels).ok();
        per_video.push(VideoAuc {
            video_id: video.video_id.clone(),
            n_frames: n,
            auc,
        });
        off += n;
    }
    Ok(EvalReport {
        micro_auc: auc,
        n_frames: flat_labels.len(),
        n_positive,
        n_negative: flat_labels.len() - n_positive,
        per_video,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let auc = micro_auc(&[0.1, 0.2, 0.9, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_eq!(auc, 1.0);
        let auc = micro_auc(&[0.1, 0.2, 0.9, 0.8], &[1, 1, 0, 0]).unwrap();
        assert_eq!(auc, 0.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(micro_auc(&[3.0; 7], &[0, 1, 0, 1, 1, 0, 0]).unwrap(), 0.5);
    }

    #[test]
    fn hand_computed_with_ties() {
        // Pairs (pos, neg): (0.5 vs 0.5) tie, (0.5 vs 0.1) win, (0.9 vs both) wins -> 3.5/4.
        let auc = micro_auc(&[0.5, 0.9, 0.5, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(auc, 0.875);
    }

    #[test]
    fn one_class_is_undefined() {
        assert!(matches!(
            micro_auc(&[1.0, 2.0], &[0, 0]),
            Err(Error::UndefinedAuc(_))
        ));
    }

    #[test]
    fn roc_endpoints() {
        let roc = roc_curve(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_eq!(roc.first().unwrap().fpr, 0.0);
        let last = roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        // Trapezoid area matches the rank statistic.
        let area: f64 = roc
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum();
        let auc = micro_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert!((area - auc).abs() < 1e-12);
    }

    fn video(id: &str, scores: Vec<f64>) -> ScoredVideo {
        let n = scores.len();
        ScoredVideo {
            video_id: id.into(),
            scores,
            covered: vec![true; n],
        }
    }

    #[test]
    fn evaluate_negates_normality() {
        let scored = [video("a", vec![-1.0, -9.0, -2.0])];
        let labels = [VideoLabels::new("a", vec![0, 1, 0]).unwrap()];
        let report = evaluate(&scored, &labels).unwrap();
        assert_eq!(report.micro_auc, 1.0);
        assert_eq!(report.per_video[0].auc, Some(1.0));
        assert_eq!((report.n_positive, report.n_negative), (1, 2));
    }

    #[test]
    fn evaluate_missing_or_mismatched_video() {
        let labels = [VideoLabels::new("a", vec![0, 1]).unwrap()];
        let err = evaluate(&[video("b", vec![0.0, 1.0])], &labels).unwrap_err();
        assert!(err.to_string().contains("video a"));
        let err = evaluate(&[video("a", vec![0.0])], &labels).unwrap_err();
        assert!(err.to_string().contains("video a"));
    }

    #[test]
    fn all_normal_test_set_is_undefined() {
        let labels = [VideoLabels::new("a", vec![0, 0]).unwrap()];
        assert!(matches!(
            evaluate(&[video("a", vec![0.0, 1.0])], &labels),
            Err(Error::UndefinedAuc(_))
        ));
    }
}
