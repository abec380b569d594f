//! Minimal SVG plot of a video's frame scores with anomalous frames shaded.

use std::fmt::Write;

use crate::scoring::ScoredVideo;
use crate::skeleton::VideoLabels;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 240.0;
const MARGIN: f64 = 30.0;

pub fn render_scores(video: &ScoredVideo, labels: Option<&VideoLabels>) -> String {
    let n = video.n_frames().max(1);
    let (lo, hi) = video
        .scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (0.0, 1.0)
    };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x_of = |t: usize| MARGIN + plot_w * t as f64 / (n.saturating_sub(1).max(1)) as f64;
    let y_of = |s: f64| MARGIN + plot_h * (hi - s) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(labels) = labels {
        let step = plot_w / n as f64;
        let mut t = 0;
        while t < labels.labels.len() {
            if labels.labels[t] == 1 {
                let start = t;
                while t < labels.labels.len() && labels.labels[t] == 1 {
                    t += 1;
                }
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.2}" y="{MARGIN}" width="{:.2}" height="{plot_h}" fill="#f4b6b6"/>"##,
                    MARGIN + step * start as f64,
                    step * (t - start) as f64
                );
            } else {
                t += 1;
            }
        }
    }
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#888"/>"##
    );
    let points: Vec<String> = video
        .scores
        .iter()
        .enumerate()
        .map(|(t, &s)| format!("{:.2},{:.2}", x_of(t), y_of(s)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.0}" font-family="sans-serif" font-size="12">{} (normality {lo:.1} .. {hi:.1})</text>"#,
        MARGIN - 10.0,
        escape(&video.video_id)
    );
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polyline_and_shading() {
        let video = ScoredVideo {
            video_id: "a<b".into(),
            scores: vec![-1.0, -2.0, -8.0, -1.5],
            covered: vec![true; 4],
        };
        let labels = VideoLabels::new("a<b", vec![0, 0, 1, 0]).unwrap();
        let svg = render_scores(&video, Some(&labels));
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("#f4b6b6").count(), 1);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn constant_and_empty_scores() {
        let video = ScoredVideo {
            video_id: "v".into(),
            scores: vec![3.0; 3],
            covered: vec![true; 3],
        };
        assert!(!render_scores(&video, None).contains("NaN"));
        let empty = ScoredVideo {
            video_id: "v".into(),
            scores: vec![],
            covered: vec![],
        };
        assert!(render_scores(&empty, None).ends_with("</svg>\n"));
    }
}
