use kinflow::kinematics::{self, FeatureKind, Variant};
use kinflow::preprocess::{self, PreprocessConfig, Provenance};
use kinflow::skeleton::{Joint, JointMap, PersonTrack};
use kinflow::FeatureMatrix;
use proptest::prelude::*;

fn track_of(poses: &[[(f64, f64); 3]]) -> PersonTrack {
    let frames = poses
        .iter()
        .map(|p| p.iter().map(|&(x, y)| Joint::new(x, y)).collect())
        .collect();
    PersonTrack::new(
        "v",
        "p",
        0,
        frames,
        JointMap {
            left_foot: 0,
            right_foot: 1,
            neck: Some(2),
        },
    )
    .unwrap()
}

fn poses() -> impl Strategy<Value = Vec<[(f64, f64); 3]>> {
    let pt = (-1000.0f64..1000.0, -1000.0f64..1000.0);
    prop::collection::vec([pt.clone(), pt.clone(), pt], 1..40)
}

fn all_series(t: &PersonTrack) -> Vec<Vec<f64>> {
    vec![
        kinematics::stride_series(t).values,
        kinematics::displacement_series(t).values,
        kinematics::neck_displacement_series(t).unwrap().values,
    ]
}

fn close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= tol))
}

fn src() -> Provenance<'static> {
    Provenance {
        video_id: "v",
        person_id: "p",
        start_frame: 0,
    }
}

proptest! {
    #[test]
    fn series_are_translation_invariant(p in poses(), dx in -500.0f64..500.0, dy in -500.0f64..500.0) {
        let moved: Vec<_> = p.iter().map(|q| q.map(|(x, y)| (x + dx, y + dy))).collect();
        prop_assert!(close(&all_series(&track_of(&p)), &all_series(&track_of(&moved)), 1e-9));
    }

    #[test]
    fn series_are_rotation_invariant(p in poses(), theta in 0.0f64..std::f64::consts::TAU) {
        let (s, c) = theta.sin_cos();
        let rotated: Vec<_> = p.iter().map(|q| q.map(|(x, y)| (c * x - s * y, s * x + c * y))).collect();
        prop_assert!(close(&all_series(&track_of(&p)), &all_series(&track_of(&rotated)), 1e-9));
    }

    #[test]
    fn series_are_non_negative_and_full_length(p in poses()) {
        let t = track_of(&p);
        for s in all_series(&t) {
            prop_assert_eq!(s.len(), p.len());
            prop_assert!(s.iter().all(|&v| v >= 0.0));
        }
        let m = kinematics::assemble_features(&t, Variant::Hkvad3).unwrap();
        prop_assert_eq!(m.rows, p.len());
        prop_assert_eq!(&m.kinds, &vec![FeatureKind::Stride, FeatureKind::Displacement, FeatureKind::NeckDisplacement]);
    }

    #[test]
    fn smoothing_preserves_mean_of_periodic_input(
        period in prop::collection::vec(-50.0f64..50.0, 1..8),
        reps in 3usize..10,
        w in 0usize..4,
    ) {
        // Pad with a full period on each side so no truncated window touches the middle.
        let p = period.len();
        prop_assume!(w <= p);
        let series: Vec<f64> = (0..p * (reps + 2)).map(|i| period[i % p]).collect();
        let smoothed = preprocess::smooth(&series, w);
        let middle = p..p * (reps + 1);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&smoothed[middle.clone()]) - mean(&series[middle])).abs() <= 1e-12);
    }

    #[test]
    fn smoothing_matches_direct_truncated_average(
        series in prop::collection::vec(-100.0f64..100.0, 0..30),
        w in 0usize..5,
    ) {
        let got = preprocess::smooth(&series, w);
        prop_assert_eq!(got.len(), series.len());
        for (t, g) in got.iter().enumerate() {
            let lo = t.saturating_sub(w);
            let hi = (t + w).min(series.len() - 1);
            let want = series[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            prop_assert!((g - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn outlier_removal_zeroes_exactly_the_far_points(
        series in prop::collection::vec(-100.0f64..100.0, 1..40),
        k in 0.5f64..4.0,
    ) {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let sd = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let got = preprocess::remove_outliers(&series, k);
        for (g, v) in got.iter().zip(&series) {
            if (v - mean).abs() > k * sd {
                prop_assert_eq!(*g, 0.0);
            } else {
                prop_assert_eq!(g, v);
            }
        }
    }

    #[test]
    fn pipeline_without_smoothing_or_outliers_is_idempotent(
        rows in prop::collection::vec([0.0f64..5.0, 0.0f64..5.0], 24..60),
    ) {
        let cfg = PreprocessConfig { w: 0, sigma_k: 1e6, ..Default::default() };
        let col = |f: usize| rows.iter().map(|r| r[f]).collect::<Vec<_>>();
        let once: Vec<Vec<f64>> = (0..2).map(|f| preprocess::clean_series(&col(f), &cfg)).collect();
        let twice: Vec<Vec<f64>> = once.iter().map(|c| preprocess::clean_series(c, &cfg)).collect();
        prop_assert_eq!(&once, &twice);
        let kinds = vec![FeatureKind::Stride, FeatureKind::Displacement];
        let a = FeatureMatrix::from_columns(kinds.clone(), &once).unwrap();
        let b = FeatureMatrix::from_columns(kinds, &twice).unwrap();
        prop_assert_eq!(preprocess::segment(&a, &cfg, src()), preprocess::segment(&b, &cfg, src()));
    }

    #[test]
    fn segment_count_formula(t_len in 0usize..80, len in 1usize..30, stride in 1usize..8) {
        let cfg = PreprocessConfig { segment_length: len, stride, ..Default::default() };
        let m = FeatureMatrix { kinds: vec![FeatureKind::Stride], rows: t_len, data: vec![1.0; t_len] };
        let want = if t_len >= len { (t_len - len) / stride + 1 } else { 0 };
        let segs = preprocess::segment(&m, &cfg, src());
        prop_assert_eq!(segs.len(), want);
        for (i, s) in segs.iter().enumerate() {
            prop_assert_eq!(s.start_frame, i * stride);
        }
    }
}

#[test]
fn sentinel_matrix_flattens_time_major() {
    let (rows, f) = (30, 3);
    let columns: Vec<Vec<f64>> = (0..f)
        .map(|c| (0..rows).map(|t| (1000 * t + c) as f64).collect())
        .collect();
    let m = FeatureMatrix::from_columns(
        vec![FeatureKind::Stride, FeatureKind::Displacement, FeatureKind::NeckDisplacement],
        &columns,
    )
    .unwrap();
    let cfg = PreprocessConfig {
        segment_length: 24,
        stride: 3,
        ..Default::default()
    };
    for s in preprocess::segment(&m, &cfg, src()) {
        for t in 0..24 {
            for c in 0..f {
                assert_eq!(s.data[t * f + c], (1000 * (s.start_frame + t) + c) as f64);
            }
        }
    }
}

#[test]
fn hand_computed_outlier_thresholds() {
    // mean 2, population std 4: the 10 sits 2 std out.
    let s = [0.0, 0.0, 0.0, 0.0, 10.0];
    assert_eq!(preprocess::remove_outliers(&s, 1.99), vec![0.0; 5]);
    assert_eq!(preprocess::remove_outliers(&s, 2.0), s.to_vec());
    // 99 ones and a 200: the spike is sqrt(99) std out.
    let mut spike = vec![1.0; 99];
    spike.push(200.0);
    let cleaned = preprocess::remove_outliers(&spike, 3.0);
    assert_eq!(cleaned[99], 0.0);
    assert!(cleaned[..99].iter().all(|&v| v == 1.0));
    assert_eq!(preprocess::remove_outliers(&spike, 9.9)[99], 0.0);
    assert_eq!(preprocess::remove_outliers(&spike, 9.95)[99], 200.0);
}
