use super::*;
use crate::network::{ClassifiedSection, RoadClass, SectionId, SegmentId};
use crate::raster::{BandSemantics, GeoTransform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(pts: &[(f64, f64)]) -> Polyline {
    Polyline::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
}

fn network(sections: &[(&[(f64, f64)], u8)]) -> ClassifiedNetwork {
    let mut n = ClassifiedNetwork::new();
    for (i, (pts, class)) in sections.iter().enumerate() {
        n.insert(
            SectionId { parent: SegmentId(i as u32), index: 0 },
            ClassifiedSection { line: line(pts), class: RoadClass::new(*class).unwrap(), mean_probabilities: None },
        );
    }
    n
}

/// Matched length of class `k` by sampling every 0.01 m.
fn sampled_matched(a: &ClassifiedNetwork, b: &ClassifiedNetwork, k: usize, buffer: f64) -> f64 {
    let step = 0.01;
    let mut total = 0.0;
    for s in a.sections().values().filter(|s| s.class.index() == k) {
        let len = s.line.length();
        let n = (len / step).ceil() as usize;
        for i in 0..n {
            let ds = len / n as f64;
            let p = s.line.point_at((i as f64 + 0.5) * ds);
            let near = b.sections().values().filter(|o| o.class.index() == k).any(|o| o.line.distance_to(p) <= buffer);
            if near {
                total += ds;
            }
        }
    }
    total
}

#[test]
fn identical_networks_score_one() {
    let n = network(&[(&[(0.0, 0.0), (100.0, 0.0)], 2), (&[(0.0, 50.0), (80.0, 90.0), (120.0, 60.0)], 5)]);
    let r = line_metrics(&n, &n, DEFAULT_BUFFER).unwrap();
    for k in [1, 4] {
        assert!((r.classes[k].completeness.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.classes[k].correctness.unwrap() - 1.0).abs() < 1e-12);
    }
    assert_eq!(r.classes[0].completeness, None);
    assert_eq!(r.classes[0].correctness, None);
    assert!((r.weighted_completeness.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn distant_parallel_lines_score_zero() {
    let gt = network(&[(&[(0.0, 0.0), (100.0, 0.0)], 3)]);
    let pred = network(&[(&[(0.0, 10.0), (100.0, 10.0)], 3)]);
    let r = line_metrics(&gt, &pred, DEFAULT_BUFFER).unwrap();
    assert_eq!((r.classes[2].completeness, r.classes[2].correctness), (Some(0.0), Some(0.0)));
}

#[test]
fn partially_misclassified_road_matches_sampling() {
    let gt = network(&[(&[(0.0, 0.0), (200.0, 0.0)], 2)]);
    let pred = network(&[(&[(0.0, 0.0), (150.0, 0.0)], 2), (&[(150.0, 0.0), (200.0, 0.0)], 3)]);
    let r = line_metrics(&gt, &pred, DEFAULT_BUFFER).unwrap();
    // the round buffer end reaches 5 m past the class-2 prediction
    let want = sampled_matched(&gt, &pred, 1, DEFAULT_BUFFER) / 200.0;
    assert!((r.classes[1].completeness.unwrap() - want).abs() < 1e-3);
    assert!((r.classes[1].completeness.unwrap() - 0.775).abs() < 1e-12);
    assert_eq!(r.classes[1].correctness, Some(1.0));
    assert_eq!(r.classes[2].correctness, Some(0.0));
    assert_eq!(r.classes[2].completeness, None);
}

fn random_network(rng: &mut ChaCha8Rng, count: usize) -> ClassifiedNetwork {
    let mut n = ClassifiedNetwork::new();
    for i in 0..count {
        let mut pts = vec![Point::new(rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0))];
        for _ in 0..rng.gen_range(1..4) {
            let p = *pts.last().unwrap();
            pts.push(Point::new(p.x + rng.gen_range(-60.0..60.0), p.y + rng.gen_range(-60.0..60.0)));
        }
        let l = Polyline::from_points_dedup(pts).unwrap();
        let class = RoadClass::new(rng.gen_range(1..=3)).unwrap();
        n.insert(SectionId { parent: SegmentId(i as u32), index: 0 }, ClassifiedSection { line: l, class, mean_probabilities: None });
    }
    n
}

#[test]
fn line_metrics_match_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let gt = random_network(&mut rng, 6);
        let pred = random_network(&mut rng, 6);
        let r = line_metrics(&gt, &pred, DEFAULT_BUFFER).unwrap();
        for k in 0..3 {
            let c = &r.classes[k];
            if let Some(v) = c.completeness {
                assert!((v - sampled_matched(&gt, &pred, k, DEFAULT_BUFFER) / c.gt_length).abs() < 0.005);
            }
            if let Some(v) = c.correctness {
                assert!((v - sampled_matched(&pred, &gt, k, DEFAULT_BUFFER) / c.pred_length).abs() < 0.005);
            }
        }
    }
}

#[test]
fn swapping_networks_swaps_completeness_and_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gt = random_network(&mut rng, 8);
    let pred = random_network(&mut rng, 8);
    let a = line_metrics(&gt, &pred, DEFAULT_BUFFER).unwrap();
    let b = line_metrics(&pred, &gt, DEFAULT_BUFFER).unwrap();
    for k in 0..NUM_CLASSES {
        assert_eq!(a.classes[k].completeness, b.classes[k].correctness);
        assert_eq!(a.classes[k].correctness, b.classes[k].completeness);
    }
}

#[test]
fn metrics_grow_with_the_buffer() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gt = random_network(&mut rng, 8);
    let pred = random_network(&mut rng, 8);
    let mut last = line_metrics(&gt, &pred, 0.5).unwrap();
    for buffer in [1.0, 2.0, 5.0, 10.0, 30.0] {
        let r = line_metrics(&gt, &pred, buffer).unwrap();
        for k in 0..NUM_CLASSES {
            assert!(r.classes[k].completeness.unwrap_or(0.0) >= last.classes[k].completeness.unwrap_or(0.0) - 1e-12);
            assert!(r.classes[k].correctness.unwrap_or(0.0) >= last.classes[k].correctness.unwrap_or(0.0) - 1e-12);
        }
        last = r;
    }
}

#[test]
fn empty_ground_truth_leaves_completeness_undefined() {
    let pred = network(&[(&[(0.0, 0.0), (100.0, 0.0)], 2)]);
    let r = line_metrics(&ClassifiedNetwork::new(), &pred, DEFAULT_BUFFER).unwrap();
    assert!(r.classes.iter().all(|c| c.completeness.is_none()));
    assert_eq!(r.weighted_completeness, None);
    assert_eq!(r.weighted_correctness, Some(0.0));
    assert!(r.to_table().contains("n/a"));
    assert!(matches!(line_metrics(&pred, &pred, 0.0), Err(EvaluationError::Buffer(_))));
}

fn t() -> GeoTransform {
    GeoTransform::new(0.0, 100.0, 1.0).unwrap()
}

fn labels(w: usize, h: usize, v: Vec<u8>) -> GeoRaster<u8> {
    GeoRaster::new(w, h, t(), BandSemantics::ClassLabel, vec![v]).unwrap()
}

fn field(w: usize, h: usize, pixels: &[[f32; 6]]) -> ProbabilityField {
    ProbabilityField::new(w, h, t(), (0..6).map(|k| pixels.iter().map(|p| p[k]).collect()).collect()).unwrap()
}

#[test]
fn perfect_prediction_scores_perfectly() {
    let l = labels(3, 2, vec![0, 1, 2, 3, 4, 5]);
    let f = ProbabilityField::one_hot(&l).unwrap();
    let m = pixel_metrics(&f, &l, None, PixelMetricOptions::default()).unwrap();
    assert_eq!((m.accuracy, m.macro_f1, m.iou, m.brier), (1.0, 1.0, 1.0, 0.0));
}

#[test]
fn uniform_field_brier_is_five_sixths() {
    let l = labels(4, 1, vec![0, 1, 3, 5]);
    let f = ProbabilityField::constant(4, 1, t(), [1.0 / 6.0; 6]).unwrap();
    let m = pixel_metrics(&f, &l, None, PixelMetricOptions::default()).unwrap();
    assert!((m.brier - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn two_by_two_matches_hand_confusion_matrix() {
    // labels 2, 2, 3, 0; predictions 2, 3, 3, 2
    let l = labels(2, 2, vec![2, 2, 3, 0]);
    let f = field(
        2,
        2,
        &[
            [0.1, 0.7, 0.2, 0.0, 0.0, 0.0],
            [0.0, 0.4, 0.6, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.0, 0.0, 0.0, 0.5],
        ],
    );
    let m = pixel_metrics(&f, &l, None, PixelMetricOptions::default()).unwrap();
    assert_eq!(m.accuracy, 0.5);
    // class 2: p 1/2, r 1/2; class 3: p 1/2, r 1; no-road: p 0, r 0
    assert!((m.macro_precision - (0.5 + 0.5 + 0.0) / 3.0).abs() < 1e-12);
    assert!((m.macro_recall - (0.5 + 1.0 + 0.0) / 3.0).abs() < 1e-12);
    assert!((m.macro_f1 - (0.5 + 2.0 / 3.0 + 0.0) / 3.0).abs() < 1e-12);
    // road in truth: pixels 0..3, road predicted: all four
    assert_eq!(m.iou, 0.75);
    let brier = ((0.01 + 0.09 + 0.04) + (0.36 + 0.36) + 0.0 + (0.25 + 0.25)) / 4.0;
    assert!((m.brier - brier).abs() < 1e-6);
    let no_road = pixel_metrics(&f, &l, None, PixelMetricOptions { exclude_no_road: true, macro_iou: false }).unwrap();
    assert!((no_road.macro_recall - 0.75).abs() < 1e-12);
}

fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ProbabilityField {
    let mut bands = vec![vec![0f32; w * h]; 6];
    for i in 0..w * h {
        let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
        let s: f64 = raw.iter().sum();
        for k in 0..6 {
            bands[k][i] = (raw[k] / s) as f32;
        }
    }
    ProbabilityField::new(w, h, t(), bands).unwrap()
}

#[test]
fn pixel_metrics_match_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let f = random_field(&mut rng, 32, 32);
        let l = labels(32, 32, (0..1024).map(|_| rng.gen_range(0..=5)).collect());
        let m = pixel_metrics(&f, &l, None, PixelMetricOptions::default()).unwrap();
        let mut cm = vec![vec![0f64; 6]; 6];
        let mut brier = 0.0;
        for i in 0..1024 {
            let truth = if l.band(0)[i] == 0 { 5 } else { l.band(0)[i] as usize - 1 };
            let p: Vec<f64> = (0..6).map(|k| f.band(k)[i] as f64).collect();
            let mut pred = 0;
            for k in 1..6 {
                if p[k] > p[pred] {
                    pred = k;
                }
            }
            cm[truth][pred] += 1.0;
            brier += (0..6).map(|k| (p[k] - if k == truth { 1.0 } else { 0.0 }).powi(2)).sum::<f64>();
        }
        let present: Vec<usize> = (0..6).filter(|&k| cm[k].iter().sum::<f64>() > 0.0).collect();
        let prec = |k: usize| {
            let col: f64 = (0..6).map(|t| cm[t][k]).sum();
            if col == 0.0 { 0.0 } else { cm[k][k] / col }
        };
        let rec = |k: usize| cm[k][k] / cm[k].iter().sum::<f64>();
        let f1 = |k: usize| if prec(k) + rec(k) == 0.0 { 0.0 } else { 2.0 * prec(k) * rec(k) / (prec(k) + rec(k)) };
        let mean = |g: &dyn Fn(usize) -> f64| present.iter().map(|&k| g(k)).sum::<f64>() / present.len() as f64;
        let acc = (0..6).map(|k| cm[k][k]).sum::<f64>() / 1024.0;
        assert!((m.accuracy - acc).abs() < 1e-12);
        assert!((m.macro_precision - mean(&prec)).abs() < 1e-12);
        assert!((m.macro_recall - mean(&rec)).abs() < 1e-12);
        assert!((m.macro_f1 - mean(&f1)).abs() < 1e-12);
        assert!((m.brier - brier / 1024.0).abs() < 1e-12);
    }
}

#[test]
fn brier_decomposes_over_a_pixel_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_field(&mut rng, 16, 16);
    let l = labels(16, 16, (0..256).map(|_| rng.gen_range(0..=5)).collect());
    let part: Vec<u8> = (0..256).map(|_| rng.gen_range(0..=1)).collect();
    let a = GeoRaster::new(16, 16, t(), BandSemantics::BinaryMask, vec![part.clone()]).unwrap();
    let b = GeoRaster::new(16, 16, t(), BandSemantics::BinaryMask, vec![part.iter().map(|v| 1 - v).collect()]).unwrap();
    let o = PixelMetricOptions::default();
    let all = pixel_metrics(&f, &l, None, o).unwrap();
    let ma = pixel_metrics(&f, &l, Some(&a), o).unwrap();
    let mb = pixel_metrics(&f, &l, Some(&b), o).unwrap();
    let combined = (ma.brier * ma.n as f64 + mb.brier * mb.n as f64) / (ma.n + mb.n) as f64;
    assert!((all.brier - combined).abs() < 1e-12);
}

#[test]
fn pixel_metrics_reject_bad_inputs() {
    let f = ProbabilityField::constant(2, 1, t(), [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let bad = GeoRaster::new(2, 1, t(), BandSemantics::Gray, vec![vec![0u8, 9]]).unwrap();
    assert!(matches!(pixel_metrics(&f, &bad, None, Default::default()), Err(EvaluationError::Label { value: 9, index: 1 })));
    let empty = GeoRaster::filled(2, 1, t(), BandSemantics::BinaryMask, 0).unwrap();
    let l = labels(2, 1, vec![0, 0]);
    assert!(matches!(pixel_metrics(&f, &l, Some(&empty), Default::default()), Err(EvaluationError::Empty)));
    let other = labels(1, 1, vec![0]);
    assert!(matches!(pixel_metrics(&f, &other, None, Default::default()), Err(EvaluationError::Grid)));
}
