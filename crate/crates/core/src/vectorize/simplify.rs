use rayon::prelude::*;

use crate::geom::{point_segment_distance, Point, Polyline};
use crate::network::{RoadNetwork, Segment};

/// Douglas-Peucker tolerance in meters, just above the diagonal pixel pitch.
pub const DEFAULT_EPSILON: f64 = 1.9;

/// Douglas-Peucker simplification.
///
/// Endpoints are kept exactly and the output is a subsequence of the input.
/// For a closed line the base is a single point, so the first split falls on
/// the vertex farthest from the start.
pub fn simplify_polyline(line: &Polyline, epsilon: f64) -> Polyline {
    let v = line.vertices();
    let mut keep = vec![false; v.len()];
    keep[0] = true;
    keep[v.len() - 1] = true;
    let mut stack = vec![(0, v.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (idx, dist) = farthest(v, a, b);
        if dist > epsilon || (line.is_closed() && a == 0 && b == v.len() - 1) {
            keep[idx] = true;
            stack.push((a, idx));
            stack.push((idx, b));
        }
    }
    let out: Vec<Point> = v.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
    Polyline::new(out).expect("subsequence of a valid polyline keeps distinct neighbors")
}

/// First vertex strictly between `a` and `b` at maximum distance from the chord.
fn farthest(v: &[Point], a: usize, b: usize) -> (usize, f64) {
    let mut best = (a + 1, -1.0);
    for (i, &p) in v.iter().enumerate().take(b).skip(a + 1) {
        let d = point_segment_distance(p, v[a], v[b]);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// Simplifies every segment; node positions are unchanged.
pub fn simplify_network(net: &RoadNetwork, epsilon: f64) -> RoadNetwork {
    let simplified: Vec<_> = net
        .segments()
        .par_iter()
        .map(|(&id, s)| (id, Segment { line: simplify_polyline(&s.line, epsilon), start: s.start, end: s.end }))
        .collect();
    let mut out = RoadNetwork::new();
    for (&id, &p) in net.nodes() {
        out.add_node(id, p);
    }
    for (id, seg) in simplified {
        out.add_segment(id, seg).expect("ids come from a map");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(pts: &[(f64, f64)]) -> Polyline {
        Polyline::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    /// Brute-force deviation: every input vertex to the nearest output edge.
    fn max_deviation(input: &Polyline, output: &Polyline) -> f64 {
        input
            .vertices()
            .iter()
            .map(|&p| output.edges().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }

    fn is_subsequence(sub: &[Point], full: &[Point]) -> bool {
        let mut it = full.iter();
        sub.iter().all(|p| it.any(|q| q == p))
    }

    #[test]
    fn collinear_vertices_collapse_to_endpoints() {
        let l = line(&(0..10).map(|i| (i as f64 * 1.25, 2.0 * i as f64)).collect::<Vec<_>>());
        let s = simplify_polyline(&l, DEFAULT_EPSILON);
        assert_eq!(s.vertices(), &[l.first(), l.last()]);
    }

    #[test]
    fn default_epsilon_exceeds_diagonal_pitch() {
        assert!(1.25 * 2f64.sqrt() < DEFAULT_EPSILON);
    }

    #[test]
    fn staircase_of_pixels_becomes_straight() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (1.25 * i as f64, 1.25 * (i / 2) as f64)).collect();
        let s = simplify_polyline(&line(&pts), DEFAULT_EPSILON);
        assert_eq!(s.vertices().len(), 2);
    }

    #[test]
    fn closed_ring_stays_closed() {
        let pts: Vec<(f64, f64)> = (0..=24)
            .map(|i| {
                let a = i as f64 / 24.0 * std::f64::consts::TAU;
                if i == 24 { (20.0, 0.0) } else { (20.0 * a.cos(), 20.0 * a.sin()) }
            })
            .collect();
        let l = line(&pts);
        let s = simplify_polyline(&l, DEFAULT_EPSILON);
        assert!(s.is_closed());
        assert!(s.vertices().len() >= 4);
        assert!(max_deviation(&l, &s) <= DEFAULT_EPSILON);
    }

    proptest! {
        #[test]
        fn random_zigzag_within_tolerance(ys in proptest::collection::vec(-5.0f64..5.0, 3..60), eps in 0.1f64..4.0) {
            let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64 * 1.25, y)).collect();
            let l = line(&pts);
            let s = simplify_polyline(&l, eps);
            prop_assert_eq!(s.first(), l.first());
            prop_assert_eq!(s.last(), l.last());
            prop_assert!(is_subsequence(s.vertices(), l.vertices()));
            prop_assert!(max_deviation(&l, &s) <= eps + 1e-12);
            prop_assert_eq!(simplify_polyline(&s, eps), s);
        }
    }
}
