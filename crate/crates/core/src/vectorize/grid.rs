use serde::{Deserialize, Serialize};

use super::VectorizeError;
use crate::geom::{BBox, Polyline};
use crate::network::{RoadNetwork, Segment, SegmentId};

/// Distance a grid-line vertex may stray from the known coordinate (3 px).
pub const DEFAULT_GRID_BUFFER: f64 = 3.75;
/// Largest net offset across a line still counted as zero (2 px).
pub const DEFAULT_NET_TOLERANCE: f64 = 2.5;
/// Largest distance from the grid line of end vertices skipped next to a
/// junction (8 px).
pub const DEFAULT_JUNCTION_OFFSET: f64 = 10.0;

/// Known coordinates of the printed map grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// x-coordinates of vertical grid lines.
    pub xs: Vec<f64>,
    /// y-coordinates of horizontal grid lines.
    pub ys: Vec<f64>,
    pub buffer: f64,
    pub net_tolerance: f64,
    /// Where a road crosses a grid line the skeleton junction sits off the
    /// line. End vertices next to a junction that lie outside the buffer but
    /// within this distance of the line are not tested.
    #[serde(default = "default_junction_offset")]
    pub junction_offset: f64,
}

fn default_junction_offset() -> f64 {
    DEFAULT_JUNCTION_OFFSET
}

impl GridSpec {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, buffer: f64, net_tolerance: f64) -> Result<Self, VectorizeError> {
        for (axis, v) in [("x", &xs), ("y", &ys)] {
            if v.windows(2).any(|w| !(w[0] < w[1])) || v.iter().any(|c| !c.is_finite()) {
                return Err(VectorizeError::Grid(format!("{axis} coordinates must be finite and strictly increasing")));
            }
        }
        if xs.is_empty() && ys.is_empty() {
            return Err(VectorizeError::Grid("no grid coordinates".into()));
        }
        if !(buffer > 0.0) || !(net_tolerance >= 0.0) {
            return Err(VectorizeError::Grid(format!("buffer {buffer} and net tolerance {net_tolerance} must be positive")));
        }
        Ok(Self { xs, ys, buffer, net_tolerance, junction_offset: DEFAULT_JUNCTION_OFFSET })
    }

    pub fn with_junction_offset(mut self, reach: f64) -> Result<Self, VectorizeError> {
        if !(reach >= 0.0 && reach.is_finite()) {
            return Err(VectorizeError::Grid(format!("junction offset {reach} must be non-negative")));
        }
        self.junction_offset = reach;
        Ok(self)
    }

    /// Lines at every multiple of `spacing` inside `extent`.
    pub fn regular(extent: &BBox, spacing: f64, buffer: f64, net_tolerance: f64) -> Result<Self, VectorizeError> {
        if !(spacing > 0.0) {
            return Err(VectorizeError::Grid(format!("spacing {spacing} must be positive")));
        }
        let multiples = |lo: f64, hi: f64| {
            let first = (lo / spacing).ceil() as i64;
            let last = (hi / spacing).floor() as i64;
            (first..=last).map(|k| k as f64 * spacing).collect::<Vec<_>>()
        };
        Self::new(multiples(extent.min_x, extent.max_x), multiples(extent.min_y, extent.max_y), buffer, net_tolerance)
    }

    /// Whether `line` traces one of the grid lines.
    pub fn is_grid_line(&self, line: &Polyline) -> bool {
        self.traces_grid(line, false, false)
    }

    /// Like [`GridSpec::is_grid_line`], but at an end flagged as a junction
    /// the leading vertices lying between `buffer` and `junction_offset`
    /// from the line are skipped. At least two vertices must remain.
    pub fn traces_grid(&self, line: &Polyline, junction_start: bool, junction_end: bool) -> bool {
        let v = line.vertices();
        let across_x: Vec<f64> = v.iter().map(|p| p.x).collect();
        let across_y: Vec<f64> = v.iter().map(|p| p.y).collect();
        let test = |across: &[f64], along: &[f64], lines: &[f64]| {
            lines.iter().any(|&g| {
                let spur = |c: f64| {
                    let d = (c - g).abs();
                    d > self.net_tolerance && d <= self.junction_offset
                };
                let mut lo = 0;
                let mut hi = across.len() - 1;
                if junction_start {
                    while lo < hi && spur(across[lo]) {
                        lo += 1;
                    }
                }
                if junction_end {
                    while hi > lo && spur(across[hi]) {
                        hi -= 1;
                    }
                }
                if hi == lo || across[lo..=hi].iter().any(|&c| (c - g).abs() > self.buffer) {
                    return false;
                }
                let net_across = (across[hi] - across[lo]).abs();
                let net_along = (along[hi] - along[lo]).abs();
                net_across <= self.net_tolerance && 10.0 * net_across < net_along
            })
        };
        test(&across_y, &across_x, &self.ys) || test(&across_x, &across_y, &self.xs)
    }
}

/// Splits off the segments that trace grid lines. Ends at a node joining
/// three or more segments get the junction allowance of
/// [`GridSpec::traces_grid`].
pub fn filter_grid_lines(network: &RoadNetwork, grid: &GridSpec) -> (RoadNetwork, Vec<(SegmentId, Segment)>) {
    let degrees = network.degrees();
    let junction = |node| degrees.get(&node).copied().unwrap_or(0) >= 3;
    let mut kept = network.clone();
    let removed = kept.split_off(|_, s| grid.traces_grid(&s.line, junction(s.start), junction(s.end)));
    log::info!("grid filter removed {} of {} segments", removed.len(), network.segment_count());
    (kept, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(vec![0.0, 1000.0], vec![0.0, 1000.0], DEFAULT_GRID_BUFFER, DEFAULT_NET_TOLERANCE).unwrap()
    }

    fn net(lines: Vec<Vec<(f64, f64)>>) -> RoadNetwork {
        RoadNetwork::from_polylines(lines.into_iter().enumerate().map(|(i, pts)| {
            (SegmentId(i as u32), Polyline::new(pts.into_iter().map(|(x, y)| Point::new(x, y)).collect()).unwrap())
        }))
        .unwrap()
    }

    #[test]
    fn horizontal_line_on_grid_is_removed() {
        let (kept, removed) = filter_grid_lines(&net(vec![vec![(100.0, 1000.0), (600.0, 1000.0)]]), &grid());
        assert!(kept.is_empty());
        assert_eq!(removed.len(), 1);
    }

    #[test]
    fn vertical_line_on_grid_is_removed() {
        let (kept, _) = filter_grid_lines(&net(vec![vec![(1000.0, 100.0), (1001.0, 300.0), (1000.5, 600.0)]]), &grid());
        assert!(kept.is_empty());
    }

    #[test]
    fn diagonal_crossing_is_kept() {
        let (kept, removed) = filter_grid_lines(&net(vec![vec![(100.0, 900.0), (300.0, 1100.0)]]), &grid());
        assert_eq!(kept.segment_count(), 1);
        assert!(removed.is_empty());
    }

    #[test]
    fn zigzag_on_grid_removed_and_off_grid_kept() {
        let zig = |off: f64| {
            let mut pts: Vec<(f64, f64)> = (0..30).map(|i| (200.0 + 10.0 * i as f64, off + if i % 2 == 0 { 0.8 } else { -0.8 })).collect();
            pts.push((500.0, off + 0.4));
            pts[0].1 = off;
            pts
        };
        let z = zig(1000.0);
        assert!((z.last().unwrap().1 - z[0].1 - 0.4).abs() < 1e-9);
        assert!((z.last().unwrap().0 - z[0].0 - 300.0).abs() < 1e-9);
        let (kept, _) = filter_grid_lines(&net(vec![z]), &grid());
        assert!(kept.is_empty());
        let (kept, _) = filter_grid_lines(&net(vec![zig(1006.0)]), &grid());
        assert_eq!(kept.segment_count(), 1);
    }

    #[test]
    fn junction_spur_next_to_a_crossing_road_is_ignored() {
        // the grid piece bends 5 m off the line into the crossing road's junction
        let lines = vec![
            vec![(300.0, 1000.0), (295.0, 1005.0)],
            vec![(295.0, 1005.0), (290.0, 1000.0), (100.0, 1000.0)],
            vec![(295.0, 1005.0), (310.0, 1100.0)],
            vec![(300.0, 1000.0), (305.0, 1000.0), (600.0, 1000.0)],
            vec![(300.0, 1000.0), (290.0, 900.0)],
        ];
        let (kept, removed) = filter_grid_lines(&net(lines), &grid());
        let ids: Vec<u32> = removed.iter().map(|(id, _)| id.0).collect();
        assert_eq!(ids, vec![1, 3]);
        assert_eq!(kept.segment_count(), 3);
        let (kept, _) = filter_grid_lines(&net(vec![vec![(295.0, 1005.0), (290.0, 1000.0), (100.0, 1000.0)]]), &grid());
        assert_eq!(kept.segment_count(), 1, "without a junction the spur counts");
    }

    #[test]
    fn long_shallow_spur_is_skipped_but_far_vertices_are_not() {
        let g = grid();
        let line = |pts: &[(f64, f64)]| Polyline::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
        // a road meeting the line at a shallow angle drags the junction 40 m along
        let spur = line(&[(994.4, 4284.4), (995.6, 4250.0), (1001.9, 4243.1), (1000.6, 3999.4)]);
        assert!(g.traces_grid(&spur, true, false));
        assert!(!g.traces_grid(&spur, false, true));
        assert!(!g.is_grid_line(&spur));
        // beyond the junction offset the vertex belongs to the road
        let road = line(&[(985.0, 4284.4), (1001.9, 4243.1), (1000.6, 3999.4)]);
        assert!(!g.traces_grid(&road, true, true));
        // nothing left to test once the spur is skipped
        let stub = line(&[(1005.0, 4000.0), (1006.0, 4100.0)]);
        assert!(!g.traces_grid(&stub, true, true));
        let off = GridSpec { junction_offset: 0.0, ..g };
        assert!(!off.traces_grid(&spur, true, true));
    }

    #[test]
    fn short_stub_fails_the_ratio_test() {
        // net drift 0.5 m over 4 m run: 10 * 0.5 > 4
        let (kept, _) = filter_grid_lines(&net(vec![vec![(10.0, 0.0), (14.0, 0.5)]]), &grid());
        assert_eq!(kept.segment_count(), 1);
    }

    #[test]
    fn regular_grid_and_validation() {
        let ext = BBox { min_x: 500.0, min_y: 1500.0, max_x: 3200.0, max_y: 4000.0 };
        let g = GridSpec::regular(&ext, 1000.0, DEFAULT_GRID_BUFFER, DEFAULT_NET_TOLERANCE).unwrap();
        assert_eq!(g.xs, vec![1000.0, 2000.0, 3000.0]);
        assert_eq!(g.ys, vec![2000.0, 3000.0, 4000.0]);
        assert!(GridSpec::new(vec![1.0, 1.0], vec![], 1.0, 1.0).is_err());
        assert!(GridSpec::new(vec![], vec![], 1.0, 1.0).is_err());
        assert!(GridSpec::new(vec![1.0], vec![], 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn far_vertex_protects_segment(pts in proptest::collection::vec((0.0f64..2000.0, 0.0f64..2000.0), 2..8), far in 0usize..8) {
            let g = grid();
            let mut pts = pts;
            let k = far % pts.len();
            // move one vertex off every grid line in both axes
            pts[k] = (500.0 + pts[k].0 * 1e-3, 500.0 + pts[k].1 * 1e-3);
            let Ok(line) = Polyline::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect()) else { return Ok(()) };
            prop_assert!(!g.is_grid_line(&line));
        }
    }
}
