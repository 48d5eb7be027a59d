//! Skeleton raster to topological road network: pixel tracing, chain
//! assembly, line generalization and coordinate-grid filtering.

mod grid;
mod simplify;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geom::{Point, Polyline};
use crate::morphology::{binary_band, MorphError};
use crate::network::{NodeId, RoadNetwork, Segment, SegmentId};
use crate::raster::{GeoRaster, GeoTransform};

pub use grid::{filter_grid_lines, GridSpec, DEFAULT_GRID_BUFFER, DEFAULT_JUNCTION_OFFSET, DEFAULT_NET_TOLERANCE};
pub use simplify::{simplify_network, simplify_polyline, DEFAULT_EPSILON};

#[derive(Debug, Error, PartialEq)]
pub enum VectorizeError {
    #[error(transparent)]
    Mask(#[from] MorphError),
    #[error("input is not a skeleton: 2x2 block at column {col}, row {row}")]
    NotSkeleton { col: usize, row: usize },
    #[error("invalid grid: {0}")]
    Grid(String),
}

/// Pixel as (row, col) so that derived ordering is raster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: u32,
    pub col: u32,
}

impl Pixel {
    pub fn new(col: u32, row: u32) -> Self {
        Self { row, col }
    }
}

/// Undirected pixel adjacency graph of a skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGraph {
    pub transform: GeoTransform,
    /// Each unordered pair once, stored with the smaller pixel first.
    pub edges: Vec<(Pixel, Pixel)>,
    /// Foreground pixels without any neighbor; they produce no geometry.
    pub isolated: usize,
}

impl PixelGraph {
    pub fn center(&self, p: Pixel) -> Point {
        self.transform.pixel_center(p.col as f64, p.row as f64)
    }

    pub fn edge_length(&self, (a, b): (Pixel, Pixel)) -> f64 {
        self.center(a).distance(self.center(b))
    }
}

/// One edge per 8-adjacent foreground pair, except diagonals whose two
/// pixels also share a foreground 4-neighbor.
pub fn trace_skeleton(skeleton: &GeoRaster<u8>) -> Result<PixelGraph, VectorizeError> {
    let band = binary_band(skeleton)?;
    let (w, h) = (skeleton.width(), skeleton.height());
    let on = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && band[y as usize * w + x as usize] == 1;
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let i = y * w + x;
            if band[i] & band[i + 1] & band[i + w] & band[i + w + 1] == 1 {
                return Err(VectorizeError::NotSkeleton { col: x, row: y });
            }
        }
    }
    let mut edges = Vec::new();
    let mut isolated = 0;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !on(x, y) {
                continue;
            }
            let p = Pixel::new(x as u32, y as u32);
            // forward half of the neighborhood: E, SW, S, SE
            for (dx, dy) in [(1, 0), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x + dx, y + dy);
                if !on(nx, ny) {
                    continue;
                }
                if dx != 0 && dy != 0 && (on(x + dx, y) || on(x, y + dy)) {
                    continue;
                }
                edges.push((p, Pixel::new(nx as u32, ny as u32)));
            }
            let lonely = (-1..=1).all(|dy| (-1..=1).all(|dx| (dx == 0 && dy == 0) || !on(x + dx, y + dy)));
            if lonely {
                isolated += 1;
            }
        }
    }
    Ok(PixelGraph { transform: *skeleton.transform(), edges, isolated })
}

/// Dissolves degree-2 chains into polylines between nodes.
///
/// Nodes are the pixels whose degree is not 2. A cycle made only of
/// degree-2 pixels becomes a closed segment starting and ending at its
/// first pixel in raster order. Node and segment ids follow raster order of
/// the start pixel, so the result does not depend on edge order.
pub fn assemble_segments(graph: &PixelGraph) -> RoadNetwork {
    let mut adj: BTreeMap<Pixel, BTreeSet<Pixel>> = BTreeMap::new();
    for &(a, b) in &graph.edges {
        if a != b {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
    }
    let key = |a: Pixel, b: Pixel| if a < b { (a, b) } else { (b, a) };
    let mut used: BTreeSet<(Pixel, Pixel)> = BTreeSet::new();
    let mut node_ids: BTreeMap<Pixel, NodeId> = BTreeMap::new();
    let mut net = RoadNetwork::new();
    let mut next_segment = 0u32;

    let node_of = |p: Pixel, net: &mut RoadNetwork, ids: &mut BTreeMap<Pixel, NodeId>| {
        *ids.entry(p).or_insert_with(|| {
            let id = NodeId(net.node_count() as u32);
            net.add_node(id, graph.center(p));
            id
        })
    };

    let is_node = |p: Pixel| adj[&p].len() != 2;
    let walk = |start: Pixel, first: Pixel, used: &mut BTreeSet<(Pixel, Pixel)>, stop_at: &dyn Fn(Pixel) -> bool| {
        let mut chain = vec![start, first];
        used.insert(key(start, first));
        let (mut prev, mut cur) = (start, first);
        while !stop_at(cur) {
            let next = adj[&cur].iter().copied().find(|&n| n != prev && !used.contains(&key(cur, n)));
            let Some(next) = next else { break };
            used.insert(key(cur, next));
            chain.push(next);
            prev = cur;
            cur = next;
        }
        chain
    };

    let mut emit = |chain: Vec<Pixel>, net: &mut RoadNetwork, ids: &mut BTreeMap<Pixel, NodeId>| {
        let start = node_of(chain[0], net, ids);
        let end = node_of(*chain.last().unwrap(), net, ids);
        let line = Polyline::new(chain.iter().map(|&p| graph.center(p)).collect()).expect("chain pixels are distinct in sequence");
        net.add_segment(SegmentId(next_segment), Segment { line, start, end }).expect("fresh segment id");
        next_segment += 1;
    };

    let node_pixels: Vec<Pixel> = adj.keys().copied().filter(|&p| is_node(p)).collect();
    for &p in &node_pixels {
        node_of(p, &mut net, &mut node_ids);
    }
    for &p in &node_pixels {
        let neighbors: Vec<Pixel> = adj[&p].iter().copied().collect();
        for n in neighbors {
            if used.contains(&key(p, n)) {
                continue;
            }
            let chain = walk(p, n, &mut used, &|q| is_node(q) || q == p);
            emit(chain, &mut net, &mut node_ids);
        }
    }
    let pixels: Vec<Pixel> = adj.keys().copied().collect();
    for p in pixels {
        let Some(&n) = adj[&p].iter().find(|&&n| !used.contains(&key(p, n))) else { continue };
        let chain = walk(p, n, &mut used, &|q| q == p);
        emit(chain, &mut net, &mut node_ids);
    }
    net
}

/// Counts of a vectorization run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VectorizeStats {
    pub edges: usize,
    pub isolated_pixels: usize,
    pub segments: usize,
    pub nodes: usize,
}

/// Traces, assembles and simplifies a skeleton raster.
pub fn vectorize(skeleton: &GeoRaster<u8>, epsilon: f64) -> Result<(RoadNetwork, VectorizeStats), VectorizeError> {
    let graph = trace_skeleton(skeleton)?;
    let raw = assemble_segments(&graph);
    let net = simplify_network(&raw, epsilon);
    let stats = VectorizeStats {
        edges: graph.edges.len(),
        isolated_pixels: graph.isolated,
        segments: net.segment_count(),
        nodes: net.node_count(),
    };
    log::info!("vectorized {} edges into {} segments ({} isolated pixels dropped)", stats.edges, stats.segments, stats.isolated_pixels);
    Ok((net, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::skeletonize;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_rows(rows: &[&str]) -> GeoRaster<u8> {
        let w = rows[0].len();
        GeoRaster::mask_from_fn(w, rows.len(), GeoTransform::default(), |c, r| rows[r].as_bytes()[c] == b'#').unwrap()
    }

    fn edge_sum(g: &PixelGraph) -> f64 {
        g.edges.iter().map(|&e| g.edge_length(e)).sum()
    }

    #[test]
    fn five_collinear_pixels_make_a_path() {
        let g = trace_skeleton(&from_rows(&[".....", "#####"])).unwrap();
        assert_eq!(g.edges.len(), 4);
        let net = assemble_segments(&g);
        assert_eq!(net.segment_count(), 1);
        assert_eq!(net.node_count(), 2);
        assert!((net.total_length() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn isolated_pixel_is_dropped_and_counted() {
        let g = trace_skeleton(&from_rows(&["...", ".#.", "..."])).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.isolated, 1);
        assert!(assemble_segments(&g).is_empty());
    }

    #[test]
    fn l_corner_suppresses_diagonal() {
        let g = trace_skeleton(&from_rows(&["#.", "##"])).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert!(g.edges.iter().all(|(a, b)| a.row == b.row || a.col == b.col));
    }

    #[test]
    fn block_is_rejected() {
        let err = trace_skeleton(&from_rows(&["...", ".##", ".##"])).unwrap_err();
        assert_eq!(err, VectorizeError::NotSkeleton { col: 1, row: 1 });
    }

    #[test]
    fn t_shape_has_three_segments_and_four_nodes() {
        let g = trace_skeleton(&from_rows(&["#######", "...#...", "...#...", "...#..."])).unwrap();
        let net = assemble_segments(&g);
        assert_eq!(net.segment_count(), 3);
        assert_eq!(net.node_count(), 4);
        let mut degrees: Vec<usize> = net.degrees().values().copied().collect();
        degrees.sort();
        assert_eq!(degrees, vec![1, 1, 1, 3]);
        net.validate().unwrap();
    }

    #[test]
    fn twelve_pixel_ring_is_one_closed_segment() {
        let g = trace_skeleton(&from_rows(&[".###.", "#...#", "#...#", "#...#", ".###."])).unwrap();
        let net = assemble_segments(&g);
        assert_eq!(net.segment_count(), 1);
        assert_eq!(net.node_count(), 1);
        let seg = net.segments().values().next().unwrap();
        assert_eq!(seg.start, seg.end);
        assert!(seg.line.is_closed());
        assert_eq!(seg.line.vertices().len(), 13);
        // start is the first ring pixel in raster order: (col 1, row 0)
        assert_eq!(seg.line.first(), g.center(Pixel::new(1, 0)));
    }

    #[test]
    fn loop_hanging_off_a_junction() {
        let g = trace_skeleton(&from_rows(&[
            "........",
            "..###...",
            ".#...#..",
            "..###...",
            "...#....",
            "...#....",
        ]))
        .unwrap();
        let net = assemble_segments(&g);
        net.validate().unwrap();
        assert!((net.total_length() - edge_sum(&g)).abs() < 1e-9);
        assert!(net.segments().values().any(|s| s.start == s.end));
    }

    #[test]
    fn lengths_and_order_independence_on_random_skeletons() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..30 {
            let (w, h) = (40, 30);
            let band: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.45)).collect();
            let m = GeoRaster::mask_from_fn(w, h, GeoTransform::new(1000.0, 5000.0, 1.25).unwrap(), |c, r| band[r * w + c]).unwrap();
            let s = skeletonize(&m).unwrap();
            let g = trace_skeleton(&s).unwrap();
            let net = assemble_segments(&g);
            net.validate().unwrap();
            assert!((net.total_length() - edge_sum(&g)).abs() < 1e-6, "trial {trial}");
            let mut shuffled = g.clone();
            shuffled.edges.shuffle(&mut rng);
            for e in shuffled.edges.iter_mut().filter(|_| rng.gen_bool(0.5)) {
                *e = (e.1, e.0);
            }
            assert_eq!(assemble_segments(&shuffled), net, "trial {trial}");
        }
    }

    #[test]
    fn vectorize_runs_all_stages() {
        let (net, stats) = vectorize(&from_rows(&["..........", "##########", ".........."]), DEFAULT_EPSILON).unwrap();
        assert_eq!(stats.segments, 1);
        assert_eq!(net.segments().values().next().unwrap().line.vertices().len(), 2);
    }
}
