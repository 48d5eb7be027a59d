use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PainterError;
use crate::geom::{segment_distance, BBox, Point, Polyline};
use crate::network::{RoadNetwork, SegmentId};
use crate::raster::{BandSemantics, GeoRaster, GeoTransform};
use crate::vectorize::GridSpec;

/// Shape of a random road network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomNetworkParams {
    pub roads: usize,
    pub min_length: f64,
    pub max_length: f64,
    /// Most edges per road; each road bends between its edges.
    pub max_edges: usize,
    /// Largest heading change at a bend, degrees.
    pub max_turn_deg: f64,
    /// Smallest distance allowed between two roads, meters.
    pub min_separation: f64,
    /// Distance kept from the raster border, meters.
    pub margin: f64,
    /// Every edge must be at least this many degrees off both axes.
    pub min_axis_angle_deg: f64,
    pub max_attempts: usize,
}

impl Default for RandomNetworkParams {
    fn default() -> Self {
        Self {
            roads: 60,
            min_length: 100.0,
            max_length: 1000.0,
            max_edges: 3,
            max_turn_deg: 30.0,
            min_separation: 40.0,
            margin: 30.0,
            min_axis_angle_deg: 0.0,
            max_attempts: 200_000,
        }
    }
}

fn axis_angle_deg(a: Point, b: Point) -> f64 {
    let deg = (b.y - a.y).atan2(b.x - a.x).to_degrees().rem_euclid(90.0);
    deg.min(90.0 - deg)
}

/// Non-touching roads placed uniformly inside `extent`, one segment each.
pub fn random_network(extent: &BBox, params: &RandomNetworkParams, seed: u64) -> Result<RoadNetwork, PainterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner = extent.expand(-params.margin);
    let mut roads: Vec<(Polyline, BBox)> = Vec::new();
    let mut attempts = 0;
    if !(inner.min_x < inner.max_x && inner.min_y < inner.max_y) || !(params.min_length <= params.max_length) {
        return Err(PainterError::Placement { placed: 0, wanted: params.roads, attempts: 0 });
    }
    while roads.len() < params.roads {
        attempts += 1;
        if attempts > params.max_attempts {
            return Err(PainterError::Placement { placed: roads.len(), wanted: params.roads, attempts: params.max_attempts });
        }
        let length = rng.gen_range(params.min_length..=params.max_length);
        let edges = rng.gen_range(1..=params.max_edges.max(1));
        let step = length / edges as f64;
        let mut heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let start = Point::new(rng.gen_range(inner.min_x..inner.max_x), rng.gen_range(inner.min_y..inner.max_y));
        let mut pts = vec![start];
        for k in 0..edges {
            if k > 0 {
                heading += rng.gen_range(-params.max_turn_deg..=params.max_turn_deg).to_radians();
            }
            let p = *pts.last().unwrap();
            pts.push(Point::new(p.x + step * heading.cos(), p.y + step * heading.sin()));
        }
        if !pts.iter().all(|&p| inner.contains(p)) {
            continue;
        }
        if pts.windows(2).any(|w| axis_angle_deg(w[0], w[1]) < params.min_axis_angle_deg) {
            continue;
        }
        let line = Polyline::new(pts).expect("steps are positive");
        let bbox = line.bbox();
        let reach = bbox.expand(params.min_separation);
        let clear = roads.iter().all(|(other, ob)| {
            !ob.intersects(&reach)
                || line.edges().all(|(a0, a1)| other.edges().all(|(b0, b1)| segment_distance(a0, a1, b0, b1) >= params.min_separation))
        });
        if clear {
            roads.push((line, bbox));
        }
    }
    let net = RoadNetwork::from_polylines(roads.into_iter().enumerate().map(|(i, (l, _))| (SegmentId(i as u32), l)))
        .expect("ids are unique");
    Ok(net)
}

const PAPER: [f64; 3] = [242.0, 236.0, 221.0];
const GRID_INK: [u8; 3] = [70, 70, 75];

/// Paper-toned RGB raster with seeded grain, optionally with 1-pixel grid lines.
pub fn synthetic_base(
    width: usize,
    height: usize,
    transform: GeoTransform,
    seed: u64,
    grid: Option<&GridSpec>,
) -> Result<GeoRaster<u8>, PainterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bands = vec![vec![0u8; width * height]; 3];
    for i in 0..width * height {
        let grain: f64 = rng.gen_range(-8.0..8.0);
        for (band, tone) in bands.iter_mut().zip(PAPER) {
            band[i] = (tone + grain).round().clamp(0.0, 255.0) as u8;
        }
    }
    if let Some(grid) = grid {
        for i in grid_line_pixels(width, height, &transform, grid) {
            for (band, v) in bands.iter_mut().zip(GRID_INK) {
                band[i] = v;
            }
        }
    }
    Ok(GeoRaster::new(width, height, transform, BandSemantics::Rgb, bands)?)
}

/// Sorted indices of the pixels holding a 1-pixel grid line.
pub fn grid_line_pixels(width: usize, height: usize, transform: &GeoTransform, grid: &GridSpec) -> Vec<usize> {
    let mut out = Vec::new();
    for &x in &grid.xs {
        let (col, _) = transform.pixel_of(Point::new(x, transform.origin_y));
        if (0..width as i64).contains(&col) {
            out.extend((0..height).map(|row| row * width + col as usize));
        }
    }
    for &y in &grid.ys {
        let (_, row) = transform.pixel_of(Point::new(transform.origin_x, y));
        if (0..height as i64).contains(&row) {
            out.extend((0..width).map(|col| row as usize * width + col));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
