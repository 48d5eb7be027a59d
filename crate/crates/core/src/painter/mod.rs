//! Synthetic training data: rasterized centerlines, random class
//! assignment and class symbology painted over a base map.

mod generate;
mod symbology;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{project_on_segment, Polyline};
use crate::io::{self, IoError};
use crate::network::{ClassifiedNetwork, RoadClass, RoadNetwork, SegmentId};
use crate::raster::{pixels_near, BandSemantics, GeoRaster, GeoTransform, RasterError};

pub use generate::{grid_line_pixels, random_network, synthetic_base, RandomNetworkParams};
pub use symbology::{ClassSymbol, Dash, SymbologySpec};

/// Width of the label corridor around each road, pixels.
pub const DEFAULT_LABEL_WIDTH: f64 = 13.0;
/// Width of the road-region corridor (5 px on each side), pixels.
pub const REGION_WIDTH: f64 = 10.0;

#[derive(Debug, Error)]
pub enum PainterError {
    #[error("invalid symbology: {0}")]
    Symbology(String),
    #[error("base map must be RGB")]
    NotRgb,
    #[error("width must be at least 1 pixel, got {0}")]
    Width(f64),
    #[error("segment {0} has no class assigned")]
    MissingClass(SegmentId),
    #[error("could not place road {placed} of {wanted} after {attempts} attempts")]
    Placement { placed: usize, wanted: usize, attempts: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Per-segment seed derived from the run seed.
pub fn sub_seed(seed: u64, id: u64) -> u64 {
    let mut z = id.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    seed ^ (z ^ (z >> 31))
}

/// Binary raster that is 1 where a pixel center lies within
/// `width_px / 2` pixels of any segment.
pub fn rasterize_centerlines(
    network: &RoadNetwork,
    width_px: f64,
    transform: &GeoTransform,
    width: usize,
    height: usize,
) -> Result<GeoRaster<u8>, PainterError> {
    if !(width_px >= 1.0) {
        return Err(PainterError::Width(width_px));
    }
    let radius = width_px * transform.pixel_size / 2.0;
    let mut band = vec![0u8; width * height];
    let extent = transform.extent(width, height);
    for (id, seg) in network.segments() {
        if !seg.line.vertices().iter().all(|p| extent.contains(*p)) {
            log::warn!("segment {id} extends beyond the raster and is clipped");
        }
        for i in pixels_near(transform, width, height, &seg.line, radius) {
            band[i] = 1;
        }
    }
    Ok(GeoRaster::new(width, height, *transform, BandSemantics::BinaryMask, vec![band])?)
}

/// Independent uniform class per segment, drawn in segment id order.
pub fn assign_random_classes(network: &RoadNetwork, seed: u64) -> BTreeMap<SegmentId, RoadClass> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    network
        .segments()
        .keys()
        .map(|&id| (id, RoadClass::new(rng.gen_range(1..=5)).expect("range is 1..=5")))
        .collect()
}

/// Randomized drawing parameters of one road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeParams {
    pub stroke_width: f64,
    pub spacing: f64,
    /// Dash phase of each stroke, pixels.
    pub phase: [f64; 2],
}

impl StrokeParams {
    pub fn nominal(symbol: &ClassSymbol) -> Self {
        Self { stroke_width: symbol.stroke_width, spacing: symbol.spacing, phase: [0.0; 2] }
    }

    pub fn draw(symbol: &ClassSymbol, spec: &SymbologySpec, rng: &mut impl Rng) -> Self {
        let mut jitter = |amount: f64| if amount > 0.0 { rng.gen_range(-amount..=amount) } else { 0.0 };
        let stroke_width = symbol.stroke_width + jitter(spec.width_jitter);
        let spacing = if symbol.line_count == 2 { symbol.spacing + jitter(spec.spacing_jitter) } else { 0.0 };
        let mut phase = [0.0; 2];
        if spec.random_dash_phase {
            for (p, dash) in phase.iter_mut().zip([symbol.dash, symbol.second_dash]) {
                if let Some(d) = dash {
                    *p = rng.gen_range(0.0..d.period());
                }
            }
        }
        Self { stroke_width, spacing, phase }
    }
}

/// Pixels inked by `symbol` along `line`.
///
/// A pixel belongs to a stroke when its signed distance from the line (left
/// positive) is within half a stroke width of the stroke offset and the dash
/// pattern is on at the arc length of its nearest point. Strokes end flat at
/// open line ends.
pub fn stroke_pixels(
    line: &Polyline,
    symbol: &ClassSymbol,
    params: &StrokeParams,
    transform: &GeoTransform,
    width: usize,
    height: usize,
) -> Vec<usize> {
    let px = transform.pixel_size;
    let offsets: Vec<(f64, Option<Dash>, f64)> = match symbol.line_count {
        1 => vec![(0.0, symbol.dash, params.phase[0])],
        _ => {
            let o = (params.spacing + params.stroke_width) / 2.0;
            vec![(o, symbol.dash, params.phase[0]), (-o, symbol.second_dash, params.phase[1])]
        }
    };
    let reach = offsets.iter().map(|o| o.0.abs()).fold(0.0, f64::max) + params.stroke_width / 2.0;
    let verts = line.vertices();
    let cum = line.cumulative_lengths();
    let last_edge = verts.len() - 2;
    let closed = line.is_closed();
    let mut out = Vec::new();
    for i in pixels_near(transform, width, height, line, (reach + 0.5) * px) {
        let p = transform.pixel_center((i % width) as f64, (i / width) as f64);
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for (e, w) in verts.windows(2).enumerate() {
            let (t, d) = project_on_segment(p, w[0], w[1]);
            if d < best.0 {
                best = (d, e, t);
            }
        }
        let (d, e, t) = best;
        let (a, b) = (verts[e], verts[e + 1]);
        if !closed {
            let raw = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / a.distance(b).powi(2);
            if (e == 0 && raw < 0.0) || (e == last_edge && raw > 1.0) {
                continue;
            }
        }
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let signed = if cross < 0.0 { -d } else { d } / px;
        let s = (cum[e] + t * a.distance(b)) / px;
        let inked = offsets.iter().any(|&(o, dash, phase)| {
            (signed - o).abs() <= params.stroke_width / 2.0
                && dash.is_none_or(|dash| (s + phase).rem_euclid(dash.period()) < dash.on)
        });
        if inked {
            out.push(i);
        }
    }
    out
}

/// Overpaints every road corridor with the background fill, then strokes
/// each road with its class symbol in segment id order.
pub fn paint_symbology(
    base: &GeoRaster<u8>,
    network: &RoadNetwork,
    assignment: &BTreeMap<SegmentId, RoadClass>,
    spec: &SymbologySpec,
    seed: u64,
) -> Result<GeoRaster<u8>, PainterError> {
    spec.validate()?;
    if base.semantics() != BandSemantics::Rgb {
        return Err(PainterError::NotRgb);
    }
    let (w, h, t) = (base.width(), base.height(), *base.transform());
    let segments: Vec<_> = network.segments().iter().collect();
    let classes: Vec<RoadClass> = segments
        .iter()
        .map(|(id, _)| assignment.get(id).copied().ok_or(PainterError::MissingClass(**id)))
        .collect::<Result<_, _>>()?;
    let radius = spec.overpaint_width * t.pixel_size / 2.0;
    let corridors: Vec<Vec<usize>> = segments.par_iter().map(|(_, s)| pixels_near(&t, w, h, &s.line, radius)).collect();
    let strokes: Vec<Vec<usize>> = segments
        .par_iter()
        .zip(&classes)
        .map(|((id, s), class)| {
            let symbol = spec.symbol(class.index());
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, id.0 as u64));
            let params = StrokeParams::draw(symbol, spec, &mut rng);
            stroke_pixels(&s.line, symbol, &params, &t, w, h)
        })
        .collect();
    let mut bands = base.bands().to_vec();
    for i in corridors.into_iter().flatten() {
        for (band, value) in bands.iter_mut().zip(spec.background) {
            band[i] = value;
        }
    }
    for (pixels, class) in strokes.into_iter().zip(&classes) {
        let color = spec.symbol(class.index()).color;
        for i in pixels {
            for (band, value) in bands.iter_mut().zip(color) {
                band[i] = value;
            }
        }
    }
    Ok(GeoRaster::new(w, h, t, BandSemantics::Rgb, bands)?)
}

/// Class label raster: each road's corridor of `width_px` carries its
/// class. Where corridors overlap, the pixel takes the class of the nearest
/// centerline, and the higher class when two are equally near.
pub fn rasterize_labels(
    network: &RoadNetwork,
    assignment: &BTreeMap<SegmentId, RoadClass>,
    width_px: f64,
    transform: &GeoTransform,
    width: usize,
    height: usize,
) -> Result<GeoRaster<u8>, PainterError> {
    if !(width_px >= 1.0) {
        return Err(PainterError::Width(width_px));
    }
    let radius = width_px * transform.pixel_size / 2.0;
    let mut band = vec![0u8; width * height];
    let mut nearest = vec![f64::INFINITY; width * height];
    for (id, seg) in network.segments() {
        let class = assignment.get(id).ok_or(PainterError::MissingClass(*id))?.get();
        for i in pixels_near(transform, width, height, &seg.line, radius) {
            let d = seg.line.distance_to(transform.pixel_center((i % width) as f64, (i / width) as f64));
            let tie = (d - nearest[i]).abs() <= 1e-9;
            if (d < nearest[i] && !tie) || (tie && class > band[i]) {
                band[i] = class;
                nearest[i] = nearest[i].min(d);
            }
        }
    }
    Ok(GeoRaster::new(width, height, *transform, BandSemantics::ClassLabel, vec![band])?)
}

/// Painted map, its class labels and the road region, all on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTriplet {
    pub map: GeoRaster<u8>,
    pub labels: GeoRaster<u8>,
    pub region_mask: GeoRaster<u8>,
    pub assignment: BTreeMap<SegmentId, RoadClass>,
    pub seed: u64,
}

/// Assigns random classes, paints them and rasterizes labels and region.
pub fn build_synthetic_dataset(
    base: &GeoRaster<u8>,
    network: &RoadNetwork,
    spec: &SymbologySpec,
    seed: u64,
    label_width: f64,
) -> Result<SyntheticTriplet, PainterError> {
    let assignment = assign_random_classes(network, seed);
    let map = paint_symbology(base, network, &assignment, spec, seed)?;
    let (w, h, t) = (base.width(), base.height(), base.transform());
    let labels = rasterize_labels(network, &assignment, label_width, t, w, h)?;
    let region_mask = rasterize_centerlines(network, REGION_WIDTH, t, w, h)?;
    Ok(SyntheticTriplet { map, labels, region_mask, assignment, seed })
}

/// Files written for a triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletFiles {
    pub map: PathBuf,
    pub labels: PathBuf,
    pub region_mask: PathBuf,
    pub assignment: PathBuf,
    pub seed: u64,
}

/// Writes the three rasters (with world files), the class assignment as
/// GeoJSON and a small JSON record holding the seed.
pub fn write_triplet(
    dir: &Path,
    stem: &str,
    triplet: &SyntheticTriplet,
    network: &RoadNetwork,
    crs_epsg: Option<u32>,
) -> Result<TripletFiles, PainterError> {
    std::fs::create_dir_all(dir).map_err(io::io_err(dir))?;
    let files = TripletFiles {
        map: dir.join(format!("{stem}_map.png")),
        labels: dir.join(format!("{stem}_labels.png")),
        region_mask: dir.join(format!("{stem}_region.png")),
        assignment: dir.join(format!("{stem}_assignment.geojson")),
        seed: triplet.seed,
    };
    io::write_raster(&files.map, &triplet.map)?;
    io::write_raster(&files.labels, &triplet.labels)?;
    io::write_raster(&files.region_mask, &triplet.region_mask)?;
    let classified = ClassifiedNetwork::from_assignment(network, &triplet.assignment);
    io::write_classified_network(&files.assignment, &classified, crs_epsg)?;
    let record = dir.join(format!("{stem}_triplet.json"));
    let text = serde_json::to_string_pretty(&files).expect("paths serialize");
    std::fs::write(&record, text + "\n").map_err(io::io_err(&record))?;
    Ok(files)
}
