//! One function per processing stage. Each reads its inputs from files,
//! writes its outputs to files and returns the manifest entry it recorded.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::{require, Recorder};
use super::render::render_overlay;
use super::{EvaluationConfig, ManifestEntry, PipelineError, TilingConfig};
use crate::assignment::{classify_network, write_profiles, AssignmentParams, NetworkAssignment};
use crate::evaluation::{line_metrics, pixel_metrics, LineMetricReport, MetricSet, PixelMetricOptions};
use crate::io;
use crate::morphology::{close_mask, remove_small_components, skeletonize};
use crate::network::{ClassifiedNetwork, RoadNetwork};
use crate::painter::{build_synthetic_dataset, synthetic_base, write_triplet, SymbologySpec, TripletFiles};
use crate::probability::{apply_hard_mask, baseline_classifier, ensemble_average, BaselineParams};
use crate::raster::{BandSemantics, GeoRaster, GeoTransform, ProbabilityField};
use crate::tiling::{make_tiles, read_tile_grid, stitch_fields, stitch_tiles, write_tile_grid};
use crate::vectorize::{filter_grid_lines, vectorize as trace_network, GridSpec, VectorizeStats};

fn parent_dir(path: &Path) -> Result<(), PipelineError> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(PipelineError::file(dir)),
        None => Ok(()),
    }
}

fn read_mask(path: &Path) -> Result<GeoRaster<u8>, PipelineError> {
    Ok(io::read_raster(path, BandSemantics::BinaryMask)?)
}

/// Reads a map as RGB, falling back to grayscale.
pub fn read_map(path: &Path) -> Result<GeoRaster<u8>, PipelineError> {
    require(&[path])?;
    match io::read_raster(path, BandSemantics::Rgb) {
        Ok(r) => Ok(r),
        Err(io::IoError::ChannelMismatch { .. }) => Ok(io::read_raster(path, BandSemantics::Gray)?),
        Err(e) => Err(e.into()),
    }
}

/// Splits a raster into overlapping tiles named `<sheet>_<row>_<col>.png`.
pub fn tile(
    input: &Path,
    out_dir: &Path,
    sheet: &str,
    tiling: TilingConfig,
    manifest: Option<&Path>,
) -> Result<ManifestEntry, PipelineError> {
    let mut rec = Recorder::new("tile", &(sheet, tiling), None);
    rec.input(input)?;
    let raster = read_map(input)?;
    let grid = make_tiles(&raster, tiling.tile_size, tiling.overlap)?;
    std::fs::create_dir_all(out_dir).map_err(PipelineError::file(out_dir))?;
    for p in write_tile_grid(out_dir, sheet, &grid)? {
        rec.output(&p)?;
    }
    rec.finish(manifest)
}

/// Reassembles tiles written by [`tile`] into one raster.
pub fn stitch(tiles_dir: &Path, sheet: &str, output: &Path, manifest: Option<&Path>) -> Result<ManifestEntry, PipelineError> {
    let layout = tiles_dir.join(format!("{sheet}_tiles.json"));
    require(&[&layout])?;
    let mut rec = Recorder::new("stitch", &sheet, None);
    rec.input(&layout)?;
    let grid = read_tile_grid(tiles_dir, sheet)?;
    let raster = stitch_tiles(&grid)?;
    parent_dir(output)?;
    io::write_raster(output, &raster)?;
    rec.output(output)?;
    rec.finish(manifest)
}

/// Removes small components, then closes the mask.
pub fn morph(input: &Path, output: &Path, min_area: usize, manifest: Option<&Path>) -> Result<ManifestEntry, PipelineError> {
    let mut rec = Recorder::new("morph", &min_area, None);
    rec.input(input)?;
    let mask = read_mask(input)?;
    let cleaned = close_mask(&remove_small_components(&mask, min_area)?)?;
    parent_dir(output)?;
    io::write_raster(output, &cleaned)?;
    rec.output(output)?;
    rec.finish(manifest)
}

pub fn skeleton(input: &Path, output: &Path, manifest: Option<&Path>) -> Result<ManifestEntry, PipelineError> {
    let mut rec = Recorder::new("skeleton", &(), None);
    rec.input(input)?;
    let skel = skeletonize(&read_mask(input)?)?;
    parent_dir(output)?;
    io::write_raster(output, &skel)?;
    rec.output(output)?;
    rec.finish(manifest)
}

/// Traces a skeleton into a simplified road network.
pub fn vectorize(
    input: &Path,
    output: &Path,
    epsilon: f64,
    crs_epsg: Option<u32>,
    manifest: Option<&Path>,
) -> Result<(ManifestEntry, VectorizeStats), PipelineError> {
    let mut rec = Recorder::new("vectorize", &epsilon, None);
    rec.input(input)?;
    let (net, stats) = trace_network(&read_mask(input)?, epsilon)?;
    parent_dir(output)?;
    io::write_road_network(output, &net, crs_epsg)?;
    rec.output(output)?;
    Ok((rec.finish(manifest)?, stats))
}

/// Drops segments lying on grid lines. Without a grid the network is copied.
/// Returns the number of removed segments.
pub fn gridfilter(
    input: &Path,
    output: &Path,
    removed_output: Option<&Path>,
    grid: Option<&GridSpec>,
    crs_epsg: Option<u32>,
    manifest: Option<&Path>,
) -> Result<(ManifestEntry, usize), PipelineError> {
    let mut rec = Recorder::new("gridfilter", &grid, None);
    rec.input(input)?;
    let net = io::read_road_network(input)?;
    let (kept, removed) = match grid {
        Some(g) => filter_grid_lines(&net, g),
        None => (net, Vec::new()),
    };
    parent_dir(output)?;
    io::write_road_network(output, &kept, crs_epsg)?;
    rec.output(output)?;
    if let Some(path) = removed_output {
        let removed_net = RoadNetwork::from_polylines(removed.iter().map(|(id, s)| (*id, s.line.clone())))?;
        parent_dir(path)?;
        io::write_road_network(path, &removed_net, crs_epsg)?;
        rec.output(path)?;
    }
    Ok((rec.finish(manifest)?, removed.len()))
}

/// Where `paint` takes its network and base map from.
#[derive(Debug, Clone)]
pub struct PaintInputs<'a> {
    pub network: &'a Path,
    /// Base raster; when absent a paper-toned base is generated on `grid`.
    pub base: Option<&'a Path>,
    /// Raster size and georeferencing of a generated base.
    pub grid: Option<(usize, usize, GeoTransform)>,
}

/// Paints a network with random classes and writes map, labels, region and
/// class assignment.
#[allow(clippy::too_many_arguments)]
pub fn paint(
    inputs: &PaintInputs,
    symbology: &SymbologySpec,
    label_width: f64,
    seed: u64,
    out_dir: &Path,
    stem: &str,
    crs_epsg: Option<u32>,
    manifest: Option<&Path>,
) -> Result<(ManifestEntry, TripletFiles), PipelineError> {
    let mut rec = Recorder::new("paint", &(symbology, label_width), Some(seed));
    rec.input(inputs.network)?;
    let net = io::read_road_network(inputs.network)?;
    let base = match (inputs.base, inputs.grid) {
        (Some(path), _) => {
            rec.input(path)?;
            read_map(path)?
        }
        (None, Some((w, h, t))) => synthetic_base(w, h, t, seed, None)?,
        (None, None) => return Err(PipelineError::Config("paint needs a base map or a raster size".into())),
    };
    let triplet = build_synthetic_dataset(&base, &net, symbology, seed, label_width)?;
    let files = write_triplet(out_dir, stem, &triplet, &net, crs_epsg)?;
    for p in [&files.map, &files.labels, &files.region_mask, &files.assignment] {
        rec.output(p)?;
    }
    Ok((rec.finish(manifest)?, files))
}

/// Runs the baseline classifier tile by tile and stitches the field. A
/// region mask limits scoring to road pixels. Rasters smaller than one tile
/// stride are classified whole.
#[allow(clippy::too_many_arguments)]
pub fn classify_baseline(
    map_path: &Path,
    region_path: Option<&Path>,
    output: &Path,
    symbology: &SymbologySpec,
    params: &BaselineParams,
    tiling: TilingConfig,
    manifest: Option<&Path>,
) -> Result<ManifestEntry, PipelineError> {
    let mut rec = Recorder::new("classify_baseline", &(symbology, params, tiling), None);
    rec.input(map_path)?;
    let map = read_map(map_path)?;
    let region = match region_path {
        Some(p) => {
            rec.input(p)?;
            Some(read_mask(p)?)
        }
        None => None,
    };
    let stride = tiling.tile_size.saturating_sub(2 * tiling.overlap);
    let field = if map.width().min(map.height()) < stride {
        baseline_classifier(&map, symbology, params, region.as_ref())?
    } else {
        let map_tiles = make_tiles(&map, tiling.tile_size, tiling.overlap)?;
        let region_tiles = region.as_ref().map(|r| make_tiles(r, tiling.tile_size, tiling.overlap)).transpose()?;
        let mut fields = Vec::with_capacity(map_tiles.tiles.len());
        for (i, t) in map_tiles.tiles.iter().enumerate() {
            log::debug!("baseline tile {} {}", t.row, t.col);
            let r = region_tiles.as_ref().map(|g| &g.tiles[i].raster);
            fields.push((t.row, t.col, baseline_classifier(&t.raster, symbology, params, r)?));
        }
        stitch_fields(map_tiles.layout, fields)?
    };
    parent_dir(output)?;
    io::write_probability_field(output, &field)?;
    rec.output(output)?;
    rec.finish(manifest)
}

/// Averages ensemble members band-wise.
pub fn ensemble(inputs: &[PathBuf], output: &Path, manifest: Option<&Path>) -> Result<ManifestEntry, PipelineError> {
    if inputs.is_empty() {
        return Err(PipelineError::Config("ensemble needs at least one member".into()));
    }
    let mut rec = Recorder::new("ensemble", &inputs.len(), None);
    let mut members = Vec::with_capacity(inputs.len());
    for p in inputs {
        rec.input(p)?;
        members.push(io::read_probability_field(p)?);
    }
    let field = ensemble_average(&members)?;
    parent_dir(output)?;
    io::write_probability_field(output, &field)?;
    rec.output(output)?;
    rec.finish(manifest)
}

/// Sets pixels outside the region mask to no road.
pub fn mask(field_path: &Path, region_path: &Path, output: &Path, manifest: Option<&Path>) -> Result<ManifestEntry, PipelineError> {
    let mut rec = Recorder::new("mask", &(), None);
    rec.input(field_path)?;
    rec.input(region_path)?;
    let field = io::read_probability_field(field_path)?;
    let masked = apply_hard_mask(&field, &read_mask(region_path)?)?;
    parent_dir(output)?;
    io::write_probability_field(output, &masked)?;
    rec.output(output)?;
    rec.finish(manifest)
}

/// Classifies every network segment and writes the sections, plus one
/// profile CSV per segment when `profiles_dir` is given.
pub fn assign(
    network_path: &Path,
    field_path: &Path,
    output: &Path,
    params: &AssignmentParams,
    profiles_dir: Option<&Path>,
    crs_epsg: Option<u32>,
    manifest: Option<&Path>,
) -> Result<(ManifestEntry, NetworkAssignment), PipelineError> {
    let mut rec = Recorder::new("assign", params, None);
    rec.input(network_path)?;
    rec.input(field_path)?;
    let net = io::read_road_network(network_path)?;
    let field = io::read_probability_field(field_path)?;
    let result = classify_network(&net, &field, params)?;
    parent_dir(output)?;
    io::write_classified_network(output, &result.network, crs_epsg)?;
    rec.output(output)?;
    if let Some(dir) = profiles_dir {
        write_profiles(dir, &result)?;
        for id in result.segments.keys() {
            rec.output(&dir.join(format!("segment_{}.csv", id.0)))?;
        }
    }
    Ok((rec.finish(manifest)?, result))
}

/// Line and pixel metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub line: Option<LineMetricReport>,
    pub pixel: Option<MetricSet>,
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(l) = &self.line {
            s += &format!("line metrics, buffer {} m\n", l.buffer);
            s += &l.to_table();
        }
        if let Some(p) = &self.pixel {
            if !s.is_empty() {
                s.push('\n');
            }
            s += "pixel metrics\n";
            s += &p.to_table();
        }
        s
    }
}

/// Inputs of an evaluation; either part may be absent.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs<'a> {
    /// Ground-truth and predicted classified networks.
    pub lines: Option<(&'a Path, &'a Path)>,
    /// Probability field and class labels.
    pub pixels: Option<(&'a Path, &'a Path)>,
    /// Optional mask restricting pixel metrics.
    pub eval_mask: Option<&'a Path>,
}

/// Computes the metrics and writes them as JSON and, optionally, a text table.
pub fn eval(
    inputs: &EvalInputs,
    config: &EvaluationConfig,
    json_output: &Path,
    text_output: Option<&Path>,
    manifest: Option<&Path>,
) -> Result<(ManifestEntry, EvaluationReport), PipelineError> {
    if inputs.lines.is_none() && inputs.pixels.is_none() {
        return Err(PipelineError::Config("evaluation needs networks or a probability field with labels".into()));
    }
    let mut rec = Recorder::new("eval", config, None);
    let line = match inputs.lines {
        Some((gt, pred)) => {
            rec.input(gt)?;
            rec.input(pred)?;
            let g = io::read_classified_network(gt)?;
            let p = io::read_classified_network(pred)?;
            Some(line_metrics(&g, &p, config.buffer)?)
        }
        None => None,
    };
    let pixel = match inputs.pixels {
        Some((field_path, labels_path)) => {
            rec.input(field_path)?;
            rec.input(labels_path)?;
            let field = io::read_probability_field(field_path)?;
            let labels = io::read_raster(labels_path, BandSemantics::ClassLabel)?;
            let m = match inputs.eval_mask {
                Some(p) => {
                    rec.input(p)?;
                    Some(read_mask(p)?)
                }
                None => None,
            };
            let options = PixelMetricOptions { exclude_no_road: config.exclude_no_road, macro_iou: config.macro_iou };
            Some(pixel_metrics(&field, &labels, m.as_ref(), options)?)
        }
        None => None,
    };
    let report = EvaluationReport { line, pixel };
    parent_dir(json_output)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(json_output, json + "\n").map_err(PipelineError::file(json_output))?;
    rec.output(json_output)?;
    if let Some(path) = text_output {
        parent_dir(path)?;
        std::fs::write(path, report.to_text()).map_err(PipelineError::file(path))?;
        rec.output(path)?;
    }
    Ok((rec.finish(manifest)?, report))
}

/// Draws classified sections over the map.
pub fn render(
    map_path: &Path,
    classified_path: &Path,
    output: &Path,
    line_width_px: f64,
    manifest: Option<&Path>,
) -> Result<ManifestEntry, PipelineError> {
    let mut rec = Recorder::new("render", &line_width_px, None);
    rec.input(map_path)?;
    rec.input(classified_path)?;
    let map = read_map(map_path)?;
    let net: ClassifiedNetwork = io::read_classified_network(classified_path)?;
    let img = render_overlay(&map, &net, line_width_px)?;
    parent_dir(output)?;
    io::write_raster(output, &img)?;
    rec.output(output)?;
    rec.finish(manifest)
}

/// Writes a probability field for one stage of the run.
pub(crate) fn write_field(
    stage: &str,
    field: &ProbabilityField,
    output: &Path,
    params: &impl Serialize,
    seed: Option<u64>,
    manifest: Option<&Path>,
) -> Result<ManifestEntry, PipelineError> {
    let mut rec = Recorder::new(stage, params, seed);
    parent_dir(output)?;
    io::write_probability_field(output, field)?;
    rec.output(output)?;
    rec.finish(manifest)
}
