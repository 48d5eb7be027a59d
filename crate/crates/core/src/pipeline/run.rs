use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::require;
use super::stages::{self, EvalInputs, EvaluationReport};
use super::{ManifestEntry, Mode, PipelineConfig, PipelineError, ProbabilitySource, Recorder};
use crate::io;
use crate::network::ClassifiedNetwork;
use crate::painter::{build_synthetic_dataset, grid_line_pixels, random_network, sub_seed, synthetic_base};
use crate::probability::flip_labels;
use crate::raster::{BandSemantics, GeoTransform, ProbabilityField};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Paths of every file a run writes under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub config: PathBuf,
    pub map: PathBuf,
    pub labels: PathBuf,
    pub region: PathBuf,
    pub segmentation: PathBuf,
    pub ground_truth: PathBuf,
    pub mask: PathBuf,
    pub skeleton: PathBuf,
    pub network: PathBuf,
    pub roads: PathBuf,
    pub grid_lines: PathBuf,
    pub field: PathBuf,
    pub classified: PathBuf,
    pub profiles: PathBuf,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
    pub summary: PathBuf,
    pub overlay: PathBuf,
}

impl RunFiles {
    pub fn new(dir: &Path) -> Self {
        let p = |name: &str| dir.join(name);
        RunFiles {
            dir: dir.to_path_buf(),
            manifest: p(MANIFEST_FILE),
            config: p("config.toml"),
            map: p("map.png"),
            labels: p("labels.png"),
            region: p("region.png"),
            segmentation: p("segmentation.png"),
            ground_truth: p("ground_truth.geojson"),
            mask: p("mask.png"),
            skeleton: p("skeleton.png"),
            network: p("network.geojson"),
            roads: p("roads.geojson"),
            grid_lines: p("grid_lines.geojson"),
            field: p("field.probf"),
            classified: p("classified.geojson"),
            profiles: p("profiles"),
            report_json: p("report.json"),
            report_text: p("report.txt"),
            summary: p("summary.json"),
            overlay: p("overlay.png"),
        }
    }

    pub fn member(&self, k: usize) -> PathBuf {
        self.dir.join(format!("probabilities_{k}.probf"))
    }

    pub fn masked_member(&self, k: usize) -> PathBuf {
        self.dir.join(format!("masked_{k}.probf"))
    }
}

/// Counts and metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub vectorized_segments: usize,
    pub grid_segments_removed: usize,
    pub classified_segments: usize,
    pub sections: usize,
    pub failed_segments: usize,
    pub evaluation: Option<EvaluationReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub files: RunFiles,
    pub report: PipelineReport,
    pub manifest: Vec<ManifestEntry>,
}

/// Map, road mask and optional references feeding the rest of a run.
struct Sources {
    map: Option<PathBuf>,
    segmentation: PathBuf,
    ground_truth: Option<PathBuf>,
    labels: Option<PathBuf>,
    extent_transform: GeoTransform,
    width: usize,
    height: usize,
}

fn synthesize(cfg: &PipelineConfig, files: &RunFiles, manifest: &Path) -> Result<(Sources, ManifestEntry), PipelineError> {
    let s = &cfg.synthetic;
    let mut rec = Recorder::new("synthesize", &(s, &cfg.grid, &cfg.symbology), Some(cfg.seed));
    let t = GeoTransform::new(s.origin_x, s.origin_y, s.pixel_size)?;
    let extent = t.extent(s.width, s.height);
    let grid = if s.draw_grid { cfg.grid.spec(&extent)? } else { None };
    let net = random_network(&extent, &s.network, sub_seed(cfg.seed, 1))?;
    let base = synthetic_base(s.width, s.height, t, sub_seed(cfg.seed, 2), grid.as_ref())?;
    let triplet = build_synthetic_dataset(&base, &net, &cfg.symbology, sub_seed(cfg.seed, 3), s.label_width)?;
    // the road region plus the printed grid lines stands in for a segmentation model
    let mut seg = triplet.region_mask.band(0).to_vec();
    if let Some(g) = &grid {
        for i in grid_line_pixels(s.width, s.height, &t, g) {
            seg[i] = 1;
        }
    }
    let segmentation = triplet.region_mask.with_bands(BandSemantics::BinaryMask, vec![seg])?;
    io::write_raster(&files.map, &triplet.map)?;
    io::write_raster(&files.labels, &triplet.labels)?;
    io::write_raster(&files.region, &triplet.region_mask)?;
    io::write_raster(&files.segmentation, &segmentation)?;
    let truth = ClassifiedNetwork::from_assignment(&net, &triplet.assignment);
    io::write_classified_network(&files.ground_truth, &truth, cfg.io.crs_epsg)?;
    for p in [&files.map, &files.labels, &files.region, &files.segmentation, &files.ground_truth] {
        rec.output(p)?;
    }
    let sources = Sources {
        map: Some(files.map.clone()),
        segmentation: files.segmentation.clone(),
        ground_truth: Some(files.ground_truth.clone()),
        labels: Some(files.labels.clone()),
        extent_transform: t,
        width: s.width,
        height: s.height,
    };
    Ok((sources, rec.finish(Some(manifest))?))
}

fn file_sources(cfg: &PipelineConfig) -> Result<Sources, PipelineError> {
    let seg = cfg.io.segmentation.clone().ok_or_else(|| PipelineError::Config("files mode needs io.segmentation".into()))?;
    let optional = [cfg.io.map.as_ref(), cfg.io.ground_truth.as_ref(), cfg.io.labels.as_ref()];
    let mut needed: Vec<&Path> = vec![&seg];
    needed.extend(optional.iter().flatten().map(|p| p.as_path()));
    needed.extend(cfg.io.probabilities.iter().map(|p| p.as_path()));
    require(&needed)?;
    let mask = io::read_raster(&seg, BandSemantics::BinaryMask)?;
    Ok(Sources {
        map: cfg.io.map.clone(),
        segmentation: seg,
        ground_truth: cfg.io.ground_truth.clone(),
        labels: cfg.io.labels.clone(),
        extent_transform: *mask.transform(),
        width: mask.width(),
        height: mask.height(),
    })
}

/// Runs every stage end to end, writing files under `io.output_dir` and one
/// manifest line per stage. The manifest is rewritten from scratch.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let files = RunFiles::new(&cfg.io.output_dir);
    std::fs::create_dir_all(&files.dir).map_err(PipelineError::file(&files.dir))?;
    if files.manifest.exists() {
        std::fs::remove_file(&files.manifest).map_err(PipelineError::file(&files.manifest))?;
    }
    std::fs::write(&files.config, cfg.to_toml()).map_err(PipelineError::file(&files.config))?;
    let m = Some(files.manifest.as_path());
    let mut entries = Vec::new();

    let src = match cfg.mode {
        Mode::Synthetic => {
            let (src, e) = synthesize(cfg, &files, &files.manifest)?;
            entries.push(e);
            src
        }
        Mode::Files => file_sources(cfg)?,
    };
    log::info!("sources ready, {}x{} pixels", src.width, src.height);

    let members: Vec<PathBuf> = match cfg.probabilities.source {
        ProbabilitySource::Baseline => {
            let map = src.map.as_deref().ok_or_else(|| PipelineError::Config("baseline probabilities need a map".into()))?;
            let out = files.member(0);
            entries.push(stages::classify_baseline(
                map,
                Some(&src.segmentation),
                &out,
                &cfg.symbology,
                &cfg.baseline,
                cfg.tiling,
                m,
            )?);
            vec![out]
        }
        ProbabilitySource::Oracle => {
            let labels_path = src.labels.as_deref().ok_or_else(|| PipelineError::Config("oracle probabilities need labels".into()))?;
            let labels = io::read_raster(labels_path, BandSemantics::ClassLabel)?;
            let mut out = Vec::new();
            for k in 0..cfg.probabilities.oracle_members {
                let seed = sub_seed(cfg.seed, 100 + k as u64);
                let field = ProbabilityField::one_hot(&flip_labels(&labels, cfg.probabilities.flip_rate, seed)?)?;
                let path = files.member(k);
                entries.push(stages::write_field("oracle", &field, &path, &cfg.probabilities.flip_rate, Some(seed), m)?);
                out.push(path);
            }
            out
        }
        ProbabilitySource::Files => cfg.io.probabilities.clone(),
    };
    log::info!("{} probability member(s)", members.len());

    entries.push(stages::morph(&src.segmentation, &files.mask, cfg.morphology.min_area, m)?);
    entries.push(stages::skeleton(&files.mask, &files.skeleton, m)?);
    let (e, stats) = stages::vectorize(&files.skeleton, &files.network, cfg.vectorize.epsilon, cfg.io.crs_epsg, m)?;
    entries.push(e);
    let extent = src.extent_transform.extent(src.width, src.height);
    let grid = cfg.grid.spec(&extent)?;
    let (e, removed) = stages::gridfilter(&files.network, &files.roads, Some(&files.grid_lines), grid.as_ref(), cfg.io.crs_epsg, m)?;
    entries.push(e);
    log::info!("{} segments traced, {removed} on grid lines", stats.segments);

    let mut masked = Vec::with_capacity(members.len());
    for (k, member) in members.iter().enumerate() {
        let out = files.masked_member(k);
        entries.push(stages::mask(member, &files.mask, &out, m)?);
        masked.push(out);
    }
    entries.push(stages::ensemble(&masked, &files.field, m)?);

    let profiles = cfg.io.profiles.then_some(files.profiles.as_path());
    let (e, assignment) = stages::assign(&files.roads, &files.field, &files.classified, &cfg.assignment, profiles, cfg.io.crs_epsg, m)?;
    entries.push(e);

    let evaluation = if src.ground_truth.is_some() || src.labels.is_some() {
        let inputs = EvalInputs {
            lines: src.ground_truth.as_deref().map(|gt| (gt, files.classified.as_path())),
            pixels: src.labels.as_deref().map(|l| (files.field.as_path(), l)),
            eval_mask: None,
        };
        let (e, report) = stages::eval(&inputs, &cfg.evaluation, &files.report_json, Some(&files.report_text), m)?;
        entries.push(e);
        Some(report)
    } else {
        None
    };

    if cfg.render.enabled {
        let map = src.map.as_deref().ok_or_else(|| PipelineError::Config("rendering needs a map".into()))?;
        entries.push(stages::render(map, &files.classified, &files.overlay, cfg.render.line_width_px, m)?);
    }

    let report = PipelineReport {
        vectorized_segments: stats.segments,
        grid_segments_removed: removed,
        classified_segments: assignment.segments.len(),
        sections: assignment.network.len(),
        failed_segments: assignment.failures.len(),
        evaluation,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&files.summary, json + "\n").map_err(PipelineError::file(&files.summary))?;
    Ok(PipelineOutcome { files, report, manifest: entries })
}
