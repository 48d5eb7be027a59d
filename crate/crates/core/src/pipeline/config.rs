use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::assignment::AssignmentParams;
use crate::geom::BBox;
use crate::morphology::DEFAULT_MIN_AREA;
use crate::painter::{RandomNetworkParams, SymbologySpec, DEFAULT_LABEL_WIDTH};
use crate::probability::BaselineParams;
use crate::tiling::{DEFAULT_OVERLAP, DEFAULT_TILE_SIZE};
use crate::vectorize::{GridSpec, DEFAULT_EPSILON, DEFAULT_GRID_BUFFER, DEFAULT_JUNCTION_OFFSET, DEFAULT_NET_TOLERANCE};

/// Where the map, road mask and ground truth come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Generate a random network and paint it; the road region stands in
    /// for a segmentation model.
    Synthetic,
    /// Read the map, road mask and optional probabilities from `[io]`.
    Files,
}

/// Origin of the probability field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilitySource {
    /// Template-matching classifier on the map.
    Baseline,
    /// One-hot labels with random label flips (synthetic mode only).
    Oracle,
    /// The `.probf` ensemble members listed in `io.probabilities`.
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Master seed; every random step derives its seed from it.
    pub seed: u64,
    pub io: IoConfig,
    pub synthetic: SyntheticConfig,
    pub probabilities: ProbabilityConfig,
    pub tiling: TilingConfig,
    pub morphology: MorphologyConfig,
    pub vectorize: VectorizeConfig,
    pub grid: GridConfig,
    pub symbology: SymbologySpec,
    pub baseline: BaselineParams,
    pub assignment: AssignmentParams,
    pub evaluation: EvaluationConfig,
    pub render: RenderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Synthetic,
            seed: 42,
            io: IoConfig::default(),
            synthetic: SyntheticConfig::default(),
            probabilities: ProbabilityConfig::default(),
            tiling: TilingConfig::default(),
            morphology: MorphologyConfig::default(),
            vectorize: VectorizeConfig::default(),
            grid: GridConfig::default(),
            symbology: SymbologySpec::default(),
            baseline: BaselineParams::default(),
            assignment: AssignmentParams::default(),
            evaluation: EvaluationConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub output_dir: PathBuf,
    /// Sheet name used in tile file names.
    pub sheet: String,
    /// Map raster (PNG + world file), files mode.
    pub map: Option<PathBuf>,
    /// Binary road mask on the map grid, files mode.
    pub segmentation: Option<PathBuf>,
    /// Ensemble members when `probabilities.source = "files"`.
    pub probabilities: Vec<PathBuf>,
    /// Classified GeoJSON to evaluate against, files mode.
    pub ground_truth: Option<PathBuf>,
    /// Class-label raster for pixel metrics, files mode.
    pub labels: Option<PathBuf>,
    pub crs_epsg: Option<u32>,
    /// Write one profile CSV per segment.
    pub profiles: bool,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            sheet: "sheet".into(),
            map: None,
            segmentation: None,
            probabilities: Vec::new(),
            ground_truth: None,
            labels: None,
            crs_epsg: Some(2056),
            profiles: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    /// Map coordinates of the top-left raster corner.
    pub origin_x: f64,
    pub origin_y: f64,
    pub label_width: f64,
    /// Draw the coordinate grid of `[grid]` onto the map and the road mask.
    pub draw_grid: bool,
    pub network: RandomNetworkParams,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            width: 2000,
            height: 2000,
            pixel_size: 1.25,
            origin_x: 600_000.0,
            origin_y: 202_500.0,
            label_width: DEFAULT_LABEL_WIDTH,
            draw_grid: true,
            network: RandomNetworkParams { roads: 30, min_axis_angle_deg: 5.0, ..RandomNetworkParams::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbabilityConfig {
    pub source: ProbabilitySource,
    /// Label flip rate of oracle members.
    pub flip_rate: f64,
    /// Number of oracle members to average.
    pub oracle_members: usize,
}

impl Default for ProbabilityConfig {
    fn default() -> Self {
        Self { source: ProbabilitySource::Baseline, flip_rate: 0.05, oracle_members: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilingConfig {
    pub tile_size: usize,
    pub overlap: usize,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self { tile_size: DEFAULT_TILE_SIZE, overlap: DEFAULT_OVERLAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorphologyConfig {
    pub min_area: usize,
}

impl Default for MorphologyConfig {
    fn default() -> Self {
        Self { min_area: DEFAULT_MIN_AREA }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VectorizeConfig {
    /// Douglas–Peucker tolerance, meters.
    pub epsilon: f64,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub enabled: bool,
    /// Grid line spacing, meters; lines sit at its multiples.
    pub spacing: f64,
    /// Explicit grid coordinates; when both are empty, `spacing` is used.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub buffer: f64,
    pub net_tolerance: f64,
    pub junction_offset: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            spacing: 1000.0,
            xs: Vec::new(),
            ys: Vec::new(),
            buffer: DEFAULT_GRID_BUFFER,
            net_tolerance: DEFAULT_NET_TOLERANCE,
            junction_offset: DEFAULT_JUNCTION_OFFSET,
        }
    }
}

impl GridConfig {
    /// Grid lines within `extent`, or `None` when filtering is off or no
    /// line falls inside.
    pub fn spec(&self, extent: &BBox) -> Result<Option<GridSpec>, PipelineError> {
        if !self.enabled {
            return Ok(None);
        }
        let spec = if self.xs.is_empty() && self.ys.is_empty() {
            let has_line = |lo: f64, hi: f64| (lo / self.spacing).ceil() <= (hi / self.spacing).floor();
            if !has_line(extent.min_x, extent.max_x) && !has_line(extent.min_y, extent.max_y) {
                return Ok(None);
            }
            GridSpec::regular(extent, self.spacing, self.buffer, self.net_tolerance)
                .map_err(|e| PipelineError::Config(e.to_string()))?
        } else {
            GridSpec::new(self.xs.clone(), self.ys.clone(), self.buffer, self.net_tolerance)
                .map_err(|e| PipelineError::Config(e.to_string()))?
        };
        let spec = spec.with_junction_offset(self.junction_offset).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Some(spec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Buffer radius for completeness and correctness, meters.
    pub buffer: f64,
    pub exclude_no_road: bool,
    pub macro_iou: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { buffer: crate::evaluation::DEFAULT_BUFFER, exclude_no_road: false, macro_iou: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Draw an overlay of the classified sections at the end of a run.
    pub enabled: bool,
    /// Width of drawn sections, pixels.
    pub line_width_px: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { enabled: false, line_width_px: 3.0 }
    }
}

fn positive(name: &str, v: f64) -> Result<(), PipelineError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every parameter before any stage runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg = |e: &dyn std::fmt::Display| PipelineError::Config(e.to_string());
        let t = &self.tiling;
        if t.tile_size <= 2 * t.overlap {
            return Err(PipelineError::Config(format!(
                "tile_size {} must exceed twice the overlap {}",
                t.tile_size, t.overlap
            )));
        }
        if !(self.vectorize.epsilon >= 0.0 && self.vectorize.epsilon.is_finite()) {
            return Err(PipelineError::Config(format!("epsilon must be non-negative, got {}", self.vectorize.epsilon)));
        }
        if self.grid.enabled {
            positive("grid.buffer", self.grid.buffer)?;
            if !(self.grid.net_tolerance >= 0.0) {
                return Err(PipelineError::Config("grid.net_tolerance must be non-negative".into()));
            }
            if !(self.grid.junction_offset >= 0.0 && self.grid.junction_offset.is_finite()) {
                return Err(PipelineError::Config("grid.junction_offset must be non-negative".into()));
            }
            if self.grid.xs.is_empty() && self.grid.ys.is_empty() {
                positive("grid.spacing", self.grid.spacing)?;
            } else {
                GridSpec::new(self.grid.xs.clone(), self.grid.ys.clone(), self.grid.buffer, self.grid.net_tolerance)
                    .map_err(|e| cfg(&e))?;
            }
        }
        self.symbology.validate().map_err(|e| cfg(&e))?;
        self.baseline.validate().map_err(|e| cfg(&e))?;
        self.assignment.validate().map_err(|e| cfg(&e))?;
        positive("evaluation.buffer", self.evaluation.buffer)?;
        positive("render.line_width_px", self.render.line_width_px)?;
        let p = &self.probabilities;
        if !(0.0..=1.0).contains(&p.flip_rate) {
            return Err(PipelineError::Config(format!("flip_rate {} outside [0, 1]", p.flip_rate)));
        }
        match self.mode {
            Mode::Synthetic => {
                let s = &self.synthetic;
                if s.width == 0 || s.height == 0 {
                    return Err(PipelineError::Config("synthetic raster size must be positive".into()));
                }
                positive("synthetic.pixel_size", s.pixel_size)?;
                positive("synthetic.label_width", s.label_width)?;
                if !(s.origin_x.is_finite() && s.origin_y.is_finite()) {
                    return Err(PipelineError::Config("synthetic origin must be finite".into()));
                }
                if s.width.min(s.height) < t.tile_size - 2 * t.overlap {
                    return Err(PipelineError::Config("synthetic raster is smaller than one tile stride".into()));
                }
                if p.source == ProbabilitySource::Files && self.io.probabilities.is_empty() {
                    return Err(PipelineError::Config("probabilities.source = \"files\" needs io.probabilities".into()));
                }
                if p.source == ProbabilitySource::Oracle && p.oracle_members == 0 {
                    return Err(PipelineError::Config("oracle_members must be at least 1".into()));
                }
            }
            Mode::Files => {
                if self.io.segmentation.is_none() {
                    return Err(PipelineError::Config("files mode needs io.segmentation".into()));
                }
                match p.source {
                    ProbabilitySource::Baseline if self.io.map.is_none() => {
                        return Err(PipelineError::Config("baseline probabilities need io.map".into()));
                    }
                    ProbabilitySource::Files if self.io.probabilities.is_empty() => {
                        return Err(PipelineError::Config("probabilities.source = \"files\" needs io.probabilities".into()));
                    }
                    ProbabilitySource::Oracle => {
                        return Err(PipelineError::Config("oracle probabilities need synthetic mode".into()));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
