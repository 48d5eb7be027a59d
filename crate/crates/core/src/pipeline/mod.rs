//! File-based processing stages, the end-to-end pipeline, parameter sweeps
//! and overlay rendering, all recording a JSON-lines manifest.

mod config;
mod manifest;
mod render;
mod run;
pub mod stages;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    EvaluationConfig, GridConfig, IoConfig, Mode, MorphologyConfig, PipelineConfig, ProbabilityConfig, ProbabilitySource,
    RenderConfig, SyntheticConfig, TilingConfig, VectorizeConfig,
};
pub use manifest::{file_hash, read_manifest, ManifestEntry, Recorder};
pub use render::{render_overlay, CLASS_COLORS};
pub use run::{run_pipeline, PipelineOutcome, PipelineReport, RunFiles, MANIFEST_FILE};
pub use stages::{EvalInputs, EvaluationReport, PaintInputs};
pub use sweep::{parse_sweep_spec, run_sweep, sweep_cells, SweepCell, SweepGrid, SweepRow, SWEEP_FILE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing input {0}")]
    MissingInput(PathBuf),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Tiling(#[from] crate::tiling::TilingError),
    #[error(transparent)]
    Morphology(#[from] crate::morphology::MorphError),
    #[error(transparent)]
    Vectorize(#[from] crate::vectorize::VectorizeError),
    #[error(transparent)]
    Painter(#[from] crate::painter::PainterError),
    #[error(transparent)]
    Probability(#[from] crate::probability::ProbabilityError),
    #[error(transparent)]
    Assignment(#[from] crate::assignment::AssignmentError),
    #[error(transparent)]
    Evaluation(#[from] crate::evaluation::EvaluationError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl PipelineError {
    /// Whether the error comes from configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }

    pub(crate) fn file(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
        let path = path.into();
        move |source| PipelineError::File { path, source }
    }
}
