//! File formats: PNG + world file rasters, `.probf` probability fields and
//! GeoJSON line networks.

mod probf;
mod raster;
mod vector;

use std::path::PathBuf;

use thiserror::Error;

use crate::geom::PolylineError;
use crate::network::NetworkError;
use crate::raster::RasterError;

pub use probf::{read_probability_field, write_probability_field, ProbfHeader, PROBF_BAND_ORDER, READ_SUM_TOLERANCE};
pub use raster::{read_raster, read_world_file, world_file_path, write_raster, write_world_file};
pub use vector::{
    read_classified_network, read_line_collection, read_road_network, write_classified_network,
    write_line_collection, write_road_network, LineCollection, LineFeature,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: world file not found")]
    MissingWorldFile { path: PathBuf },
    #[error("{path}: world file has nonzero rotation terms ({b}, {d})")]
    RotatedWorldFile { path: PathBuf, b: f64, d: f64 },
    #[error("{path}: malformed world file: {reason}")]
    BadWorldFile { path: PathBuf, reason: String },
    #[error("{path}: image decode failed: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: image has {got} channel(s) but {semantics} needs {expected}")]
    ChannelMismatch { path: PathBuf, semantics: String, expected: usize, got: usize },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Raster {
        path: PathBuf,
        #[source]
        source: RasterError,
    },
    #[error("{path}: feature {feature}: {reason}")]
    Feature { path: PathBuf, feature: usize, reason: String },
    #[error("{path}: feature {feature}: {source}")]
    Geometry {
        path: PathBuf,
        feature: usize,
        #[source]
        source: PolylineError,
    },
    #[error("{path}: {source}")]
    Network {
        path: PathBuf,
        #[source]
        source: NetworkError,
    },
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}
