//! Vectorization and classification of road networks from scanned map sheets.

pub mod geom;
pub mod io;
pub mod network;
pub mod raster;
pub mod tiling;
pub mod morphology;
pub mod vectorize;
pub mod painter;
pub mod probability;
pub mod assignment;
pub mod evaluation;
pub mod pipeline;

pub use geom::{BBox, Point, Polyline};
pub use network::{ClassifiedNetwork, ClassifiedSection, NodeId, RoadClass, RoadNetwork, Segment, SectionId, SegmentId};
pub use raster::{BandSemantics, GeoRaster, GeoTransform, ProbabilityField, NO_ROAD_BAND, NUM_PROB_BANDS};
