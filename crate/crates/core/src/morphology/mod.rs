//! Binary mask refinement: connected components, small-area removal,
//! closing and thinning to a one-pixel skeleton.

mod components;
mod skeleton;

use thiserror::Error;

use crate::raster::{BandSemantics, GeoRaster};

pub use components::{connected_components, remove_small_components, ComponentLabeling, Connectivity};
pub use skeleton::{is_simple, skeletonize};

/// Components smaller than this many pixels are treated as noise.
pub const DEFAULT_MIN_AREA: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum MorphError {
    #[error("mask must have one band, got {0}")]
    BandCount(usize),
    #[error("mask value {value} at pixel {index} is not 0 or 1")]
    NonBinary { index: usize, value: u8 },
}

/// Validates a single band holding only 0/1.
pub(crate) fn binary_band(mask: &GeoRaster<u8>) -> Result<&[u8], MorphError> {
    if mask.bands().len() != 1 {
        return Err(MorphError::BandCount(mask.bands().len()));
    }
    let band = mask.band(0);
    if mask.semantics() != BandSemantics::BinaryMask {
        if let Some(index) = band.iter().position(|&v| v > 1) {
            return Err(MorphError::NonBinary { index, value: band[index] });
        }
    }
    Ok(band)
}

pub(crate) fn mask_like(mask: &GeoRaster<u8>, band: Vec<u8>) -> GeoRaster<u8> {
    GeoRaster::from_parts_unchecked(mask.width(), mask.height(), *mask.transform(), BandSemantics::BinaryMask, vec![band])
}

/// 3×3 dilation followed by 3×3 erosion.
///
/// Pixels outside the raster never constrain either step: dilation treats
/// them as background and erosion ignores them, so the result always
/// contains the input.
pub fn close_mask(mask: &GeoRaster<u8>) -> Result<GeoRaster<u8>, MorphError> {
    let band = binary_band(mask)?;
    let (w, h) = (mask.width(), mask.height());
    let dilated = filter3x3(band, w, h, Window::Max);
    let closed = filter3x3(&dilated, w, h, Window::Min);
    Ok(mask_like(mask, closed))
}

pub fn dilate(mask: &GeoRaster<u8>) -> Result<GeoRaster<u8>, MorphError> {
    let band = binary_band(mask)?;
    Ok(mask_like(mask, filter3x3(band, mask.width(), mask.height(), Window::Max)))
}

pub fn erode(mask: &GeoRaster<u8>) -> Result<GeoRaster<u8>, MorphError> {
    let band = binary_band(mask)?;
    Ok(mask_like(mask, filter3x3(band, mask.width(), mask.height(), Window::Min)))
}

#[derive(Clone, Copy)]
enum Window {
    Max,
    Min,
}

/// Separable 3×3 max/min filter over in-bounds neighbors.
fn filter3x3(band: &[u8], w: usize, h: usize, op: Window) -> Vec<u8> {
    let reduce = |a: u8, b: u8| match op {
        Window::Max => a.max(b),
        Window::Min => a.min(b),
    };
    let mut horiz = vec![0u8; w * h];
    for y in 0..h {
        let row = &band[y * w..][..w];
        for x in 0..w {
            let lo = x.saturating_sub(1);
            let hi = (x + 1).min(w - 1);
            horiz[y * w + x] = row[lo..=hi].iter().copied().reduce(reduce).unwrap();
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(1);
        let hi = (y + 1).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| horiz[yy * w + x]).reduce(reduce).unwrap();
        }
    }
    out
}
