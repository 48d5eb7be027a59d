//! Conditioning of probability fields: ensemble averaging, hard masking
//! around the road region, and a template-matching baseline classifier.

mod baseline;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::raster::{BandSemantics, GeoRaster, ProbabilityField, RasterError, NO_ROAD_BAND, NUM_CLASSES, NUM_PROB_BANDS, PROB_SUM_TOLERANCE};

pub use baseline::{baseline_classifier, BaselineParams, DEFAULT_TEMPERATURE};

#[derive(Debug, Error)]
pub enum ProbabilityError {
    #[error("an ensemble needs at least one member")]
    EmptyEnsemble,
    #[error("member {member} is {width}x{height} with a different transform, expected {expected_width}x{expected_height}")]
    GridMismatch { member: usize, width: usize, height: usize, expected_width: usize, expected_height: usize },
    #[error("region must be a binary mask on the field's grid")]
    Region,
    #[error("map must be an RGB or gray raster")]
    MapSemantics,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Per-pixel, per-band mean of the members.
///
/// Sums are re-normalized only where rounding drifted them by more than the
/// field tolerance.
pub fn ensemble_average(members: &[ProbabilityField]) -> Result<ProbabilityField, ProbabilityError> {
    let first = members.first().ok_or(ProbabilityError::EmptyEnsemble)?;
    for (k, m) in members.iter().enumerate() {
        if !m.raster().same_grid(first.raster()) {
            return Err(ProbabilityError::GridMismatch {
                member: k,
                width: m.width(),
                height: m.height(),
                expected_width: first.width(),
                expected_height: first.height(),
            });
        }
    }
    if members.len() == 1 {
        return Ok(first.clone());
    }
    let n = first.len();
    let scale = 1.0 / members.len() as f64;
    let mut sums = vec![vec![0f64; n]; NUM_PROB_BANDS];
    for m in members {
        for (acc, band) in sums.iter_mut().zip(m.raster().bands()) {
            for (a, &v) in acc.iter_mut().zip(band) {
                *a += v as f64;
            }
        }
    }
    let mut bands: Vec<Vec<f32>> = sums.iter().map(|b| b.iter().map(|&s| (s * scale) as f32).collect()).collect();
    for i in 0..n {
        let total: f64 = bands.iter().map(|b| b[i] as f64).sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            for b in bands.iter_mut() {
                b[i] = (b[i] as f64 / total) as f32;
            }
        }
    }
    Ok(ProbabilityField::new(first.width(), first.height(), *first.transform(), bands)?)
}

/// Forces no-road outside the road region; inside, drops the no-road band
/// and rescales the class bands to sum to one (uniform if they were all 0).
pub fn apply_hard_mask(field: &ProbabilityField, region: &GeoRaster<u8>) -> Result<ProbabilityField, ProbabilityError> {
    if !region.same_grid(field.raster()) || region.bands().len() != 1 || region.band(0).iter().any(|&v| v > 1) {
        return Err(ProbabilityError::Region);
    }
    let n = field.len();
    let mut bands = vec![vec![0f32; n]; NUM_PROB_BANDS];
    let inside = region.band(0);
    for i in 0..n {
        if inside[i] == 0 {
            bands[NO_ROAD_BAND][i] = 1.0;
            continue;
        }
        let total: f64 = (0..NUM_CLASSES).map(|k| field.band(k)[i] as f64).sum();
        for (k, band) in bands.iter_mut().enumerate().take(NUM_CLASSES) {
            band[i] = if total > 0.0 { (field.band(k)[i] as f64 / total) as f32 } else { 1.0 / NUM_CLASSES as f32 };
        }
    }
    Ok(ProbabilityField::new(field.width(), field.height(), *field.transform(), bands)?)
}

/// Replaces each label, with probability `rate`, by a different label drawn
/// uniformly from the other five values.
pub fn flip_labels(labels: &GeoRaster<u8>, rate: f64, seed: u64) -> Result<GeoRaster<u8>, ProbabilityError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(ProbabilityError::Parameter(format!("flip rate {rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band: Vec<u8> = labels
        .band(0)
        .iter()
        .map(|&l| {
            if rng.gen_bool(rate) {
                let other = rng.gen_range(0..NUM_CLASSES as u8);
                if other >= l { other + 1 } else { other }
            } else {
                l
            }
        })
        .collect();
    Ok(labels.with_bands(BandSemantics::ClassLabel, vec![band])?)
}
