//! Georeferenced rasters: sheets, masks, label rasters and probability fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{capsule_clip, point_segment_distance, BBox, Point, Polyline};

/// Default ground resolution of a scanned sheet, meters per pixel.
pub const DEFAULT_PIXEL_SIZE: f64 = 1.25;

/// Number of road classes.
pub const NUM_CLASSES: usize = 5;
/// Bands of a probability field: five classes followed by no-road.
pub const NUM_PROB_BANDS: usize = NUM_CLASSES + 1;
/// Index of the no-road band in a probability field.
pub const NO_ROAD_BAND: usize = NUM_CLASSES;

/// Per-pixel band-sum tolerance for a constructed probability field.
pub const PROB_SUM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("band {band} has {got} values, expected {expected}")]
    BandSize { band: usize, got: usize, expected: usize },
    #[error("{semantics:?} rasters need {expected} band(s), got {got}")]
    BandCount { semantics: BandSemantics, expected: usize, got: usize },
    #[error("pixel size must be positive and finite, got {0}")]
    PixelSize(f64),
    #[error("value {value} at pixel {index} is not valid for {semantics:?}")]
    InvalidValue { semantics: BandSemantics, index: usize, value: f64 },
    #[error("probability bands at pixel {index} (col {col}, row {row}) sum to {sum}")]
    NotNormalized { index: usize, col: usize, row: usize, sum: f64 },
    #[error("{0:?} semantics is not valid for this sample type")]
    SemanticsForType(BandSemantics),
    #[error("raster grids differ: {0}")]
    GridMismatch(String),
}

/// Axis-aligned, north-up transform. The origin is the top-left corner of
/// the top-left pixel; rows grow southwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
}

impl Default for GeoTransform {
    fn default() -> Self {
        Self { origin_x: 0.0, origin_y: 0.0, pixel_size: DEFAULT_PIXEL_SIZE }
    }
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_size: f64) -> Result<Self, RasterError> {
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(RasterError::PixelSize(pixel_size));
        }
        Ok(Self { origin_x, origin_y, pixel_size })
    }

    /// Map coordinates of the center of pixel (`col`, `row`).
    pub fn pixel_center(&self, col: f64, row: f64) -> Point {
        Point::new(
            self.origin_x + (col + 0.5) * self.pixel_size,
            self.origin_y - (row + 0.5) * self.pixel_size,
        )
    }

    /// Pixel containing `p`, possibly outside the raster.
    pub fn pixel_of(&self, p: Point) -> (i64, i64) {
        let (c, r) = self.fractional_pixel(p);
        (c.floor() as i64, r.floor() as i64)
    }

    /// Continuous pixel coordinates where (0, 0) is the top-left corner.
    pub fn fractional_pixel(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.origin_x) / self.pixel_size,
            (self.origin_y - p.y) / self.pixel_size,
        )
    }

    /// Transform of a window whose top-left pixel is (`col`, `row`) here.
    pub fn shifted(&self, col: i64, row: i64) -> GeoTransform {
        GeoTransform {
            origin_x: self.origin_x + col as f64 * self.pixel_size,
            origin_y: self.origin_y - row as f64 * self.pixel_size,
            pixel_size: self.pixel_size,
        }
    }

    pub fn extent(&self, width: usize, height: usize) -> BBox {
        BBox {
            min_x: self.origin_x,
            max_x: self.origin_x + width as f64 * self.pixel_size,
            min_y: self.origin_y - height as f64 * self.pixel_size,
            max_y: self.origin_y,
        }
    }

    /// Inclusive pixel window covering `bbox`, clipped to the raster.
    pub fn window(&self, bbox: &BBox, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let (c0, r0) = self.fractional_pixel(Point::new(bbox.min_x, bbox.max_y));
        let (c1, r1) = self.fractional_pixel(Point::new(bbox.max_x, bbox.min_y));
        let c0 = (c0 - 0.5).floor().max(0.0);
        let r0 = (r0 - 0.5).floor().max(0.0);
        let c1 = (c1 - 0.5).ceil().min(width as f64 - 1.0);
        let r1 = (r1 - 0.5).ceil().min(height as f64 - 1.0);
        (c0 <= c1 && r0 <= r1).then_some((c0 as usize, r0 as usize, c1 as usize, r1 as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandSemantics {
    Gray,
    Rgb,
    BinaryMask,
    ClassLabel,
    Probability,
}

impl BandSemantics {
    pub fn band_count(self) -> usize {
        match self {
            BandSemantics::Gray | BandSemantics::BinaryMask | BandSemantics::ClassLabel => 1,
            BandSemantics::Rgb => 3,
            BandSemantics::Probability => NUM_PROB_BANDS,
        }
    }
}

/// Pixel value types a [`GeoRaster`] can hold.
pub trait Sample: Copy + Default + PartialEq + Send + Sync + std::fmt::Debug + 'static {
    fn check(semantics: BandSemantics, band: &[Self]) -> Result<(), RasterError>;
}

impl Sample for u8 {
    fn check(semantics: BandSemantics, band: &[u8]) -> Result<(), RasterError> {
        let max = match semantics {
            BandSemantics::Gray | BandSemantics::Rgb => return Ok(()),
            BandSemantics::BinaryMask => 1,
            BandSemantics::ClassLabel => NUM_CLASSES as u8,
            BandSemantics::Probability => return Err(RasterError::SemanticsForType(semantics)),
        };
        match band.iter().position(|&v| v > max) {
            Some(index) => Err(RasterError::InvalidValue { semantics, index, value: band[index] as f64 }),
            None => Ok(()),
        }
    }
}

impl Sample for f32 {
    fn check(semantics: BandSemantics, band: &[f32]) -> Result<(), RasterError> {
        if semantics != BandSemantics::Probability {
            return Err(RasterError::SemanticsForType(semantics));
        }
        match band.iter().position(|v| !(0.0..=1.0).contains(v)) {
            Some(index) => Err(RasterError::InvalidValue { semantics, index, value: band[index] as f64 }),
            None => Ok(()),
        }
    }
}

/// A georeferenced stack of equally sized bands.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRaster<T: Sample = u8> {
    width: usize,
    height: usize,
    transform: GeoTransform,
    semantics: BandSemantics,
    bands: Vec<Vec<T>>,
}

impl<T: Sample> GeoRaster<T> {
    pub fn new(
        width: usize,
        height: usize,
        transform: GeoTransform,
        semantics: BandSemantics,
        bands: Vec<Vec<T>>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        GeoTransform::new(transform.origin_x, transform.origin_y, transform.pixel_size)?;
        if bands.len() != semantics.band_count() {
            return Err(RasterError::BandCount { semantics, expected: semantics.band_count(), got: bands.len() });
        }
        for (i, b) in bands.iter().enumerate() {
            if b.len() != width * height {
                return Err(RasterError::BandSize { band: i, got: b.len(), expected: width * height });
            }
            T::check(semantics, b)?;
        }
        Ok(Self { width, height, transform, semantics, bands })
    }

    /// Raster with every band filled with `value`.
    pub fn filled(
        width: usize,
        height: usize,
        transform: GeoTransform,
        semantics: BandSemantics,
        value: T,
    ) -> Result<Self, RasterError> {
        let bands = vec![vec![value; width * height]; semantics.band_count()];
        Self::new(width, height, transform, semantics, bands)
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        transform: GeoTransform,
        semantics: BandSemantics,
        bands: Vec<Vec<T>>,
    ) -> Self {
        debug_assert_eq!(bands.len(), semantics.band_count());
        debug_assert!(bands.iter().all(|b| b.len() == width * height));
        Self { width, height, transform, semantics, bands }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn semantics(&self) -> BandSemantics {
        self.semantics
    }

    pub fn bands(&self) -> &[Vec<T>] {
        &self.bands
    }

    pub fn band(&self, i: usize) -> &[T] {
        &self.bands[i]
    }

    pub fn into_bands(self) -> Vec<Vec<T>> {
        self.bands
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, band: usize, col: usize, row: usize) -> T {
        self.bands[band][row * self.width + col]
    }

    pub fn same_grid<U: Sample>(&self, other: &GeoRaster<U>) -> bool {
        self.width == other.width && self.height == other.height && self.transform == other.transform
    }

    pub fn ensure_same_grid<U: Sample>(&self, other: &GeoRaster<U>) -> Result<(), RasterError> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(RasterError::GridMismatch(format!(
                "{}x{} @ {:?} vs {}x{} @ {:?}",
                self.width, self.height, self.transform, other.width, other.height, other.transform
            )))
        }
    }

    /// Same grid, new contents.
    pub fn with_bands<U: Sample>(&self, semantics: BandSemantics, bands: Vec<Vec<U>>) -> Result<GeoRaster<U>, RasterError> {
        GeoRaster::new(self.width, self.height, self.transform, semantics, bands)
    }

    pub fn extent(&self) -> BBox {
        self.transform.extent(self.width, self.height)
    }
}

impl GeoRaster<u8> {
    /// Binary mask from a closure over (col, row).
    pub fn mask_from_fn(
        width: usize,
        height: usize,
        transform: GeoTransform,
        f: impl Fn(usize, usize) -> bool,
    ) -> Result<Self, RasterError> {
        let mut band = vec![0u8; width * height];
        for row in 0..height {
            for col in 0..width {
                band[row * width + col] = f(col, row) as u8;
            }
        }
        Self::new(width, height, transform, BandSemantics::BinaryMask, vec![band])
    }

    /// Luminance plane (0..255) of a gray or RGB raster.
    pub fn luminance(&self) -> Vec<f32> {
        match self.semantics {
            BandSemantics::Rgb => {
                let (r, g, b) = (&self.bands[0], &self.bands[1], &self.bands[2]);
                (0..self.len())
                    .map(|i| 0.299 * r[i] as f32 + 0.587 * g[i] as f32 + 0.114 * b[i] as f32)
                    .collect()
            }
            _ => self.bands[0].iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn count_nonzero(&self) -> usize {
        self.bands[0].iter().filter(|&&v| v != 0).count()
    }
}

/// Per-pixel categorical distribution over road classes 1..5 and no-road.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField(GeoRaster<f32>);

impl ProbabilityField {
    /// Validates values in [0, 1] and per-pixel sums within [`PROB_SUM_TOLERANCE`].
    pub fn new(width: usize, height: usize, transform: GeoTransform, bands: Vec<Vec<f32>>) -> Result<Self, RasterError> {
        Self::with_tolerance(width, height, transform, bands, PROB_SUM_TOLERANCE)
    }

    pub(crate) fn with_tolerance(
        width: usize,
        height: usize,
        transform: GeoTransform,
        bands: Vec<Vec<f32>>,
        tolerance: f64,
    ) -> Result<Self, RasterError> {
        let raster = GeoRaster::new(width, height, transform, BandSemantics::Probability, bands)?;
        let field = ProbabilityField(raster);
        field.check_sums(tolerance)?;
        Ok(field)
    }

    pub(crate) fn from_raster_unchecked(raster: GeoRaster<f32>) -> Self {
        ProbabilityField(raster)
    }

    fn check_sums(&self, tolerance: f64) -> Result<(), RasterError> {
        for i in 0..self.0.len() {
            let sum: f64 = self.0.bands.iter().map(|b| b[i] as f64).sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(RasterError::NotNormalized {
                    index: i,
                    col: i % self.0.width,
                    row: i / self.0.width,
                    sum,
                });
            }
        }
        Ok(())
    }

    /// Every pixel set to the same distribution.
    pub fn constant(width: usize, height: usize, transform: GeoTransform, probs: [f32; NUM_PROB_BANDS]) -> Result<Self, RasterError> {
        let bands = probs.iter().map(|&p| vec![p; width * height]).collect();
        Self::new(width, height, transform, bands)
    }

    /// One-hot field from a class-label raster (0 = no-road).
    pub fn one_hot(labels: &GeoRaster<u8>) -> Result<Self, RasterError> {
        if labels.semantics() != BandSemantics::ClassLabel {
            return Err(RasterError::BandCount {
                semantics: BandSemantics::ClassLabel,
                expected: 1,
                got: labels.bands().len(),
            });
        }
        let n = labels.len();
        let mut bands = vec![vec![0f32; n]; NUM_PROB_BANDS];
        for (i, &l) in labels.band(0).iter().enumerate() {
            bands[label_to_band(l)][i] = 1.0;
        }
        Ok(ProbabilityField(GeoRaster::from_parts_unchecked(
            labels.width(),
            labels.height(),
            *labels.transform(),
            BandSemantics::Probability,
            bands,
        )))
    }

    pub fn raster(&self) -> &GeoRaster<f32> {
        &self.0
    }

    pub fn into_raster(self) -> GeoRaster<f32> {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.0.transform
    }

    pub fn band(&self, k: usize) -> &[f32] {
        &self.0.bands[k]
    }

    pub fn pixel(&self, index: usize) -> [f32; NUM_PROB_BANDS] {
        std::array::from_fn(|k| self.0.bands[k][index])
    }

    /// Band index with the highest probability; ties go to the lower index.
    pub fn argmax(&self, index: usize) -> usize {
        argmax(&self.pixel(index))
    }
}

/// Index of the maximum; ties resolve toward the lower index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Label value (0 = no-road, 1..5 classes) to probability band index.
#[inline]
pub fn label_to_band(label: u8) -> usize {
    if label == 0 {
        NO_ROAD_BAND
    } else {
        label as usize - 1
    }
}

/// Probability band index to label value.
#[inline]
pub fn band_to_label(band: usize) -> u8 {
    if band == NO_ROAD_BAND {
        0
    } else {
        band as u8 + 1
    }
}

/// Indices of the pixels whose centers lie within `radius` of `line`,
/// sorted and without duplicates.
pub fn pixels_near(transform: &GeoTransform, width: usize, height: usize, line: &Polyline, radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for (a, b) in line.edges() {
        let bbox = BBox::from_points(&[a, b]).expand(radius);
        let Some((c0, r0, c1, r1)) = transform.window(&bbox, width, height) else { continue };
        let x0 = transform.pixel_center(c0 as f64, 0.0).x;
        let x1 = transform.pixel_center(c1 as f64, 0.0).x;
        let n = c1 - c0;
        for row in r0..=r1 {
            let y = transform.pixel_center(0.0, row as f64).y;
            let base = row * width + c0;
            let inside = |k: usize| point_segment_distance(transform.pixel_center((c0 + k) as f64, row as f64), a, b) <= radius;
            if n == 0 {
                if inside(0) {
                    out.push(base);
                }
                continue;
            }
            let Some((t0, t1)) = capsule_clip(Point::new(x0, y), Point::new(x1, y), a, b, radius) else { continue };
            let k0 = ((t0 * n as f64).ceil() as usize).saturating_sub(1);
            let k1 = ((t1 * n as f64).floor() as usize + 1).min(n);
            for k in k0..=k1 {
                // the clip is exact up to rounding, so only its ends are rechecked
                if (k > k0 + 1 && k + 1 < k1) || inside(k) {
                    out.push(base + k);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixels_near_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let t = GeoTransform::new(100.0, 300.0, 1.25).unwrap();
        let (w, h) = (90, 70);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let pts: Vec<Point> = (0..rng.gen_range(2..5))
                .map(|_| Point::new(rng.gen_range(80.0..230.0), rng.gen_range(200.0..320.0)))
                .collect();
            let line = Polyline::from_points_dedup(pts).unwrap();
            let r = rng.gen_range(0.3..9.0);
            let expected: Vec<usize> = (0..w * h)
                .filter(|&i| line.distance_to(t.pixel_center((i % w) as f64, (i / w) as f64)) <= r)
                .collect();
            assert_eq!(pixels_near(&t, w, h, &line, r), expected);
        }
    }

    #[test]
    fn pixel_center_uses_corner_origin() {
        let t = GeoTransform::new(600_000.0, 200_000.0, 1.25).unwrap();
        assert_eq!(t.pixel_center(0.0, 0.0), Point::new(600_000.625, 199_999.375));
        assert_eq!(t.pixel_of(Point::new(600_000.625, 199_999.375)), (0, 0));
    }

    #[test]
    fn mask_rejects_non_binary_values() {
        let t = GeoTransform::default();
        let err = GeoRaster::new(2, 1, t, BandSemantics::BinaryMask, vec![vec![0u8, 2]]).unwrap_err();
        assert!(matches!(err, RasterError::InvalidValue { index: 1, .. }));
    }

    #[test]
    fn label_raster_accepts_zero_to_five() {
        let t = GeoTransform::default();
        assert!(GeoRaster::new(6, 1, t, BandSemantics::ClassLabel, vec![vec![0u8, 1, 2, 3, 4, 5]]).is_ok());
        assert!(GeoRaster::new(1, 1, t, BandSemantics::ClassLabel, vec![vec![6u8]]).is_err());
    }

    #[test]
    fn probability_sum_is_validated() {
        let t = GeoTransform::default();
        let mut bands = vec![vec![0.0f32; 2]; 6];
        bands[5] = vec![1.0, 0.9];
        let err = ProbabilityField::new(2, 1, t, bands).unwrap_err();
        assert!(matches!(err, RasterError::NotNormalized { index: 1, .. }));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.2f32; 5]), 0);
    }

    #[test]
    fn one_hot_argmax_recovers_labels() {
        let t = GeoTransform::default();
        let labels = GeoRaster::new(6, 1, t, BandSemantics::ClassLabel, vec![vec![0u8, 1, 2, 3, 4, 5]]).unwrap();
        let f = ProbabilityField::one_hot(&labels).unwrap();
        for i in 0..6 {
            assert_eq!(band_to_label(f.argmax(i)), labels.band(0)[i]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn center_snapping_is_bounded(x in -1e5f64..1e5, y in -1e5f64..1e5, ps in 0.1f64..10.0) {
                let t = GeoTransform::new(-2e5, 2e5, ps).unwrap();
                let p = Point::new(x, y);
                let (c, r) = t.pixel_of(p);
                let q = t.pixel_center(c as f64, r as f64);
                prop_assert!(p.distance(q) <= ps / 2f64.sqrt() + 1e-9);
            }
        }
    }
}
