//! Overlapping tiles for per-tile processing and the inverse stitch.
//!
//! Tile `(row, col)` covers source pixels starting at
//! `col * stride - overlap` (and likewise for rows), where
//! `stride = tile_size - 2 * overlap`. Only the central `stride × stride`
//! window of each tile is kept when stitching. Pixels beyond the sheet
//! edge are filled by mirror reflection.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{read_raster, write_raster, IoError};
use crate::raster::{BandSemantics, GeoRaster, GeoTransform, ProbabilityField, RasterError, Sample};

pub const DEFAULT_TILE_SIZE: usize = 500;
pub const DEFAULT_OVERLAP: usize = 125;

#[derive(Debug, Error)]
pub enum TilingError {
    #[error("tile size {tile_size} must exceed twice the overlap {overlap}")]
    BadGeometry { tile_size: usize, overlap: usize },
    #[error("raster {width}x{height} is smaller than the stride {stride}")]
    TooSmall { width: usize, height: usize, stride: usize },
    #[error("tile ({row}, {col}) is missing")]
    MissingTile { row: usize, col: usize },
    #[error("tile ({row}, {col}) appears more than once or lies outside the grid")]
    UnexpectedTile { row: usize, col: usize },
    #[error("tile ({row}, {col}) is {width}x{height}, expected {tile_size}x{tile_size}")]
    TileSize { row: usize, col: usize, width: usize, height: usize, tile_size: usize },
    #[error("tile ({row}, {col}) has {got:?} bands, grid holds {expected:?}")]
    Semantics { row: usize, col: usize, expected: BandSemantics, got: BandSemantics },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile<T: Sample = u8> {
    pub row: usize,
    pub col: usize,
    pub raster: GeoRaster<T>,
}

/// Layout of a tiled sheet, without pixel data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileLayout {
    pub tile_size: usize,
    pub overlap: usize,
    pub rows: usize,
    pub cols: usize,
    pub source_width: usize,
    pub source_height: usize,
    pub source_transform: GeoTransform,
}

impl TileLayout {
    pub fn new(width: usize, height: usize, transform: GeoTransform, tile_size: usize, overlap: usize) -> Result<Self, TilingError> {
        if tile_size <= 2 * overlap {
            return Err(TilingError::BadGeometry { tile_size, overlap });
        }
        let stride = tile_size - 2 * overlap;
        if width < stride || height < stride {
            return Err(TilingError::TooSmall { width, height, stride });
        }
        Ok(TileLayout {
            tile_size,
            overlap,
            rows: height.div_ceil(stride),
            cols: width.div_ceil(stride),
            source_width: width,
            source_height: height,
            source_transform: transform,
        })
    }

    pub fn stride(&self) -> usize {
        self.tile_size - 2 * self.overlap
    }

    /// Source pixel offset of the tile's top-left pixel (may be negative).
    pub fn tile_origin(&self, row: usize, col: usize) -> (i64, i64) {
        let s = self.stride() as i64;
        let o = self.overlap as i64;
        (col as i64 * s - o, row as i64 * s - o)
    }

    pub fn tile_transform(&self, row: usize, col: usize) -> GeoTransform {
        let (x0, y0) = self.tile_origin(row, col);
        self.source_transform.shifted(x0, y0)
    }
}

/// A sheet cut into overlapping tiles, in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid<T: Sample = u8> {
    pub layout: TileLayout,
    pub semantics: BandSemantics,
    pub tiles: Vec<Tile<T>>,
}

/// Mirror index into `[0, n)`; the edge pixel is repeated.
#[inline]
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

pub fn make_tiles<T: Sample>(raster: &GeoRaster<T>, tile_size: usize, overlap: usize) -> Result<TileGrid<T>, TilingError> {
    let layout = TileLayout::new(raster.width(), raster.height(), *raster.transform(), tile_size, overlap)?;
    let (w, h) = (raster.width(), raster.height());
    let coords: Vec<(usize, usize)> =
        (0..layout.rows).flat_map(|r| (0..layout.cols).map(move |c| (r, c))).collect();
    let tiles = coords
        .into_par_iter()
        .map(|(row, col)| {
            let (x0, y0) = layout.tile_origin(row, col);
            let xs: Vec<usize> = (0..tile_size as i64).map(|dx| reflect(x0 + dx, w)).collect();
            let bands = raster
                .bands()
                .iter()
                .map(|band| {
                    let mut out = Vec::with_capacity(tile_size * tile_size);
                    for dy in 0..tile_size as i64 {
                        let src = &band[reflect(y0 + dy, h) * w..][..w];
                        out.extend(xs.iter().map(|&x| src[x]));
                    }
                    out
                })
                .collect();
            let raster = GeoRaster::from_parts_unchecked(
                tile_size,
                tile_size,
                layout.tile_transform(row, col),
                raster.semantics(),
                bands,
            );
            Tile { row, col, raster }
        })
        .collect();
    Ok(TileGrid { layout, semantics: raster.semantics(), tiles })
}

pub fn stitch_tiles<T: Sample>(grid: &TileGrid<T>) -> Result<GeoRaster<T>, TilingError> {
    let l = &grid.layout;
    let mut slots: Vec<Option<&Tile<T>>> = vec![None; l.rows * l.cols];
    for t in &grid.tiles {
        if t.row >= l.rows || t.col >= l.cols || slots[t.row * l.cols + t.col].is_some() {
            return Err(TilingError::UnexpectedTile { row: t.row, col: t.col });
        }
        if t.raster.width() != l.tile_size || t.raster.height() != l.tile_size {
            return Err(TilingError::TileSize {
                row: t.row,
                col: t.col,
                width: t.raster.width(),
                height: t.raster.height(),
                tile_size: l.tile_size,
            });
        }
        if t.raster.semantics() != grid.semantics {
            return Err(TilingError::Semantics { row: t.row, col: t.col, expected: grid.semantics, got: t.raster.semantics() });
        }
        slots[t.row * l.cols + t.col] = Some(t);
    }
    if let Some(i) = slots.iter().position(Option::is_none) {
        return Err(TilingError::MissingTile { row: i / l.cols, col: i % l.cols });
    }
    let (w, h, s, o) = (l.source_width, l.source_height, l.stride(), l.overlap);
    let nbands = grid.semantics.band_count();
    let mut bands = vec![vec![T::default(); w * h]; nbands];
    for (k, band) in bands.iter_mut().enumerate() {
        for tile in slots.iter().flatten() {
            let x0 = tile.col * s;
            let y0 = tile.row * s;
            let cw = s.min(w - x0);
            let ch = s.min(h - y0);
            let src = tile.raster.band(k);
            for dy in 0..ch {
                let from = (o + dy) * l.tile_size + o;
                let to = (y0 + dy) * w + x0;
                band[to..to + cw].copy_from_slice(&src[from..from + cw]);
            }
        }
    }
    Ok(GeoRaster::new(w, h, l.source_transform, grid.semantics, bands)?)
}

impl<T: Sample> TileGrid<T> {
    /// Applies `f` to every tile (in parallel), keeping the layout.
    pub fn map<U: Sample, E: Send>(
        &self,
        semantics: BandSemantics,
        f: impl Fn(&Tile<T>) -> Result<GeoRaster<U>, E> + Sync,
    ) -> Result<TileGrid<U>, E> {
        let tiles = self
            .tiles
            .par_iter()
            .map(|t| f(t).map(|raster| Tile { row: t.row, col: t.col, raster }))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(TileGrid { layout: self.layout, semantics, tiles })
    }
}

/// Stitches per-tile probability fields back into one sheet-sized field.
pub fn stitch_fields(layout: TileLayout, tiles: Vec<(usize, usize, ProbabilityField)>) -> Result<ProbabilityField, TilingError> {
    let grid = TileGrid {
        layout,
        semantics: BandSemantics::Probability,
        tiles: tiles.into_iter().map(|(row, col, f)| Tile { row, col, raster: f.into_raster() }).collect(),
    };
    let raster = stitch_tiles(&grid)?;
    Ok(ProbabilityField::from_raster_unchecked(raster))
}

/// File name of one tile: `<sheet>_<row>_<col>.png`.
pub fn tile_file_name(sheet: &str, row: usize, col: usize) -> String {
    format!("{sheet}_{row}_{col}.png")
}

fn layout_path(dir: &Path, sheet: &str) -> PathBuf {
    dir.join(format!("{sheet}_tiles.json"))
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    sheet: String,
    semantics: BandSemantics,
    layout: TileLayout,
}

/// Writes every tile as PNG + world file, plus `<sheet>_tiles.json`.
pub fn write_tile_grid(dir: &Path, sheet: &str, grid: &TileGrid<u8>) -> Result<Vec<PathBuf>, TilingError> {
    let mut written = Vec::with_capacity(grid.tiles.len() + 1);
    for t in &grid.tiles {
        let p = dir.join(tile_file_name(sheet, t.row, t.col));
        write_raster(&p, &t.raster)?;
        written.push(p);
    }
    let meta = LayoutFile { sheet: sheet.to_string(), semantics: grid.semantics, layout: grid.layout };
    let p = layout_path(dir, sheet);
    fs::write(&p, serde_json::to_string_pretty(&meta).expect("layout serializes"))
        .map_err(|source| IoError::Io { path: p.clone(), source })?;
    written.push(p);
    Ok(written)
}

/// Reads tiles written by [`write_tile_grid`]; tile files that are absent
/// surface as [`TilingError::MissingTile`] on stitching.
pub fn read_tile_grid(dir: &Path, sheet: &str) -> Result<TileGrid<u8>, TilingError> {
    let p = layout_path(dir, sheet);
    let text = fs::read_to_string(&p).map_err(|source| IoError::Io { path: p.clone(), source })?;
    let meta: LayoutFile = serde_json::from_str(&text)
        .map_err(|e| IoError::Format { path: p.clone(), reason: e.to_string() })?;
    let mut tiles = BTreeMap::new();
    for row in 0..meta.layout.rows {
        for col in 0..meta.layout.cols {
            let tp = dir.join(tile_file_name(sheet, row, col));
            if !tp.exists() {
                continue;
            }
            tiles.insert((row, col), read_raster(&tp, meta.semantics)?);
        }
    }
    Ok(TileGrid {
        layout: meta.layout,
        semantics: meta.semantics,
        tiles: tiles.into_iter().map(|((row, col), raster)| Tile { row, col, raster }).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(w: usize, h: usize, seed: u64) -> GeoRaster<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let band = (0..w * h).map(|_| rng.gen_range(0..2u8)).collect();
        let t = GeoTransform::new(600_000.0, 200_000.0, 1.25).unwrap();
        GeoRaster::new(w, h, t, BandSemantics::BinaryMask, vec![band]).unwrap()
    }

    #[test]
    fn full_sheet_tile_counts() {
        let l = TileLayout::new(7000, 4800, GeoTransform::default(), 500, 125).unwrap();
        assert_eq!((l.cols, l.rows), (28, 20));
    }

    #[test]
    fn single_stride_raster_gives_one_tile() {
        let r = random_mask(250, 250, 1);
        let g = make_tiles(&r, 500, 125).unwrap();
        assert_eq!(g.tiles.len(), 1);
        assert_eq!(stitch_tiles(&g).unwrap(), r);
        // the central window of the padded tile is the source itself
        let t = &g.tiles[0].raster;
        for row in 0..250 {
            assert_eq!(&t.band(0)[(row + 125) * 500 + 125..][..250], &r.band(0)[row * 250..][..250]);
        }
    }

    #[test]
    fn tile_transform_offsets() {
        let r = random_mask(600, 300, 2);
        let g = make_tiles(&r, 500, 125).unwrap();
        let t01 = g.tiles.iter().find(|t| t.row == 0 && t.col == 1).unwrap();
        assert_eq!(t01.raster.transform().origin_x, 600_000.0 + (250.0 - 125.0) * 1.25);
        assert_eq!(t01.raster.transform().origin_y, 200_000.0 + 125.0 * 1.25);
    }

    #[test]
    fn round_trip_1000_by_750() {
        let r = random_mask(1000, 750, 3);
        assert_eq!(stitch_tiles(&make_tiles(&r, 500, 125).unwrap()).unwrap(), r);
    }

    #[test]
    fn overlapping_pixels_share_coordinates() {
        let r = random_mask(600, 300, 4);
        let g = make_tiles(&r, 500, 125).unwrap();
        let a = g.tiles.iter().find(|t| t.row == 0 && t.col == 0).unwrap();
        let b = g.tiles.iter().find(|t| t.row == 0 && t.col == 1).unwrap();
        // tile 0 local column 300 is tile 1 local column 50
        let pa = a.raster.transform().pixel_center(300.0, 10.0);
        let pb = b.raster.transform().pixel_center(50.0, 10.0);
        assert!((pa.x - pb.x).abs() < 1e-9 && (pa.y - pb.y).abs() < 1e-9);
        assert_eq!(a.raster.get(0, 300, 10), b.raster.get(0, 50, 10));
    }

    #[test]
    fn errors() {
        let r = random_mask(100, 300, 5);
        assert!(matches!(make_tiles(&r, 500, 125), Err(TilingError::TooSmall { .. })));
        assert!(matches!(make_tiles(&r, 250, 125), Err(TilingError::BadGeometry { .. })));
        let r = random_mask(600, 300, 6);
        let mut g = make_tiles(&r, 500, 125).unwrap();
        g.tiles.remove(1);
        assert!(matches!(stitch_tiles(&g), Err(TilingError::MissingTile { row: 0, col: 1 })));
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = random_mask(60, 45, 7);
        let g = make_tiles(&r, 40, 10).unwrap();
        write_tile_grid(dir.path(), "sheet", &g).unwrap();
        assert!(dir.path().join("sheet_1_2.png").exists());
        let back = read_tile_grid(dir.path(), "sheet").unwrap();
        assert_eq!(stitch_tiles(&back).unwrap(), r);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn stitch_inverts_tiling(w in 10usize..90, h in 10usize..90, overlap in 0usize..12, seed in 0u64..1000) {
                let r = random_mask(w, h, seed);
                let g = make_tiles(&r, 10 + 2 * overlap, overlap).unwrap();
                prop_assert_eq!(stitch_tiles(&g).unwrap(), r);
            }
        }
    }
}
