//! `.probf`: one line of JSON header, a newline, then the six bands as
//! band-sequential little-endian `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, IoError};
use crate::raster::{GeoRaster, GeoTransform, ProbabilityField, RasterError, NUM_PROB_BANDS};

pub const PROBF_BAND_ORDER: [&str; NUM_PROB_BANDS] = ["class1", "class2", "class3", "class4", "class5", "no_road"];

/// Per-pixel sum tolerance applied when reading.
pub const READ_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbfHeader {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub band_order: Vec<String>,
    pub dtype: String,
    pub layout: String,
    pub transform: GeoTransform,
}

impl ProbfHeader {
    fn for_field(field: &ProbabilityField) -> Self {
        ProbfHeader {
            format: "probf".into(),
            version: 1,
            width: field.width(),
            height: field.height(),
            bands: NUM_PROB_BANDS,
            band_order: PROBF_BAND_ORDER.iter().map(|s| s.to_string()).collect(),
            dtype: "float32-le".into(),
            layout: "band-sequential".into(),
            transform: *field.transform(),
        }
    }
}

pub fn write_probability_field(path: &Path, field: &ProbabilityField) -> Result<(), IoError> {
    let header = serde_json::to_string(&ProbfHeader::for_field(field)).expect("header serializes");
    let mut out = Vec::with_capacity(header.len() + 1 + field.len() * NUM_PROB_BANDS * 4);
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    for k in 0..NUM_PROB_BANDS {
        for v in field.band(k) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&out).map_err(io_err(path))
}

pub fn read_probability_field(path: &Path) -> Result<ProbabilityField, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let fmt = |reason: String| IoError::Format { path: path.to_path_buf(), reason };
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| fmt("missing header line".into()))?;
    let header: ProbfHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| fmt(format!("bad header: {e}")))?;
    if header.format != "probf" {
        return Err(fmt(format!("unexpected format tag {:?}", header.format)));
    }
    if header.bands != NUM_PROB_BANDS || header.band_order.len() != NUM_PROB_BANDS {
        return Err(fmt(format!("expected {NUM_PROB_BANDS} bands, header declares {}", header.bands)));
    }
    if header.band_order.iter().zip(PROBF_BAND_ORDER).any(|(a, b)| a != b) {
        return Err(fmt(format!("unsupported band order {:?}", header.band_order)));
    }
    if header.dtype != "float32-le" || header.layout != "band-sequential" {
        return Err(fmt(format!("unsupported payload {} / {}", header.dtype, header.layout)));
    }
    let n = header.width * header.height;
    let payload = &bytes[nl + 1..];
    if payload.len() != n * NUM_PROB_BANDS * 4 {
        return Err(fmt(format!("payload is {} bytes, expected {}", payload.len(), n * NUM_PROB_BANDS * 4)));
    }
    let bands: Vec<Vec<f32>> = payload
        .chunks_exact(n * 4)
        .map(|band| band.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
        .collect();
    let raster = GeoRaster::new(header.width, header.height, header.transform, crate::raster::BandSemantics::Probability, bands)
        .map_err(|source| IoError::Raster { path: path.to_path_buf(), source })?;
    let field = ProbabilityField::from_raster_unchecked(raster);
    for i in 0..field.len() {
        let sum: f64 = field.pixel(i).iter().map(|&v| v as f64).sum();
        if (sum - 1.0).abs() > READ_SUM_TOLERANCE {
            return Err(IoError::Raster {
                path: path.to_path_buf(),
                source: RasterError::NotNormalized { index: i, col: i % field.width(), row: i / field.width(), sum },
            });
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{band_to_label, BandSemantics};

    #[test]
    fn uniform_field_round_trips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let t = GeoTransform::new(600_000.0, 200_000.0, 1.25).unwrap();
        let f = ProbabilityField::constant(7, 5, t, [1.0 / 6.0; 6]).unwrap();
        let p = dir.path().join("u.probf");
        write_probability_field(&p, &f).unwrap();
        let back = read_probability_field(&p).unwrap();
        for k in 0..6 {
            let a: Vec<u32> = f.band(k).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.band(k).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(back.transform(), f.transform());
    }

    #[test]
    fn bad_sum_names_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let t = GeoTransform::default();
        let f = ProbabilityField::constant(3, 2, t, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = dir.path().join("b.probf");
        write_probability_field(&p, &f).unwrap();
        // pixel 4 (col 1, row 1): no-road band -> 0.9
        let mut bytes = fs::read(&p).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let off = nl + 1 + (5 * 6 + 4) * 4;
        bytes[off..off + 4].copy_from_slice(&0.9f32.to_le_bytes());
        fs::write(&p, bytes).unwrap();
        let err = read_probability_field(&p).unwrap_err();
        assert!(matches!(
            err,
            IoError::Raster { source: RasterError::NotNormalized { index: 4, col: 1, row: 1, .. }, .. }
        ));
    }

    #[test]
    fn band_count_must_be_six() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.probf");
        let f = ProbabilityField::constant(1, 1, GeoTransform::default(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        write_probability_field(&p, &f).unwrap();
        let text = fs::read(&p).unwrap();
        let s = String::from_utf8_lossy(&text).replace("\"bands\":6", "\"bands\":5");
        fs::write(&p, s.as_bytes()).unwrap();
        assert!(matches!(read_probability_field(&p), Err(IoError::Format { .. })));
    }

    #[test]
    fn one_hot_from_labels_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<u8> = (0..48).map(|i| (i * 7 % 6) as u8).collect();
        let lr = GeoRaster::new(8, 6, GeoTransform::default(), BandSemantics::ClassLabel, vec![labels.clone()]).unwrap();
        let f = ProbabilityField::one_hot(&lr).unwrap();
        let p = dir.path().join("h.probf");
        write_probability_field(&p, &f).unwrap();
        let back = read_probability_field(&p).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            assert_eq!(band_to_label(back.argmax(i)), l);
        }
    }
}
