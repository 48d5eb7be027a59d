use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, ExtendedColorType};

use super::{io_err, IoError};
use crate::raster::{BandSemantics, GeoRaster, GeoTransform};

/// Sidecar world file for an image: `sheet.png` -> `sheet.pgw`.
pub fn world_file_path(image: &Path) -> PathBuf {
    let ext = image.extension().and_then(|e| e.to_str()).unwrap_or("");
    let wext = match ext.to_ascii_lowercase().as_str() {
        "png" => "pgw".to_string(),
        "tif" | "tiff" => "tfw".to_string(),
        "jpg" | "jpeg" => "jgw".to_string(),
        e if e.len() >= 2 => format!("{}{}w", &e[..1], &e[e.len() - 1..]),
        _ => "wld".to_string(),
    };
    image.with_extension(wext)
}

/// Reads an ESRI world file (six lines A, D, B, E, C, F) whose C/F terms
/// locate the center of the top-left pixel.
pub fn read_world_file(path: &Path) -> Result<GeoTransform, IoError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(IoError::MissingWorldFile { path: path.to_path_buf() })
        }
        Err(e) => return Err(io_err(path)(e)),
    };
    let bad = |reason: String| IoError::BadWorldFile { path: path.to_path_buf(), reason };
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    if values.len() != 6 {
        return Err(bad(format!("expected 6 values, found {}", values.len())));
    }
    let [a, d, b, e, c, f] = [values[0], values[1], values[2], values[3], values[4], values[5]];
    if b != 0.0 || d != 0.0 {
        return Err(IoError::RotatedWorldFile { path: path.to_path_buf(), b, d });
    }
    if !(a > 0.0) || e != -a {
        return Err(bad(format!("pixel size terms ({a}, {e}) are not square and north-up")));
    }
    let half = 0.5 * a;
    GeoTransform::new(c - half, f + half, a).map_err(|err| bad(err.to_string()))
}

/// Writes the world file for `t`, shifting the corner origin to the pixel
/// center convention.
pub fn write_world_file(path: &Path, t: &GeoTransform) -> Result<(), IoError> {
    let half = 0.5 * t.pixel_size;
    let c = center_term(t.origin_x, half, |v| v - half);
    let f = center_term(t.origin_y, -half, |v| v + half);
    let mut s = String::new();
    for v in [t.pixel_size, 0.0, 0.0, -t.pixel_size, c, f] {
        writeln!(s, "{v:?}").unwrap();
    }
    fs::write(path, s).map_err(io_err(path))
}

/// Picks the center coordinate whose conversion back to the corner
/// reproduces `corner` bit for bit, when such a neighbor exists.
fn center_term(corner: f64, offset: f64, back: impl Fn(f64) -> f64) -> f64 {
    let guess = corner + offset;
    [guess, guess.next_up(), guess.next_down()]
        .into_iter()
        .find(|&v| back(v) == corner)
        .unwrap_or(guess)
}

/// Writes a PNG plus world file. Binary masks are stored as 0/255.
pub fn write_raster(path: &Path, raster: &GeoRaster<u8>) -> Result<(), IoError> {
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    let (buf, color): (Vec<u8>, ExtendedColorType) = match raster.semantics() {
        BandSemantics::Rgb => {
            let mut buf = Vec::with_capacity(raster.len() * 3);
            for i in 0..raster.len() {
                buf.extend_from_slice(&[raster.band(0)[i], raster.band(1)[i], raster.band(2)[i]]);
            }
            (buf, ExtendedColorType::Rgb8)
        }
        BandSemantics::BinaryMask => (raster.band(0).iter().map(|&v| v * 255).collect(), ExtendedColorType::L8),
        BandSemantics::Gray | BandSemantics::ClassLabel => (raster.band(0).to_vec(), ExtendedColorType::L8),
        BandSemantics::Probability => {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                reason: "probability rasters are stored as .probf".into(),
            })
        }
    };
    image::save_buffer_with_format(path, &buf, w, h, color, image::ImageFormat::Png)
        .map_err(|source| IoError::Image { path: path.to_path_buf(), source })?;
    write_world_file(&world_file_path(path), raster.transform())
}

/// Reads a PNG and its world file as a raster of the declared semantics.
pub fn read_raster(path: &Path, semantics: BandSemantics) -> Result<GeoRaster<u8>, IoError> {
    let transform = read_world_file(&world_file_path(path))?;
    let img = image::ImageReader::open(path)
        .map_err(io_err(path))?
        .decode()
        .map_err(|source| IoError::Image { path: path.to_path_buf(), source })?;
    let channels = match img.color() {
        ColorType::L8 => 1,
        ColorType::Rgb8 => 3,
        other => other.channel_count() as usize,
    };
    let expected = semantics.band_count();
    let supported = matches!(img.color(), ColorType::L8 | ColorType::Rgb8);
    if channels != expected || !supported || semantics == BandSemantics::Probability {
        return Err(IoError::ChannelMismatch {
            path: path.to_path_buf(),
            semantics: format!("{semantics:?}"),
            expected,
            got: channels,
        });
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_bytes();
    let bands = if channels == 3 {
        (0..3).map(|k| raw.iter().skip(k).step_by(3).copied().collect()).collect()
    } else if semantics == BandSemantics::BinaryMask {
        vec![raw.iter().map(|&v| if v == 255 { 1 } else { v }).collect()]
    } else {
        vec![raw]
    };
    GeoRaster::new(w, h, transform, semantics, bands).map_err(|source| IoError::Raster { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_file_center_to_corner() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgw");
        fs::write(&p, "1.25\n0\n0\n-1.25\n600000.625\n199999.375\n").unwrap();
        let t = read_world_file(&p).unwrap();
        assert_eq!((t.origin_x, t.origin_y, t.pixel_size), (600_000.0, 200_000.0, 1.25));
    }

    #[test]
    fn world_file_rejects_rotation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgw");
        fs::write(&p, "1.25\n0.1\n0\n-1.25\n600000.625\n199999.375\n").unwrap();
        assert!(matches!(read_world_file(&p), Err(IoError::RotatedWorldFile { .. })));
    }

    #[test]
    fn missing_world_file() {
        let dir = tempfile::tempdir().unwrap();
        let t = GeoTransform::default();
        let r = GeoRaster::filled(2, 2, t, BandSemantics::Gray, 7u8).unwrap();
        let p = dir.path().join("x.png");
        write_raster(&p, &r).unwrap();
        fs::remove_file(world_file_path(&p)).unwrap();
        assert!(matches!(read_raster(&p, BandSemantics::Gray), Err(IoError::MissingWorldFile { .. })));
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = GeoTransform::new(600_000.0, 200_000.0, 1.25).unwrap();
        let m = GeoRaster::mask_from_fn(4, 4, t, |c, r| (c + r) % 3 == 0).unwrap();
        let p = dir.path().join("m.png");
        write_raster(&p, &m).unwrap();
        assert_eq!(read_raster(&p, BandSemantics::BinaryMask).unwrap(), m);
    }

    #[test]
    fn declared_semantics_must_match_channels() {
        let dir = tempfile::tempdir().unwrap();
        let r = GeoRaster::filled(3, 2, GeoTransform::default(), BandSemantics::Rgb, 9u8).unwrap();
        let p = dir.path().join("c.png");
        write_raster(&p, &r).unwrap();
        assert!(matches!(read_raster(&p, BandSemantics::Gray), Err(IoError::ChannelMismatch { .. })));
        assert_eq!(read_raster(&p, BandSemantics::Rgb).unwrap(), r);
    }

    #[test]
    fn odd_origins_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.pgw");
        for (x, y, ps) in [(0.1, 0.2, 0.3), (612_345.678_9, 187_654.321, 1.25), (-3.3, 7.7, 0.7)] {
            let t = GeoTransform::new(x, y, ps).unwrap();
            write_world_file(&p, &t).unwrap();
            assert_eq!(read_world_file(&p).unwrap(), t);
        }
    }
}
