use crate::network::ClassifiedNetwork;
use crate::raster::{pixels_near, BandSemantics, GeoRaster, RasterError, NUM_CLASSES};

/// Section colors of classes 1..5: blue, green, purple, orange, red.
pub const CLASS_COLORS: [[u8; 3]; NUM_CLASSES] = [[30, 90, 230], [20, 160, 40], [140, 50, 190], [250, 140, 0], [220, 20, 30]];

/// Lightened grayscale copy of `map` with every section drawn in its class
/// color, `line_width_px` wide.
pub fn render_overlay(map: &GeoRaster<u8>, network: &ClassifiedNetwork, line_width_px: f64) -> Result<GeoRaster<u8>, RasterError> {
    let (w, h, t) = (map.width(), map.height(), *map.transform());
    let gray: Vec<u8> = map.luminance().iter().map(|&l| (96.0 + 0.6 * l).round().min(255.0) as u8).collect();
    let mut bands = vec![gray.clone(), gray.clone(), gray];
    let radius = line_width_px * t.pixel_size / 2.0;
    for section in network.sections().values() {
        let color = CLASS_COLORS[section.class.index()];
        for i in pixels_near(&t, w, h, &section.line, radius) {
            for (band, v) in bands.iter_mut().zip(color) {
                band[i] = v;
            }
        }
    }
    GeoRaster::new(w, h, t, BandSemantics::Rgb, bands)
}
