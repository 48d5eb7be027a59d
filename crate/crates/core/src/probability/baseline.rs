use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProbabilityError;
use crate::painter::SymbologySpec;
use crate::raster::{BandSemantics, GeoRaster, ProbabilityField, NO_ROAD_BAND, NUM_CLASSES, NUM_PROB_BANDS};

/// Softmax temperature applied to correlation scores.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    pub temperature: f64,
    pub rotation_step_deg: f64,
    /// Dash phases tried per dashed symbol.
    pub phase_steps: usize,
    /// Class scores are the best match within this many pixels.
    pub pool_radius: f64,
    /// Gaussian softening of template stroke edges, pixels.
    pub template_blur: f64,
    /// Side of the square correlation window; 0 derives it from the
    /// widest symbol so that a window on one stroke still sees its partner.
    pub window: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { temperature: DEFAULT_TEMPERATURE, rotation_step_deg: 5.0, phase_steps: 5, pool_radius: 6.0, template_blur: 0.6, window: 0 }
    }
}

impl BaselineParams {
    pub fn window_size(&self, spec: &SymbologySpec) -> usize {
        match self.window {
            0 => (2 * spec.max_symbol_width().ceil() as usize - 3).max(3) | 1,
            n => n | 1,
        }
    }

    pub fn validate(&self) -> Result<(), ProbabilityError> {
        let bad = |m: &str| Err(ProbabilityError::Parameter(m.into()));
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if !(self.rotation_step_deg > 0.0 && self.rotation_step_deg <= 180.0) {
            return bad("rotation step must be in (0, 180] degrees");
        }
        if self.phase_steps == 0 {
            return bad("phase steps must be at least 1");
        }
        if !(self.template_blur >= 0.0) {
            return bad("template blur must be non-negative");
        }
        if !(self.pool_radius >= 0.0) {
            return bad("pool radius must be non-negative");
        }
        Ok(())
    }
}

/// Zero-mean, unit-norm darkness templates of one class, grouped by
/// rotation; each template is `size²` long.
struct ClassTemplates {
    /// Rotations cover 360° instead of 180°.
    full_turn: bool,
    by_angle: Vec<Vec<Vec<f32>>>,
}

fn render_templates(spec: &SymbologySpec, params: &BaselineParams, class_index: usize, size: usize) -> ClassTemplates {
    let symbol = spec.symbol(class_index);
    let full_turn = symbol.line_count == 2 && symbol.dash != symbol.second_dash;
    let turn = if full_turn { 360.0 } else { 180.0 };
    let angles: Vec<f64> = (0..).map(|k| k as f64 * params.rotation_step_deg).take_while(|&a| a < turn - 1e-9).collect();
    let spacings: Vec<f64> = if symbol.line_count == 2 && spec.spacing_jitter > 0.0 {
        vec![symbol.spacing - spec.spacing_jitter, symbol.spacing, symbol.spacing + spec.spacing_jitter]
    } else {
        vec![symbol.spacing]
    };
    let period = [symbol.dash, symbol.second_dash].iter().flatten().map(|d| d.period()).fold(0.0, f64::max);
    let phases: Vec<f64> = if period > 0.0 {
        (0..params.phase_steps).map(|k| k as f64 * period / params.phase_steps as f64).collect()
    } else {
        vec![0.0]
    };
    let c = (size / 2) as f64;
    let sigma = params.template_blur.max(1e-3);
    let mut by_angle = Vec::new();
    for &angle in &angles {
        let (sin, cos) = angle.to_radians().sin_cos();
        let mut templates = Vec::new();
        for &spacing in &spacings {
            let offset = (spacing + symbol.stroke_width) / 2.0;
            let strokes: Vec<(f64, Option<crate::painter::Dash>)> = match symbol.line_count {
                1 => vec![(0.0, symbol.dash)],
                _ => vec![(offset, symbol.dash), (-offset, symbol.second_dash)],
            };
            for &phase in &phases {
                let mut tpl = vec![0f32; size * size];
                for (k, v) in tpl.iter_mut().enumerate() {
                    // rows grow downward, so flip y to keep the left side positive
                    let (dx, dy) = ((k % size) as f64 - c, c - (k / size) as f64);
                    let along = dx * cos + dy * sin;
                    let across = -dx * sin + dy * cos;
                    let ink = strokes
                        .iter()
                        .filter(|(_, dash)| dash.is_none_or(|d| (along + phase).rem_euclid(d.period()) < d.on))
                        .map(|(o, _)| {
                            let gap = ((across - o).abs() - symbol.stroke_width / 2.0).max(0.0);
                            (-0.5 * (gap / sigma).powi(2)).exp()
                        })
                        .fold(0.0, f64::max);
                    *v = ink as f32;
                }
                if normalize(&mut tpl) {
                    templates.push(tpl);
                }
            }
        }
        by_angle.push(templates);
    }
    ClassTemplates { full_turn, by_angle }
}

/// Line direction in degrees within [0, 180) from the structure tensor of
/// `darkness` summed over a square of the given radius; rows grow downward
/// and the angle is measured counter-clockwise from east.
fn orientations(darkness: &[f32], w: usize, h: usize, radius: usize, wanted: &[bool]) -> Vec<f32> {
    let at = |x: i64, y: i64| darkness[reflect(y, h) * w + reflect(x, w)] as f64;
    let mut jxx = vec![0f64; w * h];
    let mut jxy = vec![0f64; w * h];
    let mut jyy = vec![0f64; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let gx = at(x + 1, y) - at(x - 1, y);
            let gy = at(x, y - 1) - at(x, y + 1);
            let i = y as usize * w + x as usize;
            jxx[i] = gx * gx;
            jxy[i] = gx * gy;
            jyy[i] = gy * gy;
        }
    }
    let (sxx, sxy, syy) = (box_sum(&jxx, w, h, radius), box_sum(&jxy, w, h, radius), box_sum(&jyy, w, h, radius));
    (0..w * h)
        .map(|i| {
            if !wanted[i] {
                return 0.0;
            }
            let gradient = 0.5 * (2.0 * sxy[i]).atan2(sxx[i] - syy[i]);
            (gradient.to_degrees() + 90.0).rem_euclid(180.0) as f32
        })
        .collect()
}

/// Sum over the (2r+1)² square around each pixel, clipped at the border.
fn box_sum(v: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut rows = vec![0f64; w * h];
    for y in 0..h {
        let line = &v[y * w..(y + 1) * w];
        let mut acc: f64 = line[..r.min(w - 1) + 1].iter().sum();
        for x in 0..w {
            rows[y * w + x] = acc;
            if x + r + 1 < w {
                acc += line[x + r + 1];
            }
            if x >= r {
                acc -= line[x - r];
            }
        }
    }
    let mut out = vec![0f64; w * h];
    for x in 0..w {
        let mut acc: f64 = (0..=r.min(h - 1)).map(|y| rows[y * w + x]).sum();
        for y in 0..h {
            out[y * w + x] = acc;
            if y + r + 1 < h {
                acc += rows[(y + r + 1) * w + x];
            }
            if y >= r {
                acc -= rows[(y - r) * w + x];
            }
        }
    }
    out
}

/// Centers and scales to unit norm; false for a flat vector.
fn normalize(v: &mut [f32]) -> bool {
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    let norm = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return false;
    }
    for x in v.iter_mut() {
        *x = ((*x as f64 - mean) / norm) as f32;
    }
    true
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Mirror index into `0..n` (edge pixel not repeated).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// Per-pixel class distribution from normalized cross-correlation against
/// rotated class templates rendered from `spec`.
///
/// The local line direction picks the two nearest template rotations (both
/// senses for asymmetric symbols). Each class score is the best correlation
/// over those templates and over scored pixels within `pool_radius`. A
/// softmax with the given temperature turns scores into probabilities, and
/// the no-road band is 0. With a `region`, only pixels inside it are scored
/// and the rest get a uniform class distribution.
pub fn baseline_classifier(
    map: &GeoRaster<u8>,
    spec: &SymbologySpec,
    params: &BaselineParams,
    region: Option<&GeoRaster<u8>>,
) -> Result<ProbabilityField, ProbabilityError> {
    params.validate()?;
    spec.validate().map_err(|e| ProbabilityError::Parameter(e.to_string()))?;
    if !matches!(map.semantics(), BandSemantics::Rgb | BandSemantics::Gray) {
        return Err(ProbabilityError::MapSemantics);
    }
    if let Some(r) = region {
        if !r.same_grid(map) || r.bands().len() != 1 {
            return Err(ProbabilityError::Region);
        }
    }
    let (w, h) = (map.width(), map.height());
    let size = params.window_size(spec);
    let classes: Vec<ClassTemplates> = (0..NUM_CLASSES).map(|k| render_templates(spec, params, k, size)).collect();
    let darkness: Vec<f32> = map.luminance().iter().map(|&l| 255.0 - l).collect();
    let inside: Vec<bool> = (0..w * h).map(|i| region.is_none_or(|r| r.band(0)[i] != 0)).collect();
    let angle_of = orientations(&darkness, w, h, size / 2, &inside);
    let step = params.rotation_step_deg;
    let half = (size / 2) as i64;

    let raw: Vec<[f32; NUM_CLASSES]> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let mut window = vec![0f32; size * size];
            let (darkness, classes, inside, angle_of) = (&darkness, &classes, &inside, &angle_of);
            (0..w).map(move |x| {
                let i = y * w + x;
                if !inside[i] {
                    return [f32::NEG_INFINITY; NUM_CLASSES];
                }
                for (k, v) in window.iter_mut().enumerate() {
                    let sx = reflect(x as i64 + (k % size) as i64 - half, w);
                    let sy = reflect(y as i64 + (k / size) as i64 - half, h);
                    *v = darkness[sy * w + sx];
                }
                let mean = window.iter().sum::<f32>() / window.len() as f32;
                let norm = window.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>().sqrt();
                if norm < 1e-3 {
                    return [0.0; NUM_CLASSES];
                }
                let lower = (angle_of[i] as f64 / step).floor() as usize;
                let mut scores = [f32::NEG_INFINITY; NUM_CLASSES];
                for (s, class) in scores.iter_mut().zip(classes) {
                    let n = class.by_angle.len();
                    let half_turn = if class.full_turn { n / 2 } else { 0 };
                    let mut picks = [lower % n, (lower + 1) % n, (lower + half_turn) % n, (lower + 1 + half_turn) % n];
                    picks.sort_unstable();
                    let mut best = f32::NEG_INFINITY;
                    for (j, &a) in picks.iter().enumerate() {
                        if j > 0 && picks[j - 1] == a {
                            continue;
                        }
                        // templates are zero-mean, so the window mean drops out
                        for t in &class.by_angle[a] {
                            best = best.max(dot(&window, t));
                        }
                    }
                    *s = best / norm;
                }
                scores
            })
        })
        .collect();

    let pool = params.pool_radius.floor() as i64;
    let r2 = params.pool_radius * params.pool_radius;
    let uniform = 1.0 / NUM_CLASSES as f32;
    let tau = params.temperature;
    let out: Vec<[f32; NUM_CLASSES]> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            if !inside[i] {
                return [uniform; NUM_CLASSES];
            }
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            let mut best = [f32::NEG_INFINITY; NUM_CLASSES];
            for dy in -pool..=pool {
                for dx in -pool..=pool {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx * dx + dy * dy) as f64 <= r2 && nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                        let s = &raw[ny as usize * w + nx as usize];
                        for k in 0..NUM_CLASSES {
                            best[k] = best[k].max(s[k]);
                        }
                    }
                }
            }
            softmax(&best, tau)
        })
        .collect();
    let mut bands = vec![vec![0f32; w * h]; NUM_PROB_BANDS];
    for (i, p) in out.iter().enumerate() {
        for k in 0..NUM_CLASSES {
            bands[k][i] = p[k];
        }
    }
    debug_assert!(bands[NO_ROAD_BAND].iter().all(|&v| v == 0.0));
    Ok(ProbabilityField::new(w, h, *map.transform(), bands)?)
}

fn softmax(scores: &[f32; NUM_CLASSES], tau: f64) -> [f32; NUM_CLASSES] {
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s as f64));
    let e: Vec<f64> = scores.iter().map(|&s| ((s as f64 - max) / tau).exp()).collect();
    let total: f64 = e.iter().sum();
    let mut out = [0f32; NUM_CLASSES];
    for (o, v) in out.iter_mut().zip(&e) {
        *o = (v / total) as f32;
    }
    out
}
