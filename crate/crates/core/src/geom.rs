//! Planar geometry in map coordinates (meters).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolylineError {
    #[error("polyline needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive vertices at index {0} and the next one are identical")]
    DuplicateVertex(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
}

/// An ordered chain of at least two distinct consecutive vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    vertices: Vec<Point>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self, PolylineError> {
        if vertices.len() < 2 {
            return Err(PolylineError::TooFewVertices(vertices.len()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(PolylineError::NonFinite(i));
            }
        }
        if let Some(i) = vertices.windows(2).position(|w| w[0] == w[1]) {
            return Err(PolylineError::DuplicateVertex(i));
        }
        Ok(Self { vertices })
    }

    /// Builds a polyline after dropping consecutive duplicates.
    pub fn from_points_dedup(points: impl IntoIterator<Item = Point>) -> Result<Self, PolylineError> {
        let mut vertices: Vec<Point> = Vec::new();
        for p in points {
            if vertices.last() != Some(&p) {
                vertices.push(p);
            }
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point> {
        self.vertices
    }

    pub fn first(&self) -> Point {
        self.vertices[0]
    }

    pub fn last(&self) -> Point {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn is_closed(&self) -> bool {
        self.first() == self.last()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Arc length at every vertex; first entry 0, last entry the total length.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.vertices.len());
        let mut acc = 0.0;
        out.push(0.0);
        for (a, b) in self.edges() {
            acc += a.distance(b);
            out.push(acc);
        }
        out
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(&self.vertices)
    }

    pub fn reversed(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline { vertices: v }
    }

    /// Point at arc-length `s`, clamped to the polyline.
    pub fn point_at(&self, s: f64) -> Point {
        let cum = self.cumulative_lengths();
        point_at_with(&self.vertices, &cum, s)
    }

    /// Portion of the polyline between arc lengths `from` and `to` (`from < to`).
    ///
    /// Interior vertices are kept as-is and cut points are interpolated, so
    /// pieces cut at shared positions concatenate back to the original.
    pub fn slice(&self, from: f64, to: f64) -> Option<Polyline> {
        let cum = self.cumulative_lengths();
        slice_with(&self.vertices, &cum, from, to)
    }

    /// Shortest distance from `p` to any edge.
    pub fn distance_to(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

impl<'de> Deserialize<'de> for Polyline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<Point>,
        }
        let raw = Raw::deserialize(d)?;
        Polyline::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn point_at_with(vertices: &[Point], cum: &[f64], s: f64) -> Point {
    let total = *cum.last().unwrap();
    if s <= 0.0 {
        return vertices[0];
    }
    if s >= total {
        return vertices[vertices.len() - 1];
    }
    // first vertex index with cum > s
    let i = cum.partition_point(|&c| c <= s);
    let (a, b) = (vertices[i - 1], vertices[i]);
    let seg = cum[i] - cum[i - 1];
    if seg <= 0.0 {
        return a;
    }
    a.lerp(b, (s - cum[i - 1]) / seg)
}

pub(crate) fn slice_with(vertices: &[Point], cum: &[f64], from: f64, to: f64) -> Option<Polyline> {
    let total = *cum.last().unwrap();
    let from = from.clamp(0.0, total);
    let to = to.clamp(0.0, total);
    if to <= from {
        return None;
    }
    let mut pts = Vec::new();
    pts.push(point_at_with(vertices, cum, from));
    for (i, &c) in cum.iter().enumerate() {
        if c > from && c < to {
            pts.push(vertices[i]);
        }
    }
    pts.push(point_at_with(vertices, cum, to));
    Polyline::from_points_dedup(pts).ok()
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (_, d) = project_on_segment(p, a, b);
    d
}

/// Parameters `(s, t)` where `a0`–`a1` and `b0`–`b1` cross, if they do at
/// a single point.
pub fn segment_intersection(a0: Point, a1: Point, b0: Point, b1: Point) -> Option<(f64, f64)> {
    let (dx, dy) = (a1.x - a0.x, a1.y - a0.y);
    let (ex, ey) = (b1.x - b0.x, b1.y - b0.y);
    let den = dx * ey - dy * ex;
    if den == 0.0 {
        return None;
    }
    let (fx, fy) = (b0.x - a0.x, b0.y - a0.y);
    let s = (fx * ey - fy * ex) / den;
    let t = (fx * dy - fy * dx) / den;
    ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)).then_some((s, t))
}

/// Shortest distance between two closed segments.
pub fn segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> f64 {
    if segment_intersection(a0, a1, b0, b1).is_some() {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// Returns the clamped parameter `t` in [0, 1] of the nearest point on `a`–`b`
/// together with the distance to it.
pub fn project_on_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (0.0, p.distance(a));
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    let q = Point::new(a.x + t * dx, a.y + t * dy);
    (t, p.distance(q))
}

/// Sub-interval `[t0, t1]` of `[0, 1]` where the segment `p0`–`p1` lies
/// within `radius` of segment `a`–`b` (the capsule around it).
///
/// The capsule is convex, so the set is a single interval.
pub fn capsule_clip(p0: Point, p1: Point, a: Point, b: Point, radius: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |iv: Option<(f64, f64)>| {
        if let Some((s, e)) = iv {
            lo = lo.min(s);
            hi = hi.max(e);
        }
    };
    take(disc_clip(p0, p1, a, radius));
    take(disc_clip(p0, p1, b, radius));
    take(slab_clip(p0, p1, a, b, radius));
    (lo <= hi).then_some((lo, hi))
}

fn disc_clip(p0: Point, p1: Point, c: Point, r: f64) -> Option<(f64, f64)> {
    let dx = p1.x - p0.x;
    let dy = p1.y - p0.y;
    let fx = p0.x - c.x;
    let fy = p0.y - c.y;
    let a = dx * dx + dy * dy;
    let b = 2.0 * (fx * dx + fy * dy);
    let cc = fx * fx + fy * fy - r * r;
    if a == 0.0 {
        return (cc <= 0.0).then_some((0.0, 1.0));
    }
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = ((-b - sq) / (2.0 * a)).max(0.0);
    let t1 = ((-b + sq) / (2.0 * a)).min(1.0);
    (t0 <= t1).then_some((t0, t1))
}

/// Clip against the rectangle spanned by `a`–`b` with half-width `r`.
fn slab_clip(p0: Point, p1: Point, a: Point, b: Point, r: f64) -> Option<(f64, f64)> {
    let ux = b.x - a.x;
    let uy = b.y - a.y;
    let len = ux.hypot(uy);
    if len == 0.0 {
        return None;
    }
    let (ux, uy) = (ux / len, uy / len);
    // local coordinates: u along the segment, v across it
    let u0 = (p0.x - a.x) * ux + (p0.y - a.y) * uy;
    let v0 = -(p0.x - a.x) * uy + (p0.y - a.y) * ux;
    let u1 = (p1.x - a.x) * ux + (p1.y - a.y) * uy;
    let v1 = -(p1.x - a.x) * uy + (p1.y - a.y) * ux;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for (c0, c1, min, max) in [(u0, u1, 0.0, len), (v0, v1, -r, r)] {
        let d = c1 - c0;
        if d == 0.0 {
            if c0 < min || c0 > max {
                return None;
            }
            continue;
        }
        let mut ta = (min - c0) / d;
        let mut tb = (max - c0) / d;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        lo = lo.max(ta);
        hi = hi.min(tb);
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn from_points(points: &[Point]) -> Self {
        let mut b = BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in points {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    pub fn expand(self, r: f64) -> Self {
        BBox {
            min_x: self.min_x - r,
            min_y: self.min_y - r,
            max_x: self.max_x + r,
            max_y: self.max_y + r,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }
}

/// Union length of a set of parameter intervals within [0, 1].
pub(crate) fn interval_union_length(mut ivs: Vec<(f64, f64)>) -> f64 {
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (s, e) in ivs {
        match cur {
            Some((cs, ce)) if s <= ce => cur = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                cur = Some((s, e));
            }
            None => cur = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = cur {
        total += ce - cs;
    }
    total
}
