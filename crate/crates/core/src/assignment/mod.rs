//! Road-class assignment along segments: discretize into parts, profile the
//! mean class probabilities, split where the leading class changes, merge
//! short sections and decide each section's class.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Polyline;
use crate::network::{ClassifiedNetwork, ClassifiedSection, RoadClass, RoadNetwork, SectionId, SegmentId};
use crate::raster::{argmax, pixels_near, ProbabilityField, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("segment has no pixel of the field within the buffer")]
    OutsideField,
    #[error("segment has zero length")]
    EmptySegment,
    #[error("writing profile: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignmentParams {
    /// Longest road part, meters.
    pub delta: f64,
    /// Shortest section kept between two split points, meters.
    pub min_length: f64,
    /// Buffer radius for zonal means, meters.
    pub beta: f64,
    /// Length ignored at both section ends when deciding the class, meters.
    pub end_trim: f64,
}

impl Default for AssignmentParams {
    fn default() -> Self {
        Self { delta: 10.0, min_length: 80.0, beta: 6.0, end_trim: 20.0 }
    }
}

impl AssignmentParams {
    pub fn validate(&self) -> Result<(), AssignmentError> {
        for (name, v) in [("delta", self.delta), ("min_length", self.min_length), ("beta", self.beta), ("end_trim", self.end_trim)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(AssignmentError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Arc-length positions of the part boundaries: `ceil(length / delta)`
/// equal parts, first entry 0 and last entry the segment length.
pub fn discretize_segment(line: &Polyline, delta: f64) -> Vec<f64> {
    let length = line.length();
    let n = ((length / delta).ceil() as usize).max(1);
    let mut out: Vec<f64> = (0..n).map(|k| length * k as f64 / n as f64).collect();
    out.push(length);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePart {
    pub start: f64,
    pub length: f64,
    /// Mean probability of classes 1..5.
    pub mean: [f64; NUM_CLASSES],
    /// No pixel center fell inside the buffer; `mean` is interpolated.
    pub empty: bool,
}

impl ProfilePart {
    pub fn class(&self) -> RoadClass {
        RoadClass::from_index(argmax(&self.mean))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZonalProfile {
    pub parts: Vec<ProfilePart>,
}

/// Per-class mean over the field pixels whose centers lie within `beta` of
/// `line`, with the pixel count.
pub fn zonal_mean(line: &Polyline, field: &ProbabilityField, beta: f64) -> ([f64; NUM_CLASSES], usize) {
    let pixels = pixels_near(field.transform(), field.width(), field.height(), line, beta);
    let mut sum = [0f64; NUM_CLASSES];
    for (k, s) in sum.iter_mut().enumerate() {
        let band = field.band(k);
        *s = pixels.iter().map(|&i| band[i] as f64).sum();
    }
    if !pixels.is_empty() {
        sum.iter_mut().for_each(|s| *s /= pixels.len() as f64);
    }
    (sum, pixels.len())
}

/// Zonal mean of every part; empty parts take the value interpolated
/// between the nearest covered parts on either side.
pub fn zonal_mean_profile(
    line: &Polyline,
    boundaries: &[f64],
    field: &ProbabilityField,
    beta: f64,
) -> Result<ZonalProfile, AssignmentError> {
    let mut parts: Vec<ProfilePart> = boundaries
        .windows(2)
        .map(|b| {
            let (mean, count) = match line.slice(b[0], b[1]) {
                Some(part) => zonal_mean(&part, field, beta),
                None => ([0.0; NUM_CLASSES], 0),
            };
            ProfilePart { start: b[0], length: b[1] - b[0], mean, empty: count == 0 }
        })
        .collect();
    let covered: Vec<usize> = (0..parts.len()).filter(|&i| !parts[i].empty).collect();
    if covered.is_empty() {
        return Err(AssignmentError::OutsideField);
    }
    for i in 0..parts.len() {
        if !parts[i].empty {
            continue;
        }
        let after = covered.partition_point(|&c| c < i);
        let mean = match (after.checked_sub(1).map(|k| covered[k]), covered.get(after).copied()) {
            (Some(a), Some(b)) => {
                let t = (i - a) as f64 / (b - a) as f64;
                std::array::from_fn(|k| parts[a].mean[k] * (1.0 - t) + parts[b].mean[k] * t)
            }
            (Some(a), None) => parts[a].mean,
            (None, Some(b)) => parts[b].mean,
            (None, None) => unreachable!("at least one part is covered"),
        };
        parts[i].mean = mean;
    }
    Ok(ZonalProfile { parts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitPoint {
    pub distance: f64,
    pub before: RoadClass,
    pub after: RoadClass,
}

/// A split point at every part boundary where the leading class changes.
pub fn detect_split_candidates(profile: &ZonalProfile) -> Vec<SplitPoint> {
    profile
        .parts
        .windows(2)
        .filter_map(|w| {
            let (before, after) = (w[0].class(), w[1].class());
            (before != after).then_some(SplitPoint { distance: w[1].start, before, after })
        })
        .collect()
}

/// Sections given by their boundaries along the parent: `bounds` has one
/// more entry than `classes`.
#[derive(Debug, Clone, PartialEq)]
struct Sections {
    bounds: Vec<f64>,
    classes: Vec<RoadClass>,
}

impl Sections {
    fn len(&self, i: usize) -> f64 {
        self.bounds[i + 1] - self.bounds[i]
    }

    fn remove_boundary(&mut self, b: usize) {
        self.bounds.remove(b);
        self.classes.remove(b);
    }

    fn coalesce(&mut self) {
        let mut i = 1;
        while i < self.classes.len() {
            if self.classes[i] == self.classes[i - 1] {
                self.remove_boundary(i);
            } else {
                i += 1;
            }
        }
    }

    /// Merges sections shorter than `min_length`, shortest first, until all
    /// are long enough or one remains.
    fn filter_short(&mut self, min_length: f64) {
        self.coalesce();
        while self.classes.len() > 1 {
            let Some(i) = (0..self.classes.len())
                .filter(|&i| self.len(i) < min_length)
                .min_by(|&a, &b| self.len(a).total_cmp(&self.len(b)))
            else {
                break;
            };
            let last = self.classes.len() - 1;
            if i == 0 {
                self.classes.remove(0);
                self.bounds.remove(1);
            } else if i == last {
                self.classes.remove(i);
                self.bounds.remove(i);
            } else if self.classes[i - 1] == self.classes[i + 1] {
                self.classes.drain(i..=i + 1);
                self.bounds.drain(i..=i + 1);
            } else {
                let mid = 0.5 * (self.bounds[i] + self.bounds[i + 1]);
                self.classes.remove(i);
                self.bounds.remove(i);
                self.bounds[i] = mid;
            }
            self.coalesce();
        }
    }
}

/// Applies the short-section merge rules to contiguous `(length, class)`
/// sections. Total length is kept.
pub fn filter_short_sections(sections: &[(f64, RoadClass)], min_length: f64) -> Vec<(f64, RoadClass)> {
    if sections.is_empty() {
        return Vec::new();
    }
    let mut bounds = vec![0.0];
    for &(len, _) in sections {
        bounds.push(bounds.last().unwrap() + len);
    }
    let mut s = Sections { bounds, classes: sections.iter().map(|&(_, c)| c).collect() };
    s.filter_short(min_length);
    (0..s.classes.len()).map(|i| (s.len(i), s.classes[i])).collect()
}

/// Class with the highest zonal mean over `section` minus `end_trim` at both
/// ends; the trim is skipped for sections no longer than twice the trim, and
/// dropped when the trimmed part covers no pixel.
pub fn assign_section_class(
    section: &Polyline,
    field: &ProbabilityField,
    beta: f64,
    end_trim: f64,
) -> Result<(RoadClass, [f64; NUM_CLASSES]), AssignmentError> {
    let length = section.length();
    if length <= 0.0 {
        return Err(AssignmentError::EmptySegment);
    }
    if length > 2.0 * end_trim {
        if let Some(inner) = section.slice(end_trim, length - end_trim) {
            let (mean, count) = zonal_mean(&inner, field, beta);
            if count > 0 {
                return Ok((RoadClass::from_index(argmax(&mean)), mean));
            }
        }
    }
    let (mean, count) = zonal_mean(section, field, beta);
    if count == 0 {
        return Err(AssignmentError::OutsideField);
    }
    Ok((RoadClass::from_index(argmax(&mean)), mean))
}

/// Everything computed for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAssignment {
    pub profile: ZonalProfile,
    pub candidates: Vec<SplitPoint>,
    /// Final sections as (start, end, class, mean probabilities).
    pub sections: Vec<(f64, f64, RoadClass, [f64; NUM_CLASSES])>,
}

impl SegmentAssignment {
    /// Positions where the final class changes.
    pub fn split_points(&self) -> Vec<SplitPoint> {
        self.sections
            .windows(2)
            .map(|w| SplitPoint { distance: w[1].0, before: w[0].2, after: w[1].2 })
            .collect()
    }
}

pub fn classify_segment(
    line: &Polyline,
    field: &ProbabilityField,
    params: &AssignmentParams,
) -> Result<SegmentAssignment, AssignmentError> {
    params.validate()?;
    if line.length() <= 0.0 {
        return Err(AssignmentError::EmptySegment);
    }
    let boundaries = discretize_segment(line, params.delta);
    let profile = zonal_mean_profile(line, &boundaries, field, params.beta)?;
    let candidates = detect_split_candidates(&profile);
    let mut bounds = vec![0.0];
    bounds.extend(candidates.iter().map(|c| c.distance));
    bounds.push(*boundaries.last().unwrap());
    let mut classes = vec![profile.parts[0].class()];
    classes.extend(candidates.iter().map(|c| c.after));
    let mut s = Sections { bounds, classes };
    s.filter_short(params.min_length);

    let cum = line.cumulative_lengths();
    let slice = |a: f64, b: f64| crate::geom::slice_with(line.vertices(), &cum, a, b);
    let decide = |s: &Sections| -> Result<Vec<(RoadClass, [f64; NUM_CLASSES])>, AssignmentError> {
        (0..s.classes.len())
            .map(|i| {
                let part = slice(s.bounds[i], s.bounds[i + 1]).ok_or(AssignmentError::EmptySegment)?;
                assign_section_class(&part, field, params.beta, params.end_trim)
            })
            .collect()
    };
    // deciding classes can make neighbors agree; merge those and decide again
    let mut decided = decide(&s)?;
    loop {
        let before = s.classes.len();
        s.classes = decided.iter().map(|d| d.0).collect();
        s.coalesce();
        if s.classes.len() == before {
            break;
        }
        decided = decide(&s)?;
    }
    let sections = (0..s.classes.len()).map(|i| (s.bounds[i], s.bounds[i + 1], decided[i].0, decided[i].1)).collect();
    Ok(SegmentAssignment { profile, candidates, sections })
}

/// Result of classifying a network: the sections and the per-segment
/// details, plus the segments that could not be classified.
#[derive(Debug, Clone, Default)]
pub struct NetworkAssignment {
    pub network: ClassifiedNetwork,
    pub segments: BTreeMap<SegmentId, SegmentAssignment>,
    pub failures: BTreeMap<SegmentId, String>,
}

pub fn classify_network(
    network: &RoadNetwork,
    field: &ProbabilityField,
    params: &AssignmentParams,
) -> Result<NetworkAssignment, AssignmentError> {
    params.validate()?;
    let results: Vec<(SegmentId, Result<SegmentAssignment, AssignmentError>)> = network
        .segments()
        .par_iter()
        .map(|(&id, seg)| (id, classify_segment(&seg.line, field, params)))
        .collect();
    let mut out = NetworkAssignment::default();
    for (id, result) in results {
        match result {
            Ok(a) => {
                let line = &network.segments()[&id].line;
                let cum = line.cumulative_lengths();
                let last = a.sections.len() - 1;
                for (k, &(from, to, class, mean)) in a.sections.iter().enumerate() {
                    // whole-segment sections keep the parent geometry bit for bit
                    let piece = if k == 0 && k == last {
                        line.clone()
                    } else {
                        crate::geom::slice_with(line.vertices(), &cum, from, to).expect("sections have positive length")
                    };
                    out.network.insert(
                        SectionId { parent: id, index: k as u32 },
                        ClassifiedSection { line: piece, class, mean_probabilities: Some(mean) },
                    );
                }
                out.segments.insert(id, a);
            }
            Err(e) => {
                log::warn!("segment {}: {e}", id.0);
                out.failures.insert(id, e.to_string());
            }
        }
    }
    Ok(out)
}

/// Writes one `segment_<id>.csv` per segment with columns
/// `part_start_m,length_m,p1..p5`.
pub fn write_profiles(dir: &Path, assignment: &NetworkAssignment) -> Result<(), AssignmentError> {
    std::fs::create_dir_all(dir)?;
    for (id, seg) in &assignment.segments {
        let mut w = csv::Writer::from_path(dir.join(format!("segment_{}.csv", id.0)))?;
        w.write_record(["part_start_m", "length_m", "p1", "p2", "p3", "p4", "p5"])?;
        for p in &seg.profile.parts {
            let mut row = vec![p.start.to_string(), p.length.to_string()];
            row.extend(p.mean.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}
