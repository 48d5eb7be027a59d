//! Line-based buffer metrics for classified networks and pixel-based metrics
//! for probability fields.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{capsule_clip, interval_union_length, BBox, Point, Polyline};
use crate::network::ClassifiedNetwork;
use crate::raster::{label_to_band, GeoRaster, ProbabilityField, NO_ROAD_BAND, NUM_CLASSES, NUM_PROB_BANDS};

pub const DEFAULT_BUFFER: f64 = 5.0;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("buffer must be positive, got {0}")]
    Buffer(f64),
    #[error("labels and mask must share the field's grid")]
    Grid,
    #[error("label value {value} at pixel {index} is outside 0..5")]
    Label { value: u8, index: usize },
    #[error("no pixel to evaluate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassLineMetrics {
    pub gt_length: f64,
    pub pred_length: f64,
    /// Ground-truth length inside the buffer of same-class predictions.
    pub gt_matched: f64,
    /// Predicted length inside the buffer of same-class ground truth.
    pub pred_matched: f64,
    /// `None` when the class has no ground truth.
    pub completeness: Option<f64>,
    /// `None` when the class has no prediction.
    pub correctness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineMetricReport {
    pub buffer: f64,
    /// Classes 1..5 in order.
    pub classes: [ClassLineMetrics; NUM_CLASSES],
    /// Completeness weighted by ground-truth length per class.
    pub weighted_completeness: Option<f64>,
    /// Correctness weighted by predicted length per class.
    pub weighted_correctness: Option<f64>,
}

struct Edge {
    a: Point,
    b: Point,
    bbox: BBox,
}

fn edges_of<'a>(lines: impl Iterator<Item = &'a Polyline>) -> Vec<Edge> {
    lines
        .flat_map(|l| l.edges())
        .map(|(a, b)| Edge { a, b, bbox: BBox::from_points(&[a, b]) })
        .collect()
}

/// Length of `lines` within `radius` of any edge in `others`, clipped exactly.
fn length_within(lines: &[Edge], others: &[Edge], radius: f64) -> f64 {
    lines
        .par_iter()
        .map(|e| {
            let reach = e.bbox.expand(radius);
            let ivs: Vec<(f64, f64)> = others
                .iter()
                .filter(|o| o.bbox.intersects(&reach))
                .filter_map(|o| capsule_clip(e.a, e.b, o.a, o.b, radius))
                .collect();
            e.a.distance(e.b) * interval_union_length(ivs)
        })
        .collect::<Vec<f64>>()
        // summed in edge order so the result does not depend on scheduling
        .iter()
        .sum()
}

/// Per-class completeness and correctness of `pred` against `gt`, matching
/// each class only against the same class.
pub fn line_metrics(gt: &ClassifiedNetwork, pred: &ClassifiedNetwork, buffer: f64) -> Result<LineMetricReport, EvaluationError> {
    if !(buffer.is_finite() && buffer > 0.0) {
        return Err(EvaluationError::Buffer(buffer));
    }
    let classes: [ClassLineMetrics; NUM_CLASSES] = std::array::from_fn(|k| {
        let of = |n: &ClassifiedNetwork| {
            let lines = n.sections().values().filter(|s| s.class.index() == k).map(|s| &s.line);
            edges_of(lines)
        };
        let (g, p) = (of(gt), of(pred));
        let gt_length: f64 = g.iter().map(|e| e.a.distance(e.b)).sum();
        let pred_length: f64 = p.iter().map(|e| e.a.distance(e.b)).sum();
        let gt_matched = length_within(&g, &p, buffer);
        let pred_matched = length_within(&p, &g, buffer);
        ClassLineMetrics {
            gt_length,
            pred_length,
            gt_matched,
            pred_matched,
            completeness: (gt_length > 0.0).then(|| (gt_matched / gt_length).min(1.0)),
            correctness: (pred_length > 0.0).then(|| (pred_matched / pred_length).min(1.0)),
        }
    });
    let weighted = |len: fn(&ClassLineMetrics) -> f64, value: fn(&ClassLineMetrics) -> Option<f64>| {
        let total: f64 = classes.iter().filter(|c| value(c).is_some()).map(len).sum();
        (total > 0.0).then(|| classes.iter().filter_map(|c| value(c).map(|v| v * len(c))).sum::<f64>() / total)
    };
    Ok(LineMetricReport {
        buffer,
        weighted_completeness: weighted(|c| c.gt_length, |c| c.completeness),
        weighted_correctness: weighted(|c| c.pred_length, |c| c.correctness),
        classes,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}", 100.0 * v))
}

impl LineMetricReport {
    /// Text table with one row per class and a weighted row, values in percent.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<10} {:>12} {:>12} {:>12} {:>12}", "class", "complete %", "correct %", "gt m", "pred m").unwrap();
        for (k, c) in self.classes.iter().enumerate() {
            writeln!(
                s,
                "{:<10} {:>12} {:>12} {:>12.1} {:>12.1}",
                k + 1,
                cell(c.completeness),
                cell(c.correctness),
                c.gt_length,
                c.pred_length
            )
            .unwrap();
        }
        let gt: f64 = self.classes.iter().map(|c| c.gt_length).sum();
        let pred: f64 = self.classes.iter().map(|c| c.pred_length).sum();
        writeln!(
            s,
            "{:<10} {:>12} {:>12} {:>12.1} {:>12.1}",
            "weighted",
            cell(self.weighted_completeness),
            cell(self.weighted_correctness),
            gt,
            pred
        )
        .unwrap();
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PixelMetricOptions {
    /// Leave the no-road class out of the macro averages.
    pub exclude_no_road: bool,
    /// IoU averaged over classes instead of road versus no-road.
    pub macro_iou: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSet {
    /// Evaluated pixels.
    pub n: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub iou: f64,
    pub brier: f64,
    /// Counts per probability band: classes 1..5, then no-road.
    pub classes: [ClassCounts; NUM_PROB_BANDS],
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, macro scores, IoU and Brier of `field` against `labels`
/// (0 = no road, 1..5 = class), over the pixels of `eval_mask` if given.
///
/// Macro scores average over the classes present in the labels. IoU
/// compares the road and no-road split unless `macro_iou` is set; with no
/// road in either it is 1.
pub fn pixel_metrics(
    field: &ProbabilityField,
    labels: &GeoRaster<u8>,
    eval_mask: Option<&GeoRaster<u8>>,
    options: PixelMetricOptions,
) -> Result<MetricSet, EvaluationError> {
    if !labels.same_grid(field.raster()) || labels.bands().len() != 1 {
        return Err(EvaluationError::Grid);
    }
    if let Some(m) = eval_mask {
        if !m.same_grid(field.raster()) || m.bands().len() != 1 {
            return Err(EvaluationError::Grid);
        }
    }
    if let Some((index, &value)) = labels.band(0).iter().enumerate().find(|(_, &v)| v as usize > NUM_CLASSES) {
        return Err(EvaluationError::Label { value, index });
    }
    let mut confusion = [[0u64; NUM_PROB_BANDS]; NUM_PROB_BANDS];
    let mut squared = 0f64;
    let (mut road_both, mut road_either) = (0u64, 0u64);
    let mut n = 0u64;
    for (i, &label) in labels.band(0).iter().enumerate() {
        if eval_mask.is_some_and(|m| m.band(0)[i] == 0) {
            continue;
        }
        n += 1;
        let truth = label_to_band(label);
        let pred = field.argmax(i);
        confusion[truth][pred] += 1;
        for k in 0..NUM_PROB_BANDS {
            let y = if k == truth { 1.0 } else { 0.0 };
            squared += (field.band(k)[i] as f64 - y).powi(2);
        }
        let (t, p) = (truth != NO_ROAD_BAND, pred != NO_ROAD_BAND);
        road_both += (t && p) as u64;
        road_either += (t || p) as u64;
    }
    if n == 0 {
        return Err(EvaluationError::Empty);
    }
    let classes: [ClassCounts; NUM_PROB_BANDS] = std::array::from_fn(|k| {
        let support: u64 = confusion[k].iter().sum();
        let predicted: u64 = (0..NUM_PROB_BANDS).map(|t| confusion[t][k]).sum();
        let tp = confusion[k][k];
        ClassCounts { support, tp, fp: predicted - tp, fn_: support - tp }
    });
    let counted: Vec<usize> = (0..NUM_PROB_BANDS)
        .filter(|&k| classes[k].support > 0 && !(options.exclude_no_road && k == NO_ROAD_BAND))
        .collect();
    let macro_of = |f: &dyn Fn(&ClassCounts) -> f64| {
        if counted.is_empty() {
            0.0
        } else {
            counted.iter().map(|&k| f(&classes[k])).sum::<f64>() / counted.len() as f64
        }
    };
    let precision = |c: &ClassCounts| ratio(c.tp, c.tp + c.fp);
    let recall = |c: &ClassCounts| ratio(c.tp, c.tp + c.fn_);
    let f1 = |c: &ClassCounts| {
        let (p, r) = (precision(c), recall(c));
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    };
    let iou = if options.macro_iou {
        macro_of(&|c| ratio(c.tp, c.tp + c.fp + c.fn_))
    } else if road_either == 0 {
        1.0
    } else {
        ratio(road_both, road_either)
    };
    Ok(MetricSet {
        n,
        accuracy: ratio(classes.iter().map(|c| c.tp).sum(), n),
        macro_f1: macro_of(&f1),
        macro_precision: macro_of(&precision),
        macro_recall: macro_of(&recall),
        iou,
        brier: squared / n as f64,
        classes,
    })
}

impl MetricSet {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (name, v) in [
            ("accuracy", self.accuracy),
            ("macro F1", self.macro_f1),
            ("macro precision", self.macro_precision),
            ("macro recall", self.macro_recall),
            ("IoU", self.iou),
            ("Brier", self.brier),
        ] {
            writeln!(s, "{name:<16} {v:>8.4}").unwrap();
        }
        writeln!(s, "{:<16} {:>8}", "pixels", self.n).unwrap();
        s
    }
}

#[cfg(test)]
mod tests;
