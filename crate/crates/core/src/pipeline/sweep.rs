use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::manifest::{file_hash, read_manifest};
use super::run::{run_pipeline, RunFiles};
use super::{Mode, PipelineConfig, PipelineError};
use crate::assignment::{classify_network, AssignmentParams};
use crate::evaluation::line_metrics;
use crate::io;

pub const SWEEP_FILE: &str = "sweep.csv";
const CELL_CACHE: &str = "sweep_cells.jsonl";

/// Values to try per assignment parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub delta: Vec<f64>,
    pub min_length: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Parses `delta=5,10,20 l=40,80 beta=4,6,10`. Items are separated by
/// whitespace or `;`; `δ` and `β` are accepted as names.
pub fn parse_sweep_spec(spec: &str) -> Result<SweepGrid, PipelineError> {
    let mut grid = SweepGrid::default();
    for item in spec.split(|c: char| c.is_whitespace() || c == ';').filter(|s| !s.is_empty()) {
        let (name, values) = item
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("sweep item {item:?} is not name=v1,v2,..")))?;
        let target = match name.trim() {
            "delta" | "δ" => &mut grid.delta,
            "l" | "min_length" => &mut grid.min_length,
            "beta" | "β" => &mut grid.beta,
            other => return Err(PipelineError::Config(format!("unknown sweep parameter {other:?}"))),
        };
        for v in values.split(',').filter(|v| !v.trim().is_empty()) {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| PipelineError::Config(format!("sweep value {v:?} of {name} is not a number")))?;
            if !(x.is_finite() && x > 0.0) {
                return Err(PipelineError::Config(format!("sweep value {x} of {name} must be positive")));
            }
            target.push(x);
        }
    }
    Ok(grid)
}

/// One parameter combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub delta: f64,
    pub min_length: f64,
    pub beta: f64,
}

impl SweepCell {
    pub fn params(&self, base: &AssignmentParams) -> AssignmentParams {
        AssignmentParams { delta: self.delta, min_length: self.min_length, beta: self.beta, ..*base }
    }
}

/// The base cell, then one factor varied at a time with the others held at
/// their base values. Duplicates are dropped.
pub fn sweep_cells(base: &AssignmentParams, grid: &SweepGrid) -> Vec<SweepCell> {
    let center = SweepCell { delta: base.delta, min_length: base.min_length, beta: base.beta };
    let mut cells = vec![center];
    let variants = grid
        .delta
        .iter()
        .map(|&delta| SweepCell { delta, ..center })
        .chain(grid.min_length.iter().map(|&min_length| SweepCell { min_length, ..center }))
        .chain(grid.beta.iter().map(|&beta| SweepCell { beta, ..center }));
    for c in variants {
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    cells
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta_m: f64,
    pub min_length_m: f64,
    pub beta_m: f64,
    pub completeness: Option<f64>,
    pub correctness: Option<f64>,
    pub sections: usize,
}

#[derive(Serialize, Deserialize)]
struct CachedCell {
    key: String,
    row: SweepRow,
}

/// Whether the outputs of an earlier run with the same configuration are
/// still on disk and unchanged.
fn reusable(cfg: &PipelineConfig, files: &RunFiles, needed: &[&Path]) -> bool {
    let same_config = std::fs::read_to_string(&files.config).is_ok_and(|t| t == cfg.to_toml());
    if !same_config || !files.manifest.exists() {
        return false;
    }
    let Ok(entries) = read_manifest(&files.manifest) else { return false };
    let recorded: BTreeMap<String, String> = entries.into_iter().flat_map(|e| e.outputs).collect();
    needed.iter().all(|p| {
        let key = p.display().to_string();
        match (recorded.get(&key), file_hash(p)) {
            (Some(a), Ok(b)) => *a == b,
            _ => false,
        }
    })
}

/// Runs the pipeline once (or reuses a matching earlier run when `resume`
/// is set), then classifies and evaluates the network for every cell and
/// writes `sweep.csv`. Finished cells are cached in `sweep_cells.jsonl`
/// keyed by their parameters and input hashes, so an interrupted sweep
/// resumes where it stopped.
pub fn run_sweep(cfg: &PipelineConfig, grid: &SweepGrid, resume: bool) -> Result<(PathBuf, Vec<SweepRow>), PipelineError> {
    cfg.validate()?;
    let files = RunFiles::new(&cfg.io.output_dir);
    let gt = match cfg.mode {
        Mode::Synthetic => files.ground_truth.clone(),
        Mode::Files => cfg.io.ground_truth.clone().ok_or_else(|| PipelineError::Config("a sweep needs io.ground_truth".into()))?,
    };
    let needed: Vec<&Path> = vec![&files.roads, &files.field, &gt];
    if resume && reusable(cfg, &files, &needed) {
        log::info!("reusing pipeline outputs in {}", files.dir.display());
    } else {
        run_pipeline(cfg)?;
    }
    let inputs_hash = {
        let mut h = Sha256::new();
        for p in &needed {
            h.update(file_hash(p)?);
        }
        h.update(serde_json::to_vec(&(cfg.evaluation.buffer, cfg.assignment.end_trim)).expect("serializes"));
        hex::encode(h.finalize())
    };
    let cache_path = files.dir.join(CELL_CACHE);
    let mut cache: BTreeMap<String, SweepRow> = BTreeMap::new();
    if resume {
        if let Ok(text) = std::fs::read_to_string(&cache_path) {
            // a truncated last line from an interrupted run is skipped
            for c in text.lines().filter_map(|l| serde_json::from_str::<CachedCell>(l).ok()) {
                cache.insert(c.key, c.row);
            }
        }
    } else if cache_path.exists() {
        std::fs::remove_file(&cache_path).map_err(PipelineError::file(&cache_path))?;
    }
    let net = io::read_road_network(&files.roads)?;
    let field = io::read_probability_field(&files.field)?;
    let truth = io::read_classified_network(&gt)?;
    let mut rows = Vec::new();
    for cell in sweep_cells(&cfg.assignment, grid) {
        let key = hex::encode(Sha256::digest(
            serde_json::to_vec(&(&inputs_hash, cell)).expect("serializes"),
        ));
        if let Some(row) = cache.get(&key) {
            rows.push(row.clone());
            continue;
        }
        let params = cell.params(&cfg.assignment);
        params.validate()?;
        let assigned = classify_network(&net, &field, &params)?;
        let metrics = line_metrics(&truth, &assigned.network, cfg.evaluation.buffer)?;
        let row = SweepRow {
            delta_m: cell.delta,
            min_length_m: cell.min_length,
            beta_m: cell.beta,
            completeness: metrics.weighted_completeness,
            correctness: metrics.weighted_correctness,
            sections: assigned.network.len(),
        };
        log::info!("sweep cell {cell:?}: {:?} / {:?}", row.completeness, row.correctness);
        let mut f = OpenOptions::new().create(true).append(true).open(&cache_path).map_err(PipelineError::file(&cache_path))?;
        let line = serde_json::to_string(&CachedCell { key, row: row.clone() }).expect("serializes");
        writeln!(f, "{line}").map_err(PipelineError::file(&cache_path))?;
        rows.push(row);
    }
    let out = files.dir.join(SWEEP_FILE);
    let csv_err = |source| PipelineError::Csv { path: out.clone(), source };
    let mut w = csv::Writer::from_path(&out).map_err(csv_err)?;
    for row in &rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(PipelineError::file(&out))?;
    Ok((out, rows))
}
