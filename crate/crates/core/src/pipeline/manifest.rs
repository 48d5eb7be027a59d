use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

/// One line of a stage manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    /// Input path to SHA-256 of its content.
    pub inputs: BTreeMap<String, String>,
    /// Output path to SHA-256 of its content.
    pub outputs: BTreeMap<String, String>,
    /// SHA-256 of the stage parameters as JSON.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub wall_time_ms: u64,
}

pub fn file_hash(path: &Path) -> Result<String, PipelineError> {
    let mut file = std::fs::File::open(path).map_err(|_| PipelineError::MissingInput(path.to_path_buf()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(PipelineError::file(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    let file = std::fs::File::open(path).map_err(PipelineError::file(path))?;
    BufReader::new(file)
        .lines()
        .map(|line| {
            let line = line.map_err(PipelineError::file(path))?;
            serde_json::from_str(&line).map_err(|e| {
                PipelineError::File { path: path.to_path_buf(), source: std::io::Error::new(std::io::ErrorKind::InvalidData, e) }
            })
        })
        .collect()
}

/// Collects hashes and timing for one stage run.
#[derive(Debug)]
pub struct Recorder {
    entry: ManifestEntry,
    start: Instant,
}

impl Recorder {
    pub fn new(stage: &str, params: &impl Serialize, seed: Option<u64>) -> Self {
        let json = serde_json::to_vec(params).expect("parameters serialize");
        Recorder {
            entry: ManifestEntry {
                stage: stage.to_string(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                config_hash: hex::encode(Sha256::digest(&json)),
                seed,
                wall_time_ms: 0,
            },
            start: Instant::now(),
        }
    }

    /// Hashes an input; a missing file is reported by name.
    pub fn input(&mut self, path: &Path) -> Result<(), PipelineError> {
        let h = file_hash(path)?;
        self.entry.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), PipelineError> {
        let h = file_hash(path)?;
        self.entry.outputs.insert(path.display().to_string(), h);
        Ok(())
    }

    /// Appends the entry to `manifest` (if given) and returns it.
    pub fn finish(mut self, manifest: Option<&Path>) -> Result<ManifestEntry, PipelineError> {
        self.entry.wall_time_ms = self.start.elapsed().as_millis() as u64;
        if let Some(path) = manifest {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(PipelineError::file(dir))?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(PipelineError::file(path))?;
            let line = serde_json::to_string(&self.entry).expect("entry serializes");
            writeln!(f, "{line}").map_err(PipelineError::file(path))?;
        }
        Ok(self.entry)
    }
}

/// Fails with the first path that does not exist.
pub(crate) fn require(paths: &[&Path]) -> Result<(), PipelineError> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(PipelineError::MissingInput(p.to_path_buf())),
        None => Ok(()),
    }
}
