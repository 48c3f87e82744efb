use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiment::Cell;
use crate::models::ModelConfig;
use crate::training::{EpochRecord, RunResult, TrainConfig};

/// Identifies a dataset by its manifest bytes and training level.
pub fn dataset_digest(manifest: &Path, level: f64) -> Result<String> {
    let mut h = Sha256::new();
    h.update(fs::read(manifest)?);
    h.update(level.to_le_bytes());
    Ok(hex::encode(h.finalize()))
}

#[derive(Serialize)]
struct RunKey<'a> {
    dataset_digest: &'a str,
    cell: &'a Cell,
    seed: u64,
    model: &'a ModelConfig,
    batch_size: usize,
    epochs: usize,
    initial_lr: f64,
    lr_decay: f64,
    weight_decay: f64,
}

/// Deterministic id of one run. The seed list of `train` is not part of it,
/// so a run is reused by any sweep that includes its seed.
pub fn run_id(dataset_digest: &str, cell: &Cell, seed: u64, model: &ModelConfig, train: &TrainConfig) -> String {
    let key = RunKey {
        dataset_digest,
        cell,
        seed,
        model,
        batch_size: train.batch_size,
        epochs: train.epochs,
        initial_lr: train.initial_lr,
        lr_decay: train.lr_decay,
        weight_decay: train.weight_decay,
    };
    let bytes = serde_json::to_vec(&key).expect("run key serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// A persisted run, sufficient to reproduce it and to rebuild reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub dataset: String,
    pub dataset_digest: String,
    pub level: f64,
    pub cell: Cell,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub result: RunResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub id: String,
    pub dataset: String,
    pub cell: Cell,
    pub seed: u64,
    pub error: String,
}

/// `runs/<id>.json`, `runs/<id>.history.jsonl` and `failures/<id>.json`
/// under one output directory.
#[derive(Clone, Debug)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_path(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(format!("{id}.json"))
    }

    pub fn history_path(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(format!("{id}.history.jsonl"))
    }

    fn failure_path(&self, id: &str) -> PathBuf {
        self.root.join("failures").join(format!("{id}.json"))
    }

    /// A previously completed run, if any.
    pub fn load(&self, id: &str) -> Result<Option<RunRecord>> {
        let path = self.run_path(id);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(path)?)?))
    }

    /// Writes history then record, each via rename, so a record on disk
    /// always has its history next to it.
    pub fn save(&self, record: &RunRecord, history: &[EpochRecord]) -> Result<()> {
        let mut lines = Vec::new();
        for e in history {
            serde_json::to_writer(&mut lines, e)?;
            lines.push(b'\n');
        }
        write_atomic(&self.history_path(&record.id), &lines)?;
        write_atomic(&self.run_path(&record.id), &serde_json::to_vec_pretty(record)?)?;
        let stale = self.failure_path(&record.id);
        if stale.exists() {
            fs::remove_file(stale)?;
        }
        Ok(())
    }

    pub fn save_failure(&self, failure: &FailureRecord) -> Result<()> {
        write_atomic(&self.failure_path(&failure.id), &serde_json::to_vec_pretty(failure)?)
    }

    pub fn records(&self) -> Result<Vec<RunRecord>> {
        let mut out: Vec<RunRecord> = read_json_dir(&self.root.join("runs"))?;
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    pub fn failures(&self) -> Result<Vec<FailureRecord>> {
        let mut out: Vec<FailureRecord> = read_json_dir(&self.root.join("failures"))?;
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }
}

fn read_json_dir<R: for<'de> Deserialize<'de>>(dir: &Path) -> Result<Vec<R>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        if name.ends_with(".json") && !name.starts_with('.') {
            out.push(serde_json::from_slice(&fs::read(&path)?)?);
        }
    }
    Ok(out)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().unwrap_or_default().to_string_lossy()
    ));
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(bytes)?;
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}
