//! Checkpoint directories: `train.json`, `ckpt_{generation:05}.policy.json`
//! and `metrics.jsonl` with one line per generation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use dissector_core::policy::PortablePolicy;
use dissector_core::trace::{CheckpointEntry, CheckpointSeries};
use dissector_core::trainer::Checkpoint;
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_string, Error, Result};
use crate::policyfile::{load_policy, save_policy};

pub const MANIFEST_FILE: &str = "train.json";
pub const METRICS_FILE: &str = "metrics.jsonl";

pub fn checkpoint_file_name(generation: u64) -> String {
    format!("ckpt_{generation:05}.policy.json")
}

/// What produced a checkpoint directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub env: String,
    pub seed: u64,
    pub population: usize,
    pub sigma: f64,
    pub step_size: f64,
    pub generations: u64,
    pub episodes_per_eval: usize,
    pub eval_episodes: usize,
    pub hidden: Vec<usize>,
    pub activation: String,
    pub output_activation: String,
}

#[derive(Serialize, Deserialize)]
struct MetricsLine {
    generation: u64,
    policy: String,
    metrics: BTreeMap<String, f64>,
}

pub struct CheckpointWriter {
    dir: PathBuf,
    metrics: File,
}

impl CheckpointWriter {
    /// Creates `dir` and starts a fresh `metrics.jsonl`.
    pub fn create(dir: &Path, manifest: &TrainManifest) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        write_string(&dir.join(MANIFEST_FILE), &text)?;
        let path = dir.join(METRICS_FILE);
        let metrics = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self { dir: dir.to_path_buf(), metrics })
    }

    pub fn write(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let name = checkpoint_file_name(ckpt.generation);
        save_policy(&ckpt.policy, &self.dir.join(&name))?;
        let line = MetricsLine { generation: ckpt.generation, policy: name, metrics: ckpt.metrics.to_map() };
        let mut text = serde_json::to_string(&line).expect("metrics serialize");
        text.push('\n');
        let path = self.dir.join(METRICS_FILE);
        self.metrics.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))
    }
}

pub fn read_manifest(dir: &Path) -> Result<Option<TrainManifest>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    serde_json::from_str(&read_to_string(&path)?).map(Some).map_err(|e| Error::format(&path, e.to_string()))
}

/// Reads `metrics.jsonl`. Policy paths in the series are relative to `dir`.
pub fn read_checkpoints(dir: &Path) -> Result<CheckpointSeries> {
    let path = dir.join(METRICS_FILE);
    let text = read_to_string(&path)?;
    let mut series = CheckpointSeries::default();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line_err = |msg: String| Error::Line { path: path.clone(), line: i + 1, msg };
        let m: MetricsLine = serde_json::from_str(line).map_err(|e| line_err(e.to_string()))?;
        series
            .push(CheckpointEntry { training_iteration: m.generation, policy_path: m.policy, eval_metrics: m.metrics })
            .map_err(|e| line_err(e.to_string()))?;
    }
    Ok(series)
}

pub fn load_checkpoint_policy(dir: &Path, entry: &CheckpointEntry) -> Result<PortablePolicy> {
    load_policy(&dir.join(&entry.policy_path))
}
