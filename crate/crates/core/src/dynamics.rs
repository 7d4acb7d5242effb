//! How the match between one unit and one attribute evolves over training.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dissect::{Analysis, DissectConfig};
use crate::envs::EnvKind;
use crate::error::{invalid, Error, Result};
use crate::policy::{PortablePolicy, UnitAddr};
use crate::runtime::{episode_seed, rollout, ResolvedSchedule};
use crate::trace::{CheckpointEntry, CheckpointSeries, RolloutRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub kind: EnvKind,
    pub episodes: usize,
    pub seed: u64,
    pub max_steps: u64,
    /// Checkpoint metric reported next to each discrepancy.
    pub metric: String,
    pub dissect: DissectConfig,
}

impl DynamicsConfig {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            kind,
            episodes: 5,
            seed: 0,
            max_steps: kind.timeout() as u64,
            metric: "mean_return".to_string(),
            dissect: DissectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsPoint {
    pub iteration: u64,
    /// Mean over episodes of the summed spectrogram discrepancy.
    pub discrepancy: f64,
    /// Same, with each episode divided by its frame count.
    pub discrepancy_per_frame: f64,
    pub metric: Option<f64>,
    /// Episodes long enough to analyse.
    pub episodes_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningDynamics {
    pub attribute: String,
    /// Unit matched in the final checkpoint, held fixed for every point.
    pub unit: UnitAddr,
    pub points: Vec<DynamicsPoint>,
    /// Checkpoints that could not be evaluated, with the reason.
    pub skipped: Vec<(u64, String)>,
}

fn record_rollouts(policy: &PortablePolicy, cfg: &DynamicsConfig) -> Result<Vec<RolloutRecord>> {
    let schedule = ResolvedSchedule::empty();
    (0..cfg.episodes as u64)
        .map(|i| rollout(policy, cfg.kind, episode_seed(cfg.seed, i), cfg.max_steps, &schedule, i))
        .collect()
}

/// Rollouts long enough for one STFT frame; errors if none are.
fn usable(records: Vec<RolloutRecord>, cfg: &DissectConfig) -> Result<Vec<RolloutRecord>> {
    let min = cfg.stft.window_len;
    let longest = records.iter().map(RolloutRecord::len).max().unwrap_or(0);
    let kept: Vec<_> = records.into_iter().filter(|r| r.len() >= min).collect();
    if kept.is_empty() {
        return Err(Error::TooShort { len: longest, min });
    }
    Ok(kept)
}

/// Matches `attribute` on the final checkpoint, then measures that unit's
/// mean discrepancy on fresh rollouts of every checkpoint. Checkpoints
/// whose policy fails to load or whose episodes are all too short are
/// skipped and reported.
pub fn learning_dynamics<F>(
    checkpoints: &CheckpointSeries,
    attribute: &str,
    cfg: &DynamicsConfig,
    mut load: F,
) -> Result<LearningDynamics>
where
    F: FnMut(&CheckpointEntry) -> Result<PortablePolicy>,
{
    if checkpoints.len() < 2 {
        return Err(invalid(format!("learning dynamics needs at least 2 checkpoints, got {}", checkpoints.len())));
    }
    if cfg.episodes == 0 {
        return Err(invalid("episodes must be positive"));
    }
    let last = checkpoints.last().expect("non-empty");
    let final_policy = load(last)?;
    let final_records = usable(record_rollouts(&final_policy, cfg)?, &cfg.dissect)?;
    let unit = Analysis::new(&final_records, &cfg.dissect)?.frequency_match(attribute)?.unit;

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for entry in checkpoints.entries() {
        let it = entry.training_iteration;
        let measured = (|| -> Result<(f64, f64, usize)> {
            let policy = load(entry)?;
            if !policy.contains(unit) {
                return Err(invalid(format!("checkpoint has no unit {unit}")));
            }
            let records = usable(record_rollouts(&policy, cfg)?, &cfg.dissect)?;
            let analysis = Analysis::new(&records, &cfg.dissect)?;
            let d = analysis.mean_discrepancy(unit, attribute)?;
            let per_frame = analysis.mean_discrepancy_per_frame(unit, attribute)?;
            Ok((d, per_frame, records.len()))
        })();
        match measured {
            Ok((discrepancy, discrepancy_per_frame, episodes_used)) => points.push(DynamicsPoint {
                iteration: it,
                discrepancy,
                discrepancy_per_frame,
                metric: entry.eval_metrics.get(&cfg.metric).copied(),
                episodes_used,
            }),
            Err(e) => {
                log::warn!("checkpoint {it} skipped: {e}");
                skipped.push((it, e.to_string()));
            }
        }
    }
    Ok(LearningDynamics { attribute: attribute.to_string(), unit, points, skipped })
}
