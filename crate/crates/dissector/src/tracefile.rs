//! Line-delimited rollout logs: one header object, then one object per step.
//!
//! ```text
//! {"schema":1,"dt":0.05,"layers":[64,64],"kinematics":["speed",...],"episode_id":0}
//! {"t":0,"obs":[...],"act":[...],"z":[[...],[...]],"s":{"speed":0.0,...}}
//! ```
//!
//! Reals are written in shortest round-trip form, so reading a file back
//! gives bit-identical values.

use std::fmt::Write as _;
use std::path::Path;

use dissector_core::trace::{RolloutRecord, StepRecord};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{read_to_string, write_string, Error, Result};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: u32,
    dt: f64,
    layers: Vec<usize>,
    kinematics: Vec<String>,
    #[serde(default)]
    episode_id: u64,
}

#[derive(Serialize)]
struct StepOut<'a> {
    t: u64,
    obs: &'a [f64],
    act: &'a [f64],
    z: &'a [Vec<f64>],
    s: Map<String, Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepIn {
    t: u64,
    obs: Vec<f64>,
    act: Vec<f64>,
    z: Vec<Vec<f64>>,
    s: Map<String, Value>,
}

fn all_finite<'a>(mut xs: impl Iterator<Item = &'a f64>) -> bool {
    xs.all(|x| x.is_finite())
}

/// Serializes a record to the log format. Non-finite values are rejected
/// since they have no JSON representation.
pub fn rollout_to_string(record: &RolloutRecord) -> std::result::Result<String, String> {
    let header = Header {
        schema: SCHEMA,
        dt: record.dt(),
        layers: record.layer_sizes().to_vec(),
        kinematics: record.kinematic_names().to_vec(),
        episode_id: record.episode_id(),
    };
    let mut out = serde_json::to_string(&header).map_err(|e| e.to_string())?;
    out.push('\n');
    for step in record.steps() {
        if !all_finite(step.observation.iter().chain(&step.action).chain(step.activations.iter().flatten())) {
            return Err(format!("step {} holds a non-finite value", step.t));
        }
        let s = record
            .kinematic_names()
            .iter()
            .zip(&step.kinematics)
            .map(|(name, v)| (name.clone(), Value::from(*v)))
            .collect();
        let line = StepOut { t: step.t, obs: &step.observation, act: &step.action, z: &step.activations, s };
        out.push_str(&serde_json::to_string(&line).map_err(|e| e.to_string())?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_rollout(record: &RolloutRecord, path: &Path) -> Result<()> {
    let text = rollout_to_string(record).map_err(|msg| Error::format(path, msg))?;
    write_string(path, &text)
}

pub fn read_rollout(path: &Path) -> Result<RolloutRecord> {
    parse_rollout(&read_to_string(path)?, path)
}

/// Parses log text; `path` is only used in error messages.
pub fn parse_rollout(text: &str, path: &Path) -> Result<RolloutRecord> {
    let line_err = |line: usize, msg: String| Error::Line { path: path.to_path_buf(), line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| line_err(1, "empty file; expected a header line".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| line_err(1, format!("bad header: {e}")))?;
    if header.schema != SCHEMA {
        return Err(line_err(1, format!("unsupported schema {}; expected {SCHEMA}", header.schema)));
    }
    let mut steps = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let step: StepIn = serde_json::from_str(line).map_err(|e| line_err(n, e.to_string()))?;
        if step.z.len() != header.layers.len() {
            return Err(line_err(n, format!("{} activation layers, header declares {}", step.z.len(), header.layers.len())));
        }
        for (l, (z, &w)) in step.z.iter().zip(&header.layers).enumerate() {
            if z.len() != w {
                return Err(line_err(n, format!("layer {l} has {} activations, header declares {w}", z.len())));
            }
        }
        if step.s.len() != header.kinematics.len() {
            return Err(line_err(
                n,
                format!("{} kinematic channels, header declares {}", step.s.len(), header.kinematics.len()),
            ));
        }
        let kinematics = header
            .kinematics
            .iter()
            .map(|name| match step.s.get(name) {
                Some(v) => v.as_f64().ok_or_else(|| line_err(n, format!("channel {name:?} is not a number"))),
                None => Err(line_err(n, format!("missing kinematic channel {name:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        match dims {
            None => dims = Some((step.obs.len(), step.act.len())),
            Some(d) if d != (step.obs.len(), step.act.len()) => {
                return Err(line_err(n, format!("obs/act lengths {:?} differ from earlier steps {d:?}", (step.obs.len(), step.act.len()))));
            }
            Some(_) => {}
        }
        steps.push(StepRecord { t: step.t, observation: step.obs, action: step.act, activations: step.z, kinematics });
    }
    if steps.is_empty() {
        return Err(Error::format(path, "record has no steps"));
    }
    RolloutRecord::new(header.episode_id, header.dt, header.layers, header.kinematics, steps)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Long-format CSV of a spectrogram: one row per (frame, bin).
pub fn spectrogram_csv(sg: &dissector_core::spectral::Spectrogram, cfg: &dissector_core::StftConfig, dt: f64) -> String {
    let mut out = String::from("frame,start_step,time_s,bin,freq_hz,power\n");
    for f in 0..sg.frames() {
        let start = f * cfg.hop;
        for b in 0..sg.bins() {
            let _ = writeln!(
                out,
                "{f},{start},{},{b},{},{}",
                start as f64 * dt,
                b as f64 / (cfg.window_len as f64 * dt),
                sg.get(f, b)
            );
        }
    }
    out
}
