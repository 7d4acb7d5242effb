//! Stimulation schedule files for headless `play`.
//!
//! ```json
//! {"entries":[{"start":100,"duration":100,"cmd":"brake","k":-0.6},
//!             {"start":300,"duration":50,"command":{"name":"mix","entries":[{"attr":"speed","k":0.4}]}}]}
//! ```
//! An entry names a preset command or map attribute with `cmd` (and
//! optional `k`), or spells the command out inline with `command`.

use std::path::Path;

use dissector_core::dissect::StimulationEvokedMap;
use dissector_core::envs::EnvPreset;
use dissector_core::runtime::{find_command, ScheduledCommand, StimulationSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_string, Error, Result};
use crate::presetfile::{command_from_file, command_to_file, CommandFile};

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    start: u64,
    duration: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cmd: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    command: Option<CommandFile>,
}

pub fn parse_schedule(
    text: &str,
    preset: &EnvPreset,
    map: &StimulationEvokedMap,
) -> std::result::Result<StimulationSchedule, String> {
    let file: ScheduleFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let entries = file
        .entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let command = match (e.cmd, e.command) {
                (Some(name), None) => find_command(preset, map, &name, e.k).map_err(|err| format!("entry {i}: {err}"))?,
                (None, Some(c)) if e.k.is_none() => command_from_file(c),
                _ => return Err(format!("entry {i}: give either \"cmd\" (with optional \"k\") or an inline \"command\"")),
            };
            if e.duration == 0 {
                return Err(format!("entry {i}: duration must be at least 1 tick"));
            }
            Ok(ScheduledCommand { start_tick: e.start, duration: e.duration, command })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(StimulationSchedule { entries })
}

pub fn load_schedule(path: &Path, preset: &EnvPreset, map: &StimulationEvokedMap) -> Result<StimulationSchedule> {
    parse_schedule(&read_to_string(path)?, preset, map).map_err(|msg| Error::format(path, msg))
}

/// Writes a schedule with every command inline, so it replays without a preset.
pub fn schedule_to_string(schedule: &StimulationSchedule) -> String {
    let file = ScheduleFile {
        entries: schedule
            .entries
            .iter()
            .map(|e| EntryFile {
                start: e.start_tick,
                duration: e.duration,
                cmd: None,
                k: None,
                command: Some(command_to_file(&e.command)),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("schedule serializes");
    s.push('\n');
    s
}

pub fn save_schedule(schedule: &StimulationSchedule, path: &Path) -> Result<()> {
    write_string(path, &schedule_to_string(schedule))
}
