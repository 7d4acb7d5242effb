//! Environment preset files.
//!
//! ```json
//! {"name":"car","env":"car","constants":{"dt":0.05},"attributes":["speed"],
//!  "commands":[{"name":"brake","entries":[{"attr":"speed","k":-0.6}]}],
//!  "keys":[{"key":"s","command":"brake"}]}
//! ```

use std::path::Path;

use dissector_core::dissect::BehaviorCommand;
use dissector_core::envs::{EnvKind, EnvPreset, KeyBinding};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{read_to_string, write_string, Error, Result};

#[derive(Serialize, Deserialize)]
struct PresetFile {
    name: String,
    env: String,
    #[serde(default)]
    constants: Map<String, Value>,
    #[serde(default)]
    attributes: Vec<String>,
    commands: Vec<CommandFile>,
    #[serde(default)]
    keys: Vec<KeyFile>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct CommandFile {
    pub name: String,
    pub entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct EntryFile {
    pub attr: String,
    pub k: f64,
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    key: String,
    command: String,
}

pub(crate) fn command_to_file(c: &BehaviorCommand) -> CommandFile {
    CommandFile {
        name: c.name.clone(),
        entries: c.entries.iter().map(|e| EntryFile { attr: e.attribute.clone(), k: e.k }).collect(),
    }
}

pub(crate) fn command_from_file(c: CommandFile) -> BehaviorCommand {
    BehaviorCommand::new(c.name, c.entries.into_iter().map(|e| (e.attr, e.k)).collect())
}

pub fn preset_to_value(p: &EnvPreset) -> Value {
    let file = PresetFile {
        name: p.name.clone(),
        env: p.kind.name().to_string(),
        constants: p.constants.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect(),
        attributes: p.attributes.clone(),
        commands: p.commands.iter().map(command_to_file).collect(),
        keys: p.key_bindings.iter().map(|k| KeyFile { key: k.key.clone(), command: k.command.clone() }).collect(),
    };
    serde_json::to_value(file).expect("preset serializes")
}

pub fn parse_preset(text: &str) -> std::result::Result<EnvPreset, String> {
    let file: PresetFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let kind: EnvKind = file.env.parse().map_err(|e: dissector_core::Error| e.to_string())?;
    let constants = file
        .constants
        .into_iter()
        .map(|(k, v)| v.as_f64().map(|x| (k.clone(), x)).ok_or_else(|| format!("constant {k:?} is not a number")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let commands: Vec<BehaviorCommand> = file.commands.into_iter().map(command_from_file).collect();
    for (i, c) in commands.iter().enumerate() {
        if commands[..i].iter().any(|d| d.name == c.name) {
            return Err(format!("command {:?} defined twice", c.name));
        }
    }
    let key_bindings: Vec<KeyBinding> = file.keys.into_iter().map(|k| KeyBinding { key: k.key, command: k.command }).collect();
    for (i, k) in key_bindings.iter().enumerate() {
        if key_bindings[..i].iter().any(|o| o.key == k.key) {
            return Err(format!("key {:?} bound twice", k.key));
        }
        if !commands.iter().any(|c| c.name == k.command) {
            return Err(format!("key {:?} bound to unknown command {:?}", k.key, k.command));
        }
    }
    let attributes = if file.attributes.is_empty() { kind.kinematic_names() } else { file.attributes };
    Ok(EnvPreset { name: file.name, kind, constants, attributes, commands, key_bindings })
}

pub fn load_preset(path: &Path) -> Result<EnvPreset> {
    parse_preset(&read_to_string(path)?).map_err(|msg| Error::format(path, msg))
}

pub fn save_preset(p: &EnvPreset, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&preset_to_value(p)).expect("preset serializes");
    text.push('\n');
    write_string(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_presets_round_trip() {
        for kind in [EnvKind::PointCar, EnvKind::PlanarAnt] {
            let p = EnvPreset::builtin(kind);
            assert_eq!(parse_preset(&preset_to_value(&p).to_string()).unwrap(), p);
        }
    }

    #[test]
    fn key_collision_rejected() {
        let text = r#"{"name":"x","env":"car","commands":[{"name":"brake","entries":[{"attr":"speed","k":-0.6}]}],
            "keys":[{"key":"s","command":"brake"},{"key":"s","command":"brake"}]}"#;
        assert!(parse_preset(text).unwrap_err().contains("bound twice"));
    }
}
