//! JSON text frames exchanged with control panels.
//!
//! Client to server:
//! `{"type":"apply","cmd":"brake","k":-0.6,"duration":100}`, `{"type":"release","cmd":"brake"}`,
//! `{"type":"pause"}`, `{"type":"resume"}`, `{"type":"reset","seed":7}`.
//!
//! Server to client: `state` every tick, `ack` / `reject` in reply to
//! commands, `error` for unparseable input, and one `snapshot` on join.

use dissector_core::dissect::StimulationEvokedMap;
use dissector_core::runtime::{Ack, SessionEvent, SessionEventKind, Snapshot, StateFrame};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::presetfile::preset_to_value;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Apply {
        cmd: String,
        #[serde(default)]
        k: Option<f64>,
        /// Ticks; absent means latched until released.
        #[serde(default)]
        duration: Option<u64>,
    },
    Release {
        cmd: String,
    },
    Pause,
    Resume,
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

pub fn state_value(f: &StateFrame) -> Value {
    let (x, y, theta) = f.pose;
    let kin: Map<String, Value> = f.kinematics.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "type": "state",
        "tick": f.tick,
        "mode": f.mode.name(),
        "env": {"kind": f.env.name(), "x": x, "y": y, "theta": theta},
        "kin": kin,
        "action": f.action,
        "overrides": f.overrides.iter().map(|o| json!({
            "cmd": o.command, "layer": o.layer, "unit": o.unit, "value": o.value,
        })).collect::<Vec<_>>(),
        "z_sample": f.z_sample.iter().map(|(a, v)| json!([a.layer, a.unit, v])).collect::<Vec<_>>(),
        "hud": {"human_involvement": f.human_involvement, "return": f.episode_return},
        "termination": f.termination.map(|t| t.name()),
    })
}

fn event_value(e: &SessionEvent) -> Value {
    let (kind, mut extra) = match &e.kind {
        SessionEventKind::Started { seed } => ("started", json!({"seed": seed})),
        SessionEventKind::Applied { command, duration, human } => (
            "applied",
            json!({
                "cmd": command.name,
                "entries": command.entries.iter().map(|c| json!({"attr": c.attribute, "k": c.k})).collect::<Vec<_>>(),
                "duration": duration,
                "human": human,
            }),
        ),
        SessionEventKind::Released { command } => ("released", json!({"cmd": command})),
        SessionEventKind::Expired { command } => ("expired", json!({"cmd": command})),
        SessionEventKind::Cancelled { command } => ("cancelled", json!({"cmd": command})),
        SessionEventKind::Paused => ("paused", json!({})),
        SessionEventKind::Resumed => ("resumed", json!({})),
        SessionEventKind::Finished { reason } => ("finished", json!({"reason": reason.map(|r| r.name())})),
    };
    let obj = extra.as_object_mut().expect("object");
    obj.insert("tick".into(), json!(e.tick));
    obj.insert("event".into(), json!(kind));
    extra
}

pub fn snapshot_value(s: &Snapshot, map: &StimulationEvokedMap) -> Value {
    json!({
        "type": "snapshot",
        "seed": s.seed,
        "state": state_value(&s.frame),
        "trajectory": s.trajectory.iter().map(|(x, y, t)| json!([x, y, t])).collect::<Vec<_>>(),
        "primitives": map.primitives().iter().map(|p| json!({
            "attr": p.attribute, "layer": p.unit.layer, "unit": p.unit.unit, "rho": p.rho, "omega_bin": p.omega_star_bin,
        })).collect::<Vec<_>>(),
        "preset": preset_to_value(&s.preset),
        "events": s.events.iter().map(event_value).collect::<Vec<_>>(),
    })
}

pub fn ack_value(a: &Ack) -> Value {
    json!({
        "type": "ack",
        "cmd": a.command,
        "activates_at": a.activates_at,
        "overrides": a.overrides.iter().map(|o| json!({"layer": o.layer, "unit": o.unit, "value": o.value})).collect::<Vec<_>>(),
    })
}

pub fn release_ack_value(cmd: &str, released: bool) -> Value {
    json!({"type": "ack", "cmd": cmd, "released": released})
}

pub fn simple_ack_value(what: &str) -> Value {
    json!({"type": "ack", "cmd": what})
}

pub fn reject_value(cmd: Option<&str>, reason: &str) -> Value {
    json!({"type": "reject", "cmd": cmd, "reason": reason})
}

pub fn error_value(reason: &str) -> Value {
    json!({"type": "error", "reason": reason})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_client_message() {
        assert_eq!(
            parse_client_message(r#"{"type":"apply","cmd":"brake","k":-0.6,"duration":100}"#).unwrap(),
            ClientMessage::Apply { cmd: "brake".into(), k: Some(-0.6), duration: Some(100) }
        );
        assert_eq!(
            parse_client_message(r#"{"type":"apply","cmd":"brake"}"#).unwrap(),
            ClientMessage::Apply { cmd: "brake".into(), k: None, duration: None }
        );
        assert_eq!(
            parse_client_message(r#"{"type":"release","cmd":"brake"}"#).unwrap(),
            ClientMessage::Release { cmd: "brake".into() }
        );
        assert_eq!(parse_client_message(r#"{"type":"pause"}"#).unwrap(), ClientMessage::Pause);
        assert_eq!(parse_client_message(r#"{"type":"resume"}"#).unwrap(), ClientMessage::Resume);
        assert_eq!(parse_client_message(r#"{"type":"reset","seed":7}"#).unwrap(), ClientMessage::Reset { seed: Some(7) });
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "{", r#"{"type":"fly"}"#, r#"{"type":"apply"}"#, r#"{"type":"apply","cmd":"x","duration":-1}"#] {
            assert!(parse_client_message(bad).is_err(), "{bad}");
        }
    }
}
