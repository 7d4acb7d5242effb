use std::time::Duration;

use dissector::server::{spawn, ServerHandle};
use dissector_core::dissect::{DissectConfig, MotorPrimitive, StimulationEvokedMap};
use dissector_core::envs::{EnvKind, EnvPreset};
use dissector_core::policy::{Activation, PolicyShape, UnitAddr};
use dissector_core::runtime::{Session, SessionConfig};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn map() -> StimulationEvokedMap {
    let prim = |attr: &str, layer, unit, rho| MotorPrimitive {
        attribute: String::from(attr),
        unit: UnitAddr::new(layer, unit),
        rho,
        phase: 0.0,
        omega_star_bin: 1,
        mean_discrepancy: 1.0,
    };
    StimulationEvokedMap::new(
        "test".into(),
        DissectConfig::default(),
        vec![prim("yaw_rate", 0, 1, 0.8), prim("v_x", 1, 3, -0.5), prim("v_y", 1, 0, 0.4), prim("yaw", 0, 5, 1.0)],
        vec![],
        vec![],
    )
    .unwrap()
}

async fn start(tick_hz: f64) -> ServerHandle {
    let policy = PolicyShape {
        obs_dim: 5,
        hidden: vec![8, 8],
        act_dim: 3,
        hidden_activation: Activation::Tanh,
        output_activation: Activation::Tanh,
    }
    .init(2)
    .unwrap();
    let mut cfg = SessionConfig::new(EnvKind::PlanarAnt, 4);
    cfg.max_steps = 100_000;
    let session = Session::new(policy, map(), EnvPreset::builtin(EnvKind::PlanarAnt), cfg).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    spawn(session, map(), listener, tick_hz).unwrap()
}

async fn connect(h: &ServerHandle, role: &str) -> Ws {
    let (ws, _) = connect_async(format!("ws://{}/ws?role={role}", h.addr)).await.unwrap();
    ws
}

/// Next text frame as JSON; `None` once the server closes the socket.
async fn next(ws: &mut Ws) -> Option<Value> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("server went quiet")?;
        match msg {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => {}
        }
    }
}

/// Skips state frames until a frame of another type arrives.
async fn reply(ws: &mut Ws) -> Value {
    loop {
        let v = next(ws).await.expect("socket closed while waiting for a reply");
        if v["type"] != "state" {
            return v;
        }
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn state_where(ws: &mut Ws, pred: impl Fn(&Value) -> bool) -> Value {
    loop {
        let v = next(ws).await.expect("socket closed");
        if v["type"] == "state" && pred(&v) {
            return v;
        }
    }
}

#[tokio::test]
async fn join_gets_a_snapshot_then_consecutive_states() {
    let h = start(500.0).await;
    let mut ws = connect(&h, "observer").await;
    let snap = next(&mut ws).await.unwrap();
    assert_eq!(snap["type"], "snapshot");
    assert_eq!(snap["seed"], 4);
    assert_eq!(snap["primitives"].as_array().unwrap().len(), 4);
    assert_eq!(snap["preset"]["env"], "ant");
    assert_eq!(snap["events"][0]["event"], "started");
    let tick0 = snap["state"]["tick"].as_u64().unwrap();
    assert_eq!(snap["trajectory"].as_array().unwrap().len() as u64, tick0 + 1);
    for expect in tick0 + 1..tick0 + 21 {
        let s = next(&mut ws).await.unwrap();
        assert_eq!(s["type"], "state");
        assert_eq!(s["tick"].as_u64().unwrap(), expect);
        let kin = s["kin"].as_object().unwrap();
        assert_eq!(kin.keys().collect::<Vec<_>>(), ["v_x", "v_y", "speed", "yaw", "yaw_rate"]);
        // 4 mapped units and 8 more by variance.
        assert_eq!(s["z_sample"].as_array().unwrap().len(), 12);
        assert_eq!(s["z_sample"][0], json!([0, 1, s["z_sample"][0][2]]));
    }
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn only_one_controller_and_observers_are_read_only() {
    let h = start(200.0).await;
    let mut first = connect(&h, "controller").await;
    assert_eq!(next(&mut first).await.unwrap()["type"], "snapshot");
    let mut second = connect(&h, "controller").await;
    let r = next(&mut second).await.unwrap();
    assert_eq!(r["type"], "reject");
    assert!(r["reason"].as_str().unwrap().contains("controller"));
    assert!(next(&mut second).await.is_none());

    let mut obs = connect(&h, "observer").await;
    assert_eq!(next(&mut obs).await.unwrap()["type"], "snapshot");
    send(&mut obs, json!({"type": "apply", "cmd": "spin"})).await;
    assert_eq!(reply(&mut obs).await["type"], "reject");

    send(&mut first, json!({"type": "apply", "cmd": "spin"})).await;
    let ack = reply(&mut first).await;
    assert_eq!(ack["type"], "ack");
    assert_eq!(ack["overrides"], json!([{"layer": 0, "unit": 1, "value": 1.0}]));
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn malformed_input_keeps_the_connection() {
    let h = start(200.0).await;
    let mut ws = connect(&h, "controller").await;
    next(&mut ws).await.unwrap();
    for bad in ["not json", r#"{"type":"warp"}"#, r#"{"type":"apply"}"#, r#"{"type":"apply","cmd":"spin","duration":-3}"#] {
        ws.send(Message::Text(bad.into())).await.unwrap();
        let r = reply(&mut ws).await;
        assert_eq!(r["type"], "error", "{bad}");
    }
    ws.send(Message::Binary(vec![1u8, 2, 3].into())).await.unwrap();
    assert_eq!(reply(&mut ws).await["type"], "error");

    send(&mut ws, json!({"type": "apply", "cmd": "warp_drive"})).await;
    let r = reply(&mut ws).await;
    assert_eq!(r["type"], "reject");
    assert!(r["reason"].as_str().unwrap().contains("spin_reverse"));
    send(&mut ws, json!({"type": "apply", "cmd": "spin"})).await;
    assert_eq!(reply(&mut ws).await["type"], "ack");
    send(&mut ws, json!({"type": "apply", "cmd": "spin_reverse"})).await;
    let r = reply(&mut ws).await;
    assert_eq!(r["type"], "reject");
    assert!(r["reason"].as_str().unwrap().contains("unit (0, 1)"));
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn apply_and_release_show_up_in_state() {
    let h = start(300.0).await;
    let mut ws = connect(&h, "controller").await;
    next(&mut ws).await.unwrap();
    send(&mut ws, json!({"type": "apply", "cmd": "move_y", "k": 0.2})).await;
    let ack = reply(&mut ws).await;
    let at = ack["activates_at"].as_u64().unwrap();
    let s = state_where(&mut ws, |s| s["tick"].as_u64().unwrap() > at).await;
    assert_eq!(s["overrides"].as_array().unwrap().len(), 2);
    assert_eq!(s["overrides"][0]["cmd"], "move_y");
    assert_eq!(s["overrides"][0]["value"], json!(0.2 / 0.4));
    let z: Vec<&Value> = s["z_sample"].as_array().unwrap().iter().filter(|z| z[0] == 1 && z[1] == 0).collect();
    assert_eq!(z[0][2], json!(0.2 / 0.4));

    send(&mut ws, json!({"type": "release", "cmd": "move_y"})).await;
    assert_eq!(reply(&mut ws).await, json!({"type": "ack", "cmd": "move_y", "released": true}));
    state_where(&mut ws, |s| s["overrides"].as_array().unwrap().is_empty()).await;
    send(&mut ws, json!({"type": "release", "cmd": "move_y"})).await;
    assert_eq!(reply(&mut ws).await["released"], false);

    send(&mut ws, json!({"type": "apply", "cmd": "stop", "duration": 3})).await;
    let at = reply(&mut ws).await["activates_at"].as_u64().unwrap();
    state_where(&mut ws, |s| s["tick"].as_u64().unwrap() >= at + 3 && s["overrides"].as_array().unwrap().is_empty()).await;
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn controller_disconnect_releases_everything() {
    let h = start(300.0).await;
    let mut ctl = connect(&h, "controller").await;
    next(&mut ctl).await.unwrap();
    let mut obs = connect(&h, "observer").await;
    next(&mut obs).await.unwrap();
    send(&mut ctl, json!({"type": "apply", "cmd": "spin"})).await;
    assert_eq!(reply(&mut ctl).await["type"], "ack");
    send(&mut ctl, json!({"type": "apply", "cmd": "stop"})).await;
    assert_eq!(reply(&mut ctl).await["type"], "ack");
    state_where(&mut obs, |s| s["overrides"].as_array().unwrap().len() == 2).await;
    ctl.close(None).await.unwrap();
    drop(ctl);
    state_where(&mut obs, |s| s["overrides"].as_array().unwrap().is_empty()).await;
    // The seat is free again.
    let mut again = connect(&h, "controller").await;
    assert_eq!(next(&mut again).await.unwrap()["type"], "snapshot");
    send(&mut again, json!({"type": "apply", "cmd": "spin"})).await;
    assert_eq!(reply(&mut again).await["type"], "ack");
    h.shutdown().await.unwrap();
}

#[tokio::test]
async fn reset_restarts_the_episode() {
    let h = start(300.0).await;
    let mut ws = connect(&h, "controller").await;
    next(&mut ws).await.unwrap();
    send(&mut ws, json!({"type": "apply", "cmd": "spin"})).await;
    reply(&mut ws).await;
    state_where(&mut ws, |s| s["hud"]["human_involvement"].as_u64().unwrap() > 3).await;
    send(&mut ws, json!({"type": "pause"})).await;
    assert_eq!(reply(&mut ws).await, json!({"type": "ack", "cmd": "pause"}));
    send(&mut ws, json!({"type": "reset", "seed": 9})).await;
    assert_eq!(reply(&mut ws).await["cmd"], "reset");
    let s = state_where(&mut ws, |s| s["tick"].as_u64().unwrap() < 5).await;
    assert_eq!(s["mode"], "running");
    assert!(s["overrides"].as_array().unwrap().is_empty());
    let mut obs = connect(&h, "observer").await;
    let snap = next(&mut obs).await.unwrap();
    assert_eq!(snap["seed"], 9);
    assert_eq!(snap["events"][0], json!({"seed": 9, "tick": 0, "event": "started"}));
    h.shutdown().await.unwrap();
}

/// Replays the event log of a snapshot into the number of ticks with a human override.
fn involvement_from_events(snap: &Value) -> u64 {
    let now = snap["state"]["tick"].as_u64().unwrap();
    let events = snap["events"].as_array().unwrap();
    let mut covered = std::collections::BTreeSet::new();
    for (i, e) in events.iter().enumerate() {
        if e["event"] != "applied" || e["human"] != true {
            continue;
        }
        let start = e["tick"].as_u64().unwrap();
        let end = events[i + 1..]
            .iter()
            .find(|l| (l["event"] == "released" || l["event"] == "expired") && l["cmd"] == e["cmd"])
            .map_or(now, |l| l["tick"].as_u64().unwrap());
        covered.extend(start..end);
    }
    covered.len() as u64
}

#[tokio::test]
async fn scripted_client_involvement_and_reconnect() {
    let h = start(400.0).await;
    let mut ws = connect(&h, "controller").await;
    next(&mut ws).await.unwrap();
    let script: [(&str, Value); 8] = [
        ("apply", json!({"type": "apply", "cmd": "spin", "duration": 25})),
        ("apply", json!({"type": "apply", "cmd": "move_y"})),
        ("release", json!({"type": "release", "cmd": "move_y"})),
        ("apply", json!({"type": "apply", "cmd": "stop", "k": -0.3, "duration": 40})),
        ("apply", json!({"type": "apply", "cmd": "yaw", "k": 0.1})),
        ("release", json!({"type": "release", "cmd": "yaw"})),
        ("apply", json!({"type": "apply", "cmd": "spin_reverse"})),
        ("release", json!({"type": "release", "cmd": "spin_reverse"})),
    ];
    let mut observed = 0u64;
    for (i, (_, msg)) in script.iter().enumerate() {
        send(&mut ws, msg.clone()).await;
        let r = reply(&mut ws).await;
        assert_eq!(r["type"], "ack", "{msg}: {r}");
        let target = r.get("activates_at").and_then(Value::as_u64).unwrap_or(0) + 10 + 7 * i as u64;
        let s = state_where(&mut ws, |s| s["tick"].as_u64().unwrap() >= target).await;
        observed = s["tick"].as_u64().unwrap();
        if i == 3 {
            // Mid-episode reconnect of an observer renders from the snapshot alone.
            let mut late = connect(&h, "observer").await;
            let snap = next(&mut late).await.unwrap();
            assert_eq!(snap["type"], "snapshot");
            assert!(snap["state"]["tick"].as_u64().unwrap() >= observed);
            assert_eq!(snap["trajectory"].as_array().unwrap().len() as u64, snap["state"]["tick"].as_u64().unwrap() + 1);
            let follow = next(&mut late).await.unwrap();
            assert_eq!(follow["tick"].as_u64().unwrap(), snap["state"]["tick"].as_u64().unwrap() + 1);
        }
    }
    assert!(observed > 60);
    send(&mut ws, json!({"type": "pause"})).await;
    reply(&mut ws).await;
    let mut obs = connect(&h, "observer").await;
    let snap = next(&mut obs).await.unwrap();
    assert_eq!(snap["state"]["mode"], "paused");
    let hud = snap["state"]["hud"]["human_involvement"].as_u64().unwrap();
    assert!(hud > 0);
    assert_eq!(hud, involvement_from_events(&snap));
    h.shutdown().await.unwrap();
}
