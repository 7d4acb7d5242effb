use std::path::Path;

use dissector::tracefile::{parse_rollout, read_rollout, rollout_to_string, write_rollout};
use dissector::Error;
use dissector_core::envs::EnvKind;
use dissector_core::policy::PolicyShape;
use dissector_core::rng::SplitMix64;
use dissector_core::runtime::{rollout, ResolvedSchedule};
use dissector_core::trace::{RolloutRecord, StepRecord};
use proptest::prelude::*;

fn ant_record(steps: u64, seed: u64) -> RolloutRecord {
    let policy = PolicyShape::desk(5, 3).init(seed).unwrap();
    rollout(&policy, EnvKind::PlanarAnt, seed, steps, &ResolvedSchedule::empty(), 3).unwrap()
}

fn awkward_record(seed: u64, len: usize) -> RolloutRecord {
    let mut rng = SplitMix64::new(seed);
    let mut val = move || {
        let m = rng.normal();
        // Mix magnitudes so that shortest round-trip formatting is exercised.
        m * 10f64.powi((rng.next_u64() % 40) as i32 - 20)
    };
    let steps = (0..len as u64)
        .map(|t| StepRecord {
            t: 2 * t + 1,
            observation: (0..3).map(|_| val()).collect(),
            action: vec![val()],
            activations: vec![(0..2).map(|_| val()).collect(), vec![val(), -0.0, f64::MIN_POSITIVE]],
            kinematics: vec![val(), val()],
        })
        .collect();
    RolloutRecord::new(seed, 0.05, vec![2, 3], vec!["a".into(), "b".into()], steps).unwrap()
}

#[test]
fn five_hundred_steps_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/ep.jsonl");
    let record = ant_record(500, 4);
    assert_eq!(record.len(), 500);
    write_rollout(&record, &path).unwrap();
    let back = read_rollout(&path).unwrap();
    assert_eq!(back, record);
    // Byte-identical on rewrite.
    let again = dir.path().join("again.jsonl");
    write_rollout(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn two_steps_make_three_lines() {
    let text = rollout_to_string(&ant_record(2, 0)).unwrap();
    assert_eq!(text.lines().count(), 3);
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["schema"], 1);
    assert_eq!(header["layers"], serde_json::json!([64, 64]));
    assert_eq!(header["kinematics"], serde_json::json!(["v_x", "v_y", "speed", "yaw", "yaw_rate"]));
    let step: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    let keys: Vec<&str> = step["s"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["v_x", "v_y", "speed", "yaw", "yaw_rate"]);
}

#[test]
fn truncated_line_reports_its_number() {
    let text = rollout_to_string(&ant_record(10, 1)).unwrap();
    let cut = &text[..text.len() - 40];
    match parse_rollout(cut, Path::new("cut.jsonl")) {
        Err(Error::Line { line, .. }) => assert_eq!(line, 11),
        other => panic!("expected a line error, got {other:?}"),
    }
}

#[test]
fn dimension_mismatches_are_line_errors() {
    let text = rollout_to_string(&ant_record(5, 2)).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();

    let mut bad_header = lines.clone();
    bad_header[0] = bad_header[0].replace("[64,64]", "[64,63]");
    let err = parse_rollout(&bad_header.join("\n"), Path::new("x")).unwrap_err();
    assert!(matches!(err, Error::Line { line: 2, .. }), "{err}");

    let mut step: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    step["s"].as_object_mut().unwrap().remove("yaw");
    lines[3] = step.to_string();
    let err = parse_rollout(&lines.join("\n"), Path::new("x")).unwrap_err();
    assert!(matches!(err, Error::Line { line: 4, .. }), "{err}");
    assert!(err.to_string().contains("kinematic"));
}

#[test]
fn header_only_and_empty_files_rejected() {
    let text = rollout_to_string(&ant_record(1, 2)).unwrap();
    let header = text.lines().next().unwrap();
    assert!(matches!(parse_rollout(header, Path::new("x")), Err(Error::Format { .. })));
    assert!(matches!(parse_rollout("", Path::new("x")), Err(Error::Line { line: 1, .. })));
}

#[test]
fn decreasing_time_rejected() {
    let text = rollout_to_string(&ant_record(3, 2)).unwrap();
    let swapped = text.replacen("{\"t\":1,", "{\"t\":0,", 1);
    assert!(parse_rollout(&swapped, Path::new("x")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn arbitrary_reals_round_trip(seed in any::<u64>(), len in 1usize..30) {
        let record = awkward_record(seed, len);
        let text = rollout_to_string(&record).unwrap();
        let back = parse_rollout(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back.len(), record.len());
        for (a, b) in back.steps().iter().zip(record.steps()) {
            let bits = |s: &StepRecord| -> Vec<u64> {
                s.observation.iter().chain(&s.action).chain(s.activations.iter().flatten()).chain(&s.kinematics).map(|v| v.to_bits()).collect()
            };
            prop_assert_eq!(bits(a), bits(b));
        }
        prop_assert_eq!(back, record);
    }
}
