//! Stimulation-evoked map files.

use std::path::Path;

use dissector_core::dissect::{DissectConfig, FrequencyCriterion, MotorPrimitive, PhaseMean, StimulationEvokedMap};
use dissector_core::policy::UnitAddr;
use dissector_core::spectral::StftConfig;
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_string, Error, Result};

pub const SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MapFile {
    schema: u32,
    policy_sha: String,
    stft: StftFile,
    criterion: String,
    #[serde(default = "circular")]
    phase_mean: String,
    #[serde(default = "yes")]
    standardize: bool,
    primitives: Vec<PrimitiveFile>,
    excluded: Vec<[usize; 2]>,
    #[serde(default)]
    failures: Vec<FailureFile>,
}

fn circular() -> String {
    PhaseMean::Circular.name().to_string()
}

fn yes() -> bool {
    true
}

#[derive(Serialize, Deserialize)]
struct StftFile {
    m: usize,
    h: usize,
}

#[derive(Serialize, Deserialize)]
struct PrimitiveFile {
    attr: String,
    layer: usize,
    unit: usize,
    rho: f64,
    omega_bin: usize,
    dis: f64,
    #[serde(default)]
    phase: f64,
}

#[derive(Serialize, Deserialize)]
struct FailureFile {
    attr: String,
    reason: String,
}

pub fn map_to_string(map: &StimulationEvokedMap) -> String {
    let file = MapFile {
        schema: SCHEMA,
        policy_sha: map.policy_fingerprint.clone(),
        stft: StftFile { m: map.config.stft.window_len, h: map.config.stft.hop },
        criterion: map.config.criterion.name().to_string(),
        phase_mean: map.config.phase_mean.name().to_string(),
        standardize: map.config.standardize,
        primitives: map
            .primitives()
            .iter()
            .map(|p| PrimitiveFile {
                attr: p.attribute.clone(),
                layer: p.unit.layer,
                unit: p.unit.unit,
                rho: p.rho,
                omega_bin: p.omega_star_bin,
                dis: p.mean_discrepancy,
                phase: p.phase,
            })
            .collect(),
        excluded: map.excluded().iter().map(|a| [a.layer, a.unit]).collect(),
        failures: map.failures.iter().map(|(attr, reason)| FailureFile { attr: attr.clone(), reason: reason.clone() }).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("map values are finite");
    s.push('\n');
    s
}

pub fn parse_map(text: &str) -> std::result::Result<StimulationEvokedMap, String> {
    let file: MapFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if file.schema != SCHEMA {
        return Err(format!("unsupported schema {}; expected {SCHEMA}", file.schema));
    }
    let config = DissectConfig {
        stft: StftConfig::new(file.stft.m, file.stft.h).map_err(|e| e.to_string())?,
        criterion: file.criterion.parse::<FrequencyCriterion>().map_err(|e| e.to_string())?,
        phase_mean: file.phase_mean.parse::<PhaseMean>().map_err(|e| e.to_string())?,
        standardize: file.standardize,
    };
    let primitives = file
        .primitives
        .into_iter()
        .map(|p| MotorPrimitive {
            attribute: p.attr,
            unit: UnitAddr::new(p.layer, p.unit),
            rho: p.rho,
            phase: p.phase,
            omega_star_bin: p.omega_bin,
            mean_discrepancy: p.dis,
        })
        .collect();
    let excluded = file.excluded.into_iter().map(|[l, u]| UnitAddr::new(l, u)).collect();
    let failures = file.failures.into_iter().map(|f| (f.attr, f.reason)).collect();
    StimulationEvokedMap::new(file.policy_sha, config, primitives, excluded, failures).map_err(|e| e.to_string())
}

pub fn save_map(map: &StimulationEvokedMap, path: &Path) -> Result<()> {
    write_string(path, &map_to_string(map))
}

pub fn load_map(path: &Path) -> Result<StimulationEvokedMap> {
    parse_map(&read_to_string(path)?).map_err(|msg| Error::format(path, msg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StimulationEvokedMap {
        let prim = MotorPrimitive {
            attribute: "speed".into(),
            unit: UnitAddr::new(0, 17),
            rho: -0.93,
            phase: 3.0,
            omega_star_bin: 3,
            mean_discrepancy: 12.5,
        };
        StimulationEvokedMap::new(
            "abc".into(),
            DissectConfig::default(),
            vec![prim],
            vec![UnitAddr::new(1, 4)],
            vec![("yaw".into(), "constant".into())],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let m = sample();
        assert_eq!(parse_map(&map_to_string(&m)).unwrap(), m);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = r#"{"schema":1,"policy_sha":"x","stft":{"m":64,"h":16},"criterion":"as_written",
            "primitives":[{"attr":"speed","layer":0,"unit":17,"rho":-0.93,"omega_bin":3,"dis":1.0}],"excluded":[[1,4]]}"#;
        let m = parse_map(text).unwrap();
        assert_eq!(m.config, DissectConfig::default());
        assert_eq!(m.primitive("speed").unwrap().unit, UnitAddr::new(0, 17));
    }

    #[test]
    fn primitive_on_excluded_unit_rejected() {
        let text = r#"{"schema":1,"policy_sha":"x","stft":{"m":64,"h":16},"criterion":"as_written",
            "primitives":[{"attr":"speed","layer":1,"unit":4,"rho":0.5,"omega_bin":3,"dis":1.0}],"excluded":[[1,4]]}"#;
        assert!(parse_map(text).is_err());
    }
}
