//! Defaults for every subcommand, optionally overridden by a TOML file.
//! Command-line flags override the file; the file overrides built-ins.
//!
//! ```toml
//! seed = 7                 # else DISSECTOR_SEED, else 0
//!
//! [policy]
//! hidden = [64, 64]
//! activation = "tanh"
//! output_activation = "tanh"
//!
//! [train]
//! population = 32
//! sigma = 0.1
//! step_size = 0.05
//! generations = 300
//! episodes_per_eval = 2
//! eval_episodes = 20
//!
//! [rollout]
//! episodes = 5
//! max_steps = 0            # 0 = environment timeout
//!
//! [dissect]
//! window = 64
//! hop = 16
//! criterion = "as_written" # or "shared_energy"
//! phase_mean = "circular"  # or "arithmetic"
//! standardize = true
//!
//! [analyze]
//! episodes = 5
//! metric = "mean_return"
//!
//! [serve]
//! host = "127.0.0.1"
//! port = 8080
//! tick_hz = 20.0
//! top_k = 8
//! full_dump = false
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{read_to_string, Error, Result};

pub const SEED_ENV: &str = "DISSECTOR_SEED";

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub policy: PolicySection,
    pub train: TrainSection,
    pub rollout: RolloutSection,
    pub dissect: DissectSection,
    pub analyze: AnalyzeSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub hidden: Vec<usize>,
    pub activation: String,
    pub output_activation: String,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self { hidden: vec![64, 64], activation: "tanh".into(), output_activation: "tanh".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub population: usize,
    pub sigma: f64,
    pub step_size: f64,
    pub generations: u64,
    pub episodes_per_eval: usize,
    pub eval_episodes: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = dissector_core::trainer::EsConfig::default();
        Self {
            population: d.population,
            sigma: d.sigma,
            step_size: d.step_size,
            generations: d.generations,
            episodes_per_eval: d.episodes_per_eval,
            eval_episodes: d.eval_episodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutSection {
    pub episodes: usize,
    pub max_steps: u64,
}

impl Default for RolloutSection {
    fn default() -> Self {
        Self { episodes: 5, max_steps: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DissectSection {
    pub window: usize,
    pub hop: usize,
    pub criterion: String,
    pub phase_mean: String,
    pub standardize: bool,
}

impl Default for DissectSection {
    fn default() -> Self {
        Self { window: 64, hop: 16, criterion: "as_written".into(), phase_mean: "circular".into(), standardize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub episodes: usize,
    pub metric: String,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self { episodes: 5, metric: "mean_return".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub host: String,
    pub port: u16,
    pub tick_hz: f64,
    pub top_k: usize,
    pub full_dump: bool,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: 8080, tick_hz: 20.0, top_k: 8, full_dump: false }
    }
}

impl Config {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?).map_err(|msg| Error::format(path, msg))
    }

    /// Flag, then file, then `DISSECTOR_SEED`, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = Config::parse("seed = 3\n[train]\ngenerations = 20\n").unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.train.generations, 20);
        assert_eq!(c.train.population, 32);
        assert_eq!(c.rollout.episodes, 5);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(Config::parse("[train]\ngenrations = 20\n").is_err());
    }

    #[test]
    fn flag_beats_file() {
        let c = Config { seed: Some(3), ..Config::default() };
        assert_eq!(c.resolve_seed(Some(9)).unwrap(), 9);
        assert_eq!(c.resolve_seed(None).unwrap(), 3);
    }
}
