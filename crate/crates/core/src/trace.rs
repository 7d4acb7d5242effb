//! Rollout recordings and checkpoint series.
//!
//! Kinematic channel names live once on the [`RolloutRecord`]; every
//! [`StepRecord`] stores its values in that order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::policy::UnitAddr;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    /// Post-nonlinearity outputs per hidden layer, overrides included.
    pub activations: Vec<Vec<f64>>,
    /// Values aligned with [`RolloutRecord::kinematic_names`].
    pub kinematics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecord {
    episode_id: u64,
    dt: f64,
    layer_sizes: Vec<usize>,
    kinematic_names: Vec<String>,
    steps: Vec<StepRecord>,
}

/// What to pull out of a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesSelector {
    Unit(UnitAddr),
    Kinematic(String),
}

impl RolloutRecord {
    pub fn new(
        episode_id: u64,
        dt: f64,
        layer_sizes: Vec<usize>,
        kinematic_names: Vec<String>,
        steps: Vec<StepRecord>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt must be positive and finite"));
        }
        if steps.is_empty() {
            return Err(invalid("a rollout record needs at least one step"));
        }
        for (k, name) in kinematic_names.iter().enumerate() {
            if kinematic_names[..k].contains(name) {
                return Err(invalid(format!("duplicate kinematic channel {name:?}")));
            }
        }
        let mut prev: Option<u64> = None;
        for (row, s) in steps.iter().enumerate() {
            if prev.is_some_and(|p| s.t <= p) {
                return Err(invalid(format!("step {row}: t = {} does not increase", s.t)));
            }
            prev = Some(s.t);
            if s.activations.len() != layer_sizes.len() {
                return Err(Error::DimensionMismatch {
                    what: format!("layer count at step {row}"),
                    expected: layer_sizes.len(),
                    found: s.activations.len(),
                });
            }
            for (l, (z, &n)) in s.activations.iter().zip(&layer_sizes).enumerate() {
                if z.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: format!("layer {l} width at step {row}"),
                        expected: n,
                        found: z.len(),
                    });
                }
            }
            if s.kinematics.len() != kinematic_names.len() {
                return Err(Error::DimensionMismatch {
                    what: format!("kinematic channels at step {row}"),
                    expected: kinematic_names.len(),
                    found: s.kinematics.len(),
                });
            }
            if let Some(i) = s.kinematics.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("kinematic {:?} at step {row}", kinematic_names[i])));
            }
        }
        Ok(Self { episode_id, dt, layer_sizes, kinematic_names, steps })
    }

    pub fn episode_id(&self) -> u64 {
        self.episode_id
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn kinematic_names(&self) -> &[String] {
        &self.kinematic_names
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn kinematic_index(&self, name: &str) -> Option<usize> {
        self.kinematic_names.iter().position(|n| n == name)
    }

    fn valid_channels(&self) -> Vec<String> {
        let mut v = self.kinematic_names.clone();
        for (l, n) in self.layer_sizes.iter().enumerate() {
            v.push(format!("unit:{l}:0..{}", n));
        }
        v
    }

    pub fn extract_series(&self, selector: &SeriesSelector) -> Result<Vec<f64>> {
        match selector {
            SeriesSelector::Kinematic(name) => {
                let k = self.kinematic_index(name).ok_or_else(|| Error::UnknownChannel {
                    name: name.clone(),
                    valid: self.valid_channels(),
                })?;
                Ok(self.steps.iter().map(|s| s.kinematics[k]).collect())
            }
            SeriesSelector::Unit(a) => {
                if a.layer >= self.layer_sizes.len() || a.unit >= self.layer_sizes[a.layer] {
                    return Err(Error::UnknownChannel {
                        name: format!("unit:{}:{}", a.layer, a.unit),
                        valid: self.valid_channels(),
                    });
                }
                Ok(self.steps.iter().map(|s| s.activations[a.layer][a.unit]).collect())
            }
        }
    }

    pub fn kinematic_series(&self, name: &str) -> Result<Vec<f64>> {
        self.extract_series(&SeriesSelector::Kinematic(name.to_string()))
    }

    pub fn unit_series(&self, addr: UnitAddr) -> Result<Vec<f64>> {
        self.extract_series(&SeriesSelector::Unit(addr))
    }
}

/// One saved training checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub training_iteration: u64,
    pub policy_path: String,
    pub eval_metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointSeries {
    entries: Vec<CheckpointEntry>,
}

impl CheckpointSeries {
    pub fn new(entries: Vec<CheckpointEntry>) -> Result<Self> {
        if entries.windows(2).any(|w| w[1].training_iteration <= w[0].training_iteration) {
            return Err(invalid("checkpoint iterations must be strictly increasing"));
        }
        Ok(Self { entries })
    }

    pub fn push(&mut self, entry: CheckpointEntry) -> Result<()> {
        if self.entries.last().is_some_and(|l| entry.training_iteration <= l.training_iteration) {
            return Err(invalid("checkpoint iterations must be strictly increasing"));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[CheckpointEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&CheckpointEntry> {
        self.entries.last()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn record(n: usize) -> RolloutRecord {
        let steps = (0..n)
            .map(|t| StepRecord {
                t: t as u64,
                observation: vec![t as f64],
                action: vec![0.0],
                activations: vec![vec![0.0, 1.0, 2.0], (0..6).map(|i| (i * 100 + t) as f64).collect()],
                kinematics: vec![t as f64 * 0.5, -1.0],
            })
            .collect();
        RolloutRecord::new(3, 0.05, vec![3, 6], vec!["speed".into(), "yaw_rate".into()], steps).unwrap()
    }

    #[test]
    fn kinematic_series_has_step_count() {
        let r = record(100);
        let s = r.kinematic_series("speed").unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(s[10], 5.0);
    }

    #[test]
    fn unit_series_indexes_layer_then_unit() {
        let r = record(10);
        let s = r.unit_series(UnitAddr::new(1, 5)).unwrap();
        assert_eq!(s, (0..10).map(|t| (500 + t) as f64).collect::<Vec<_>>());
    }

    #[test]
    fn unknown_channel_lists_valid_ones() {
        let r = record(4);
        match r.kinematic_series("foo") {
            Err(Error::UnknownChannel { name, valid }) => {
                assert_eq!(name, "foo");
                assert!(valid.contains(&"speed".to_string()));
            }
            other => panic!("{other:?}"),
        }
        assert!(r.unit_series(UnitAddr::new(2, 0)).is_err());
        assert!(r.unit_series(UnitAddr::new(0, 3)).is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(RolloutRecord::new(0, 0.05, vec![], vec![], vec![]).is_err());
        let mut steps = record(3).steps().to_vec();
        steps[2].t = 1;
        assert!(RolloutRecord::new(0, 0.05, vec![3, 6], vec!["a".into(), "b".into()], steps.clone()).is_err());
        steps[2].t = 2;
        steps[1].kinematics.pop();
        assert!(matches!(
            RolloutRecord::new(0, 0.05, vec![3, 6], vec!["a".into(), "b".into()], steps),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(RolloutRecord::new(0, 0.0, vec![3, 6], vec!["a".into(), "b".into()], record(2).steps().to_vec()).is_err());
    }

    #[test]
    fn checkpoint_iterations_increase() {
        let e = |i| CheckpointEntry { training_iteration: i, policy_path: String::new(), eval_metrics: BTreeMap::new() };
        assert!(CheckpointSeries::new(vec![e(0), e(1), e(5)]).is_ok());
        assert!(CheckpointSeries::new(vec![e(0), e(0)]).is_err());
        let mut s = CheckpointSeries::default();
        s.push(e(2)).unwrap();
        assert!(s.push(e(1)).is_err());
    }
}
