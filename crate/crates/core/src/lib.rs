//! Spectral dissection of small control policies: find the hidden units
//! whose activity oscillates with a kinematic attribute, then drive that
//! attribute by pinning the unit.
//!
//! Builds without `std` (with `alloc`); the `std` feature adds rayon
//! parallelism.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dissect;
pub mod dynamics;
pub mod envs;
pub mod error;
mod par;
pub mod policy;
pub mod rng;
pub mod runtime;
pub mod spectral;
pub mod trace;
pub mod trainer;

pub use dissect::{
    build_evoked_map, frequency_match, resolve_command, Analysis, BehaviorCommand, DissectConfig, FrequencyCriterion,
    MotorPrimitive, PhaseMean, StimulationEvokedMap,
};
pub use envs::{EnvKind, EnvPreset, EnvState, Termination};
pub use error::{Error, Result};
pub use policy::{Activation, PolicyShape, PortablePolicy, StimulationOverride, UnitAddr};
pub use runtime::{rollout, ResolvedSchedule, Session, SessionConfig, StimulationSchedule};
pub use spectral::{spectrogram, stft, StftConfig};
pub use trace::{CheckpointEntry, CheckpointSeries, RolloutRecord};
