use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::policy::UnitAddr;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A structural invariant or precondition on an input value does not hold.
    InvalidInput(String),
    /// Vector or grid dimensions disagree.
    DimensionMismatch { what: String, expected: usize, found: usize },
    /// A series is shorter than one analysis window.
    TooShort { len: usize, min: usize },
    /// Two stimulations target the same hidden unit.
    Conflict { unit: UnitAddr, detail: String },
    /// A kinematic channel or unit address that the record does not carry.
    UnknownChannel { name: String, valid: Vec<String> },
    /// Phase is undefined because the complex magnitude is ~0.
    UndefinedPhase,
    /// |rho| is below the reliability gate; stimulation sign is meaningless.
    UnreliablePrimitive { rho: f64, gate: f64 },
    /// Every hidden unit is constant across all episodes.
    AllUnitsDead,
    /// A behaviour command could not be resolved against the evoked map.
    Unresolvable { command: String, attribute: String },
    /// A NaN or infinity appeared where finite values are required.
    NonFinite(String),
    /// No attribute produced a primitive.
    EmptyMap(Vec<(String, String)>),
    /// A caller-supplied sink (checkpoint writer, policy loader) failed.
    Sink(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch { what, expected, found } => {
                write!(f, "dimension mismatch in {what}: expected {expected}, found {found}")
            }
            Error::TooShort { len, min } => {
                write!(f, "series of length {len} is too short; need at least {min} samples")
            }
            Error::Conflict { unit, detail } => {
                write!(f, "conflicting stimulation of unit ({}, {}): {detail}", unit.layer, unit.unit)
            }
            Error::UnknownChannel { name, valid } => {
                write!(f, "unknown channel {name:?}; valid channels: {}", valid.join(", "))
            }
            Error::UndefinedPhase => write!(f, "phase undefined: every frame has ~zero magnitude"),
            Error::UnreliablePrimitive { rho, gate } => {
                write!(f, "unreliable primitive: |rho| = {:.4} is below {gate}", rho.abs())
            }
            Error::AllUnitsDead => write!(f, "all hidden units are constant; nothing to match"),
            Error::Unresolvable { command, attribute } => {
                write!(f, "command {command:?}: attribute {attribute:?} has no primitive in the map")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Sink(msg) => write!(f, "{msg}"),
            Error::EmptyMap(failures) => {
                write!(f, "no primitive could be built")?;
                for (attr, reason) in failures {
                    write!(f, "; {attr}: {reason}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
