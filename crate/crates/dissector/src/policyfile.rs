//! Policy files: `{"schema":1,"activation":"tanh","output_activation":"tanh","layers":[{"w":[[...]],"b":[...]}]}`.

use std::path::Path;

use dissector_core::policy::{Activation, Dense, PortablePolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_to_string, write_string, Error, Result};

pub const SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    schema: u32,
    activation: String,
    output_activation: String,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

/// Canonical single-line serialization, newline terminated.
pub fn policy_to_string(policy: &PortablePolicy) -> String {
    let file = PolicyFile {
        schema: SCHEMA,
        activation: policy.hidden_activation().name().to_string(),
        output_activation: policy.output_activation().name().to_string(),
        layers: policy
            .layers()
            .iter()
            .map(|d| LayerFile { w: (0..d.outputs()).map(|o| d.row(o).to_vec()).collect(), b: d.bias().to_vec() })
            .collect(),
    };
    let mut s = serde_json::to_string(&file).expect("policy values are finite");
    s.push('\n');
    s
}

pub fn parse_policy(text: &str) -> std::result::Result<PortablePolicy, String> {
    let file: PolicyFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if file.schema != SCHEMA {
        return Err(format!("unsupported schema {}; expected {SCHEMA}", file.schema));
    }
    let hidden: Activation = file.activation.parse().map_err(|e: dissector_core::Error| e.to_string())?;
    let output: Activation = file.output_activation.parse().map_err(|e: dissector_core::Error| e.to_string())?;
    let layers = file
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| Dense::from_rows(&l.w, l.b.clone()).map_err(|e| format!("layer {i}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    PortablePolicy::new(layers, hidden, output).map_err(|e| e.to_string())
}

pub fn save_policy(policy: &PortablePolicy, path: &Path) -> Result<()> {
    write_string(path, &policy_to_string(policy))
}

pub fn load_policy(path: &Path) -> Result<PortablePolicy> {
    parse_policy(&read_to_string(path)?).map_err(|msg| Error::format(path, msg))
}

/// SHA-256 of the canonical serialization, hex encoded.
pub fn fingerprint(policy: &PortablePolicy) -> String {
    Sha256::digest(policy_to_string(policy).as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use dissector_core::policy::PolicyShape;

    #[test]
    fn round_trip_is_exact() {
        let p = PolicyShape::desk(5, 2).init(3).unwrap();
        assert_eq!(parse_policy(&policy_to_string(&p)).unwrap(), p);
    }

    #[test]
    fn bias_length_mismatch_rejected() {
        let text = r#"{"schema":1,"activation":"tanh","output_activation":"tanh","layers":[{"w":[[1.0]],"b":[0.0,1.0]},{"w":[[1.0]],"b":[0.0]}]}"#;
        assert!(parse_policy(text).is_err());
    }

    #[test]
    fn unknown_activation_rejected() {
        let text = r#"{"schema":1,"activation":"gelu","output_activation":"tanh","layers":[{"w":[[1.0]],"b":[0.0]},{"w":[[1.0]],"b":[0.0]}]}"#;
        let err = parse_policy(text).unwrap_err();
        assert!(err.contains("gelu"), "{err}");
    }

    #[test]
    fn fingerprint_tracks_weights() {
        let a = PolicyShape::desk(5, 2).init(1).unwrap();
        let b = PolicyShape::desk(5, 2).init(2).unwrap();
        assert_eq!(fingerprint(&a).len(), 64);
        assert_ne!(fingerprint(&a), fingerprint(&b));
        assert_eq!(fingerprint(&a), fingerprint(&a.clone()));
    }
}
