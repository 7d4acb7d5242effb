//! Portable MLP controller with activation capture and stimulation overrides.
//!
//! Hidden layers are addressed from 0. Overrides pin the post-nonlinearity
//! output of a hidden unit; the pinned value is what the next layer sees and
//! what the returned [`ForwardTrace`] records. The output layer is never
//! dissected or stimulated.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Identity => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(invalid(format!("unknown activation {other:?}"))),
        }
    }
}

/// Address of a hidden unit: `(layer, unit)`, both 0-based. Ordered
/// lexicographically, which is the tie-break order used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitAddr {
    pub layer: usize,
    pub unit: usize,
}

impl UnitAddr {
    pub const fn new(layer: usize, unit: usize) -> Self {
        Self { layer, unit }
    }
}

impl fmt::Display for UnitAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.unit)
    }
}

/// Dense layer, weights stored row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(invalid("layer dimensions must be positive"));
        }
        if weights.len() != inputs * outputs {
            return Err(Error::DimensionMismatch {
                what: "weight matrix".into(),
                expected: inputs * outputs,
                found: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::DimensionMismatch {
                what: "bias vector".into(),
                expected: outputs,
                found: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(Self { inputs, outputs, weights, bias })
    }

    /// Builds a layer from nested rows (`outputs` rows of `inputs` columns).
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Self> {
        let outputs = rows.len();
        let inputs = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != inputs) {
            return Err(Error::DimensionMismatch {
                what: format!("weight row {i}"),
                expected: inputs,
                found: r.len(),
            });
        }
        Self::new(inputs, outputs, rows.concat(), bias)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn row(&self, out: usize) -> &[f64] {
        &self.weights[out * self.inputs..(out + 1) * self.inputs]
    }

    fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = self.row(o);
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

/// Pins hidden unit `(layer, unit)` to `value` during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulationOverride {
    pub layer: usize,
    pub unit: usize,
    pub value: f64,
}

impl StimulationOverride {
    pub const fn new(layer: usize, unit: usize, value: f64) -> Self {
        Self { layer, unit, value }
    }

    pub fn addr(&self) -> UnitAddr {
        UnitAddr::new(self.layer, self.unit)
    }
}

/// Post-activation outputs of every hidden layer plus the action.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardTrace {
    pub hidden: Vec<Vec<f64>>,
    pub action: Vec<f64>,
}

impl ForwardTrace {
    pub fn get(&self, addr: UnitAddr) -> Option<f64> {
        self.hidden.get(addr.layer)?.get(addr.unit).copied()
    }
}

/// Architecture description used to initialise and (de)flatten policies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyShape {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub act_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl PolicyShape {
    /// Desk-scale default: two tanh hidden layers of 64 units, tanh output.
    pub fn desk(obs_dim: usize, act_dim: usize) -> Self {
        Self {
            obs_dim,
            hidden: vec![64, 64],
            act_dim,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Tanh,
        }
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.obs_dim);
        d.extend_from_slice(&self.hidden);
        d.push(self.act_dim);
        d
    }

    pub fn parameter_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in)`, zero biases.
    pub fn init(&self, seed: u64) -> Result<PortablePolicy> {
        let mut rng = SplitMix64::new(seed);
        let params: Vec<f64> = {
            let mut p = Vec::with_capacity(self.parameter_count());
            for w in self.dims().windows(2) {
                let scale = 1.0 / libm::sqrt(w[0] as f64);
                p.extend((0..w[0] * w[1]).map(|_| rng.normal() * scale));
                p.extend(core::iter::repeat_n(0.0, w[1]));
            }
            p
        };
        self.from_flat(&params)
    }

    /// Inverse of [`PortablePolicy::to_flat`].
    pub fn from_flat(&self, params: &[f64]) -> Result<PortablePolicy> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                what: "flat parameter vector".into(),
                expected: self.parameter_count(),
                found: params.len(),
            });
        }
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut at = 0;
        for w in self.dims().windows(2) {
            let (i, o) = (w[0], w[1]);
            let weights = params[at..at + i * o].to_vec();
            at += i * o;
            let bias = params[at..at + o].to_vec();
            at += o;
            layers.push(Dense::new(i, o, weights, bias)?);
        }
        PortablePolicy::new(layers, self.hidden_activation, self.output_activation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortablePolicy {
    layers: Vec<Dense>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl PortablePolicy {
    pub fn new(layers: Vec<Dense>, hidden_activation: Activation, output_activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(invalid("policy needs at least one hidden layer and an output layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    what: format!("input width of layer {}", k + 1),
                    expected: pair[0].outputs,
                    found: pair[1].inputs,
                });
            }
        }
        if !matches!(hidden_activation, Activation::Tanh | Activation::Relu) {
            return Err(invalid(format!("hidden activation must be tanh or relu, got {hidden_activation}")));
        }
        if !matches!(output_activation, Activation::Tanh | Activation::Identity) {
            return Err(invalid(format!("output activation must be tanh or identity, got {output_activation}")));
        }
        Ok(Self { layers, hidden_activation, output_activation })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn obs_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn act_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Dense::outputs).collect()
    }

    /// Number of dissectable units (hidden layers only).
    pub fn unit_count(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    pub fn shape(&self) -> PolicyShape {
        PolicyShape {
            obs_dim: self.obs_dim(),
            hidden: self.hidden_widths(),
            act_dim: self.act_dim(),
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.shape().parameter_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn contains(&self, addr: UnitAddr) -> bool {
        addr.layer + 1 < self.layers.len() && addr.unit < self.layers[addr.layer].outputs
    }

    /// Checks that every override addresses a hidden unit, carries a finite
    /// value and that no unit is targeted twice.
    pub fn validate_overrides(&self, overrides: &[StimulationOverride]) -> Result<()> {
        for (k, o) in overrides.iter().enumerate() {
            if !self.contains(o.addr()) {
                return Err(invalid(format!(
                    "override target {} is outside the hidden layers {:?}",
                    o.addr(),
                    self.hidden_widths()
                )));
            }
            if !o.value.is_finite() {
                return Err(Error::NonFinite(format!("override value for unit {}", o.addr())));
            }
            if overrides[..k].iter().any(|p| p.addr() == o.addr()) {
                return Err(Error::Conflict {
                    unit: o.addr(),
                    detail: "unit targeted by more than one override".into(),
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64], overrides: &[StimulationOverride]) -> Result<ForwardTrace> {
        let mut trace = ForwardTrace::default();
        self.forward_into(obs, overrides, &mut trace)?;
        Ok(trace)
    }

    /// Like [`forward`](Self::forward) but reuses the buffers in `trace`.
    pub fn forward_into(&self, obs: &[f64], overrides: &[StimulationOverride], trace: &mut ForwardTrace) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                what: "observation".into(),
                expected: self.obs_dim(),
                found: obs.len(),
            });
        }
        self.validate_overrides(overrides)?;

        let hidden_count = self.layers.len() - 1;
        trace.hidden.resize_with(hidden_count, Vec::new);
        for k in 0..hidden_count {
            let (done, rest) = trace.hidden.split_at_mut(k);
            let input: &[f64] = if k == 0 { obs } else { &done[k - 1] };
            let out = &mut rest[0];
            self.layers[k].affine_into(input, out);
            for v in out.iter_mut() {
                *v = self.hidden_activation.apply(*v);
            }
            for o in overrides.iter().filter(|o| o.layer == k) {
                out[o.unit] = o.value;
            }
        }
        let last = &self.layers[hidden_count];
        last.affine_into(&trace.hidden[hidden_count - 1], &mut trace.action);
        for v in trace.action.iter_mut() {
            *v = self.output_activation.apply(*v);
        }
        Ok(())
    }
}
