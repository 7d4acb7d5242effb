//! Frequency-domain alignment of hidden units with kinematic attributes.
//!
//! For every attribute the unit with the smallest mean spectrogram
//! discrepancy across episodes becomes its motor primitive. The sign and
//! strength of the coupling come from the mean phase difference of the pair
//! at a predominant bin, `rho = 1 - |2p|/pi`, and a stimulation of strength
//! `k` pins the unit to `k / rho`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::policy::{StimulationOverride, UnitAddr};
use crate::spectral::{principal_phase, wrap_phase, ComplexStft, Spectrogram, StftConfig, StftPlan, PHASE_MAGNITUDE_FLOOR};
use crate::trace::RolloutRecord;

/// Series whose population standard deviation falls below this are constant.
pub const CONSTANT_STD: f64 = 1e-10;

/// Minimum |rho| for which [`output_value`] is defined.
pub const RELIABILITY_GATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: Vec<f64>,
    pub constant: bool,
}

/// Zero mean, unit population standard deviation. Constant series map to
/// all zeros with `constant` set.
pub fn standardize(x: &[f64]) -> Result<Standardized> {
    if x.len() < 2 {
        return Err(Error::TooShort { len: x.len(), min: 2 });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    if std.is_nan() || std < CONSTANT_STD {
        return Ok(Standardized { values: alloc::vec![0.0; x.len()], constant: true });
    }
    Ok(Standardized { values: x.iter().map(|v| (v - mean) / std).collect(), constant: false })
}

fn is_constant(x: &[f64]) -> bool {
    standardize(x).map(|s| s.constant).unwrap_or(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyCriterion {
    /// `argmax_w sum_d |SG(m) - SG(s)|`.
    #[default]
    AsWritten,
    /// `argmax_w sum_d SG(m) + SG(s)`.
    SharedEnergy,
}

impl FrequencyCriterion {
    pub fn name(self) -> &'static str {
        match self {
            FrequencyCriterion::AsWritten => "as_written",
            FrequencyCriterion::SharedEnergy => "shared_energy",
        }
    }
}

impl fmt::Display for FrequencyCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrequencyCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_written" => Ok(Self::AsWritten),
            "shared_energy" => Ok(Self::SharedEnergy),
            other => Err(invalid(format!("unknown criterion {other:?}; expected as_written or shared_energy"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMean {
    /// `atan2(mean sin, mean cos)` of the wrapped differences.
    #[default]
    Circular,
    /// Arithmetic mean of the wrapped differences.
    Arithmetic,
}

impl PhaseMean {
    pub fn name(self) -> &'static str {
        match self {
            PhaseMean::Circular => "circular",
            PhaseMean::Arithmetic => "arithmetic",
        }
    }
}

impl FromStr for PhaseMean {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circular" => Ok(Self::Circular),
            "arithmetic" => Ok(Self::Arithmetic),
            other => Err(invalid(format!("unknown phase mean {other:?}; expected circular or arithmetic"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DissectConfig {
    pub stft: StftConfig,
    pub criterion: FrequencyCriterion,
    pub phase_mean: PhaseMean,
    /// Standardize every series per episode before spectral analysis.
    pub standardize: bool,
}

impl Default for DissectConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            criterion: FrequencyCriterion::AsWritten,
            phase_mean: PhaseMean::Circular,
            standardize: true,
        }
    }
}

/// `sum_d sum_w |a - b|` over the shared grid.
pub fn spectrogram_discrepancy(a: &Spectrogram, b: &Spectrogram) -> Result<f64> {
    if a.frames() != b.frames() || a.bins() != b.bins() {
        return Err(Error::DimensionMismatch {
            what: "spectrogram grid".into(),
            expected: a.frames() * a.bins(),
            found: b.frames() * b.bins(),
        });
    }
    Ok(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum())
}

/// Frequency discrepancy of two equal-length series (already standardized if desired).
pub fn frequency_discrepancy(z: &[f64], s: &[f64], cfg: &StftConfig) -> Result<f64> {
    if z.len() != s.len() {
        return Err(Error::DimensionMismatch { what: "series length".into(), expected: z.len(), found: s.len() });
    }
    let plan = StftPlan::new(*cfg)?;
    spectrogram_discrepancy(&plan.spectrogram(z)?, &plan.spectrogram(s)?)
}

/// Lowest index of the maximum; NaNs never win.
fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Predominant bin over one or more `(primitive, attribute)` spectrogram pairs.
pub fn predominant_bin(pairs: &[(&Spectrogram, &Spectrogram)], criterion: FrequencyCriterion) -> Result<usize> {
    let bins = pairs.first().map(|(m, _)| m.bins()).ok_or_else(|| invalid("no spectrogram pairs"))?;
    let mut score = alloc::vec![0.0; bins];
    for (m, s) in pairs {
        if m.frames() != s.frames() || m.bins() != bins || s.bins() != bins {
            return Err(invalid("spectrogram pairs must share a grid"));
        }
        for d in 0..m.frames() {
            for ((acc, a), b) in score.iter_mut().zip(m.frame(d)).zip(s.frame(d)) {
                *acc += match criterion {
                    FrequencyCriterion::AsWritten => (a - b).abs(),
                    FrequencyCriterion::SharedEnergy => a + b,
                };
            }
        }
    }
    Ok(argmax_lowest(&score))
}

/// Predominant frequency bin of `(m, s)` series pairs, one pair per episode.
pub fn predominant_frequency(pairs: &[(&[f64], &[f64])], cfg: &StftConfig, criterion: FrequencyCriterion) -> Result<usize> {
    let plan = StftPlan::new(*cfg)?;
    let grids = pairs
        .iter()
        .map(|(m, s)| {
            if m.len() != s.len() {
                return Err(Error::DimensionMismatch { what: "series length".into(), expected: m.len(), found: s.len() });
            }
            Ok((plan.spectrogram(m)?, plan.spectrogram(s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = grids.iter().map(|(a, b)| (a, b)).collect();
    predominant_bin(&refs, criterion)
}

/// Mean phase difference `phase(m) - phase(s)` at `bin` over every frame of
/// every pair. Frames where either magnitude is below the phase floor are
/// skipped.
pub fn phase_discrepancy_stft(pairs: &[(&ComplexStft, &ComplexStft)], bin: usize, mean: PhaseMean) -> Result<f64> {
    let (mut sum_sin, mut sum_cos, mut sum, mut count) = (0.0, 0.0, 0.0, 0usize);
    for (m, s) in pairs {
        if m.frames() != s.frames() || bin >= m.bins() || bin >= s.bins() {
            return Err(invalid("phase pairs must share a grid containing the bin"));
        }
        for d in 0..m.frames() {
            let (a, b) = (m.get(d, bin), s.get(d, bin));
            if a.norm() < PHASE_MAGNITUDE_FLOOR || b.norm() < PHASE_MAGNITUDE_FLOOR {
                continue;
            }
            let diff = wrap_phase(principal_phase(a)? - principal_phase(b)?);
            sum_sin += libm::sin(diff);
            sum_cos += libm::cos(diff);
            sum += diff;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedPhase);
    }
    Ok(match mean {
        PhaseMean::Circular => {
            let p = libm::atan2(sum_sin, sum_cos);
            if p <= -PI {
                PI
            } else {
                p
            }
        }
        PhaseMean::Arithmetic => sum / count as f64,
    })
}

pub fn phase_discrepancy(pairs: &[(&[f64], &[f64])], bin: usize, cfg: &StftConfig, mean: PhaseMean) -> Result<f64> {
    let plan = StftPlan::new(*cfg)?;
    let grids = pairs
        .iter()
        .map(|(m, s)| {
            if m.len() != s.len() {
                return Err(Error::DimensionMismatch { what: "series length".into(), expected: m.len(), found: s.len() });
            }
            Ok((plan.stft(m)?, plan.stft(s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = grids.iter().map(|(a, b)| (a, b)).collect();
    phase_discrepancy_stft(&refs, bin, mean)
}

/// `rho = 1 - |2p|/pi`.
pub fn correlation_coefficient(p: f64) -> f64 {
    1.0 - (2.0 * p).abs() / PI
}

/// Stimulation value `k / rho`, refused when `|rho|` is below the reliability gate.
pub fn output_value(k: f64, rho: f64) -> Result<f64> {
    if rho.is_nan() || rho.abs() < RELIABILITY_GATE {
        return Err(Error::UnreliablePrimitive { rho, gate: RELIABILITY_GATE });
    }
    Ok(k / rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotorPrimitive {
    pub attribute: String,
    pub unit: UnitAddr,
    pub rho: f64,
    /// Mean phase difference the coefficient was derived from.
    pub phase: f64,
    pub omega_star_bin: usize,
    pub mean_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulationEvokedMap {
    pub policy_fingerprint: String,
    pub config: DissectConfig,
    primitives: Vec<MotorPrimitive>,
    excluded: Vec<UnitAddr>,
    /// Attributes that produced no primitive, with the reason.
    pub failures: Vec<(String, String)>,
}

impl StimulationEvokedMap {
    pub fn new(
        policy_fingerprint: String,
        config: DissectConfig,
        primitives: Vec<MotorPrimitive>,
        mut excluded: Vec<UnitAddr>,
        failures: Vec<(String, String)>,
    ) -> Result<Self> {
        excluded.sort();
        excluded.dedup();
        for (k, p) in primitives.iter().enumerate() {
            if primitives[..k].iter().any(|q| q.attribute == p.attribute) {
                return Err(invalid(format!("attribute {:?} has more than one primitive", p.attribute)));
            }
            if excluded.binary_search(&p.unit).is_ok() {
                return Err(invalid(format!("primitive for {:?} uses excluded unit {}", p.attribute, p.unit)));
            }
            if !(-1.0..=1.0).contains(&p.rho) {
                return Err(invalid(format!("rho {} out of [-1, 1]", p.rho)));
            }
            if p.omega_star_bin > config.stft.window_len / 2 {
                return Err(invalid(format!("bin {} beyond the one-sided spectrum", p.omega_star_bin)));
            }
        }
        Ok(Self { policy_fingerprint, config, primitives, excluded, failures })
    }

    pub fn primitives(&self) -> &[MotorPrimitive] {
        &self.primitives
    }

    pub fn excluded(&self) -> &[UnitAddr] {
        &self.excluded
    }

    pub fn primitive(&self, attribute: &str) -> Option<&MotorPrimitive> {
        self.primitives.iter().find(|p| p.attribute == attribute)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandEntry {
    pub attribute: String,
    pub k: f64,
}

/// A named behaviour: one or more attributes to drive, each with its own `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorCommand {
    pub name: String,
    pub entries: Vec<CommandEntry>,
}

impl BehaviorCommand {
    pub fn new(name: impl Into<String>, entries: Vec<(String, f64)>) -> Self {
        Self {
            name: name.into(),
            entries: entries.into_iter().map(|(attribute, k)| CommandEntry { attribute, k }).collect(),
        }
    }

    /// Same command with every entry's `k` replaced.
    pub fn with_k(&self, k: f64) -> Self {
        let mut c = self.clone();
        for e in &mut c.entries {
            e.k = k;
        }
        c
    }
}

pub fn resolve_command(map: &StimulationEvokedMap, command: &BehaviorCommand) -> Result<Vec<StimulationOverride>> {
    if command.entries.is_empty() {
        return Err(invalid(format!("command {:?} has no entries", command.name)));
    }
    let mut out: Vec<StimulationOverride> = Vec::with_capacity(command.entries.len());
    for (i, e) in command.entries.iter().enumerate() {
        if command.entries[..i].iter().any(|o| o.attribute == e.attribute) {
            return Err(invalid(format!("command {:?} lists {:?} twice", command.name, e.attribute)));
        }
        let prim = map.primitive(&e.attribute).ok_or_else(|| Error::Unresolvable {
            command: command.name.clone(),
            attribute: e.attribute.clone(),
        })?;
        let value = output_value(e.k, prim.rho)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("stimulation value for {:?}", e.attribute)));
        }
        if out.iter().any(|o| o.addr() == prim.unit) {
            return Err(Error::Conflict {
                unit: prim.unit,
                detail: format!("command {:?} resolves two attributes to the same unit", command.name),
            });
        }
        out.push(StimulationOverride::new(prim.unit.layer, prim.unit.unit, value));
    }
    Ok(out)
}

/// Best unit for one attribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    pub unit: UnitAddr,
    pub mean_discrepancy: f64,
}

struct PreparedSeries {
    values: Vec<f64>,
    constant: bool,
    spectrogram: Spectrogram,
}

/// Per-episode spectra of every hidden unit, shared across attributes.
pub struct Analysis<'a> {
    cfg: DissectConfig,
    plan: StftPlan,
    units: Vec<UnitAddr>,
    // episodes[e][u]
    episodes: Vec<Vec<PreparedSeries>>,
    live: Vec<usize>,
    records: &'a [RolloutRecord],
}

impl<'a> Analysis<'a> {
    pub fn new(rollouts: &'a [RolloutRecord], cfg: &DissectConfig) -> Result<Self> {
        let plan = StftPlan::new(cfg.stft)?;
        let first = rollouts.first().ok_or_else(|| invalid("at least one rollout is required"))?;
        let layer_sizes = first.layer_sizes().to_vec();
        for r in rollouts {
            if r.layer_sizes() != layer_sizes.as_slice() {
                return Err(invalid(format!(
                    "episode {} has layer sizes {:?}, expected {:?}",
                    r.episode_id(),
                    r.layer_sizes(),
                    layer_sizes
                )));
            }
            if r.len() < cfg.stft.window_len {
                return Err(Error::TooShort { len: r.len(), min: cfg.stft.window_len });
            }
        }
        let units: Vec<UnitAddr> = layer_sizes
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| (0..n).map(move |i| UnitAddr::new(l, i)))
            .collect();

        let mut episodes = Vec::with_capacity(rollouts.len());
        for r in rollouts {
            let prepared = par::map_indexed(units.len(), |u| {
                let a = units[u];
                let raw: Vec<f64> = r.steps().iter().map(|s| s.activations[a.layer][a.unit]).collect();
                prepare(&plan, raw, cfg.standardize)
            });
            episodes.push(prepared.into_iter().collect::<Result<Vec<_>>>()?);
        }
        let live: Vec<usize> = (0..units.len()).filter(|&u| !episodes.iter().all(|ep| ep[u].constant)).collect();
        Ok(Self {
            cfg: *cfg,
            plan,
            units,
            episodes,
            live,
            records: rollouts,
        })
    }

    pub fn config(&self) -> &DissectConfig {
        &self.cfg
    }

    pub fn units(&self) -> &[UnitAddr] {
        &self.units
    }

    /// Units constant in every episode.
    pub fn dead_units(&self) -> Vec<UnitAddr> {
        (0..self.units.len()).filter(|u| self.live.binary_search(u).is_err()).map(|u| self.units[u]).collect()
    }

    fn attribute_series(&self, attribute: &str) -> Result<Vec<PreparedSeries>> {
        let prepared = self
            .records
            .iter()
            .map(|r| {
                if r.kinematic_index(attribute).is_none() {
                    return Err(Error::UnknownChannel { name: attribute.to_string(), valid: r.kinematic_names().to_vec() });
                }
                prepare(&self.plan, r.kinematic_series(attribute)?, self.cfg.standardize)
            })
            .collect::<Result<Vec<_>>>()?;
        if prepared.iter().all(|p| p.constant) {
            return Err(invalid(format!("attribute {attribute:?} is constant in every episode")));
        }
        Ok(prepared)
    }

    fn unit_index(&self, unit: UnitAddr) -> Result<usize> {
        self.units.binary_search(&unit).map_err(|_| invalid(format!("unit {unit} is not in the recorded layers")))
    }

    /// Mean discrepancy between `unit` and `attribute` over all episodes.
    pub fn mean_discrepancy(&self, unit: UnitAddr, attribute: &str) -> Result<f64> {
        let u = self.unit_index(unit)?;
        let attr = self.attribute_series(attribute)?;
        self.mean_discrepancy_at(u, &attr)
    }

    /// Like [`mean_discrepancy`](Self::mean_discrepancy) but each episode's
    /// discrepancy is divided by its frame count, so episodes of different
    /// lengths are comparable.
    pub fn mean_discrepancy_per_frame(&self, unit: UnitAddr, attribute: &str) -> Result<f64> {
        let u = self.unit_index(unit)?;
        let attr = self.attribute_series(attribute)?;
        let mut total = 0.0;
        for (ep, a) in self.episodes.iter().zip(&attr) {
            total += spectrogram_discrepancy(&ep[u].spectrogram, &a.spectrogram)? / a.spectrogram.frames() as f64;
        }
        Ok(total / self.episodes.len() as f64)
    }

    fn mean_discrepancy_at(&self, u: usize, attr: &[PreparedSeries]) -> Result<f64> {
        let mut total = 0.0;
        for (ep, a) in self.episodes.iter().zip(attr) {
            total += spectrogram_discrepancy(&ep[u].spectrogram, &a.spectrogram)?;
        }
        Ok(total / self.episodes.len() as f64)
    }

    pub fn frequency_match(&self, attribute: &str) -> Result<MatchCandidate> {
        let attr = self.attribute_series(attribute)?;
        self.match_prepared(&attr)
    }

    fn match_prepared(&self, attr: &[PreparedSeries]) -> Result<MatchCandidate> {
        if self.live.is_empty() {
            return Err(Error::AllUnitsDead);
        }
        let scores = par::map_indexed(self.live.len(), |i| self.mean_discrepancy_at(self.live[i], attr));
        // Full scan first, then a strict-less argmin over address order.
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.into_iter().enumerate() {
            let s = s?;
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((self.live[i], s));
            }
        }
        let (u, mean_discrepancy) = best.ok_or(Error::AllUnitsDead)?;
        Ok(MatchCandidate { unit: self.units[u], mean_discrepancy })
    }

    /// Builds the primitive for one attribute: match, predominant bin, phase, rho.
    pub fn primitive(&self, attribute: &str) -> Result<MotorPrimitive> {
        let attr = self.attribute_series(attribute)?;
        let cand = self.match_prepared(&attr)?;
        let u = self.unit_index(cand.unit)?;
        let sg_pairs: Vec<_> = self.episodes.iter().zip(&attr).map(|(ep, a)| (&ep[u].spectrogram, &a.spectrogram)).collect();
        let bin = predominant_bin(&sg_pairs, self.cfg.criterion)?;
        let stfts = self
            .episodes
            .iter()
            .zip(&attr)
            .map(|(ep, a)| Ok((self.plan.stft(&ep[u].values)?, self.plan.stft(&a.values)?)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = stfts.iter().map(|(m, s)| (m, s)).collect();
        let phase = phase_discrepancy_stft(&refs, bin, self.cfg.phase_mean)?;
        Ok(MotorPrimitive {
            attribute: attribute.to_string(),
            unit: cand.unit,
            rho: correlation_coefficient(phase),
            phase,
            omega_star_bin: bin,
            mean_discrepancy: cand.mean_discrepancy,
        })
    }
}

fn prepare(plan: &StftPlan, raw: Vec<f64>, standardize_series: bool) -> Result<PreparedSeries> {
    let (values, constant) = if standardize_series {
        let s = standardize(&raw)?;
        (s.values, s.constant)
    } else {
        let c = is_constant(&raw);
        (raw, c)
    };
    let spectrogram = plan.spectrogram(&values)?;
    Ok(PreparedSeries { values, constant, spectrogram })
}

/// `argmin` over live units of the mean discrepancy to `attribute`.
pub fn frequency_match(rollouts: &[RolloutRecord], attribute: &str, cfg: &DissectConfig) -> Result<MatchCandidate> {
    Analysis::new(rollouts, cfg)?.frequency_match(attribute)
}

/// Builds the stimulation-evoked map for `attributes`.
///
/// `hidden_widths` must match the recorded layer sizes. Failures on single
/// attributes are collected in the map; the call only fails when no
/// attribute yields a primitive or every unit is dead.
pub fn build_evoked_map(
    hidden_widths: &[usize],
    policy_fingerprint: &str,
    rollouts: &[RolloutRecord],
    attributes: &[String],
    cfg: &DissectConfig,
) -> Result<StimulationEvokedMap> {
    if let Some(r) = rollouts.first() {
        if r.layer_sizes() != hidden_widths {
            return Err(invalid(format!(
                "rollouts record layers {:?} but the policy has hidden widths {:?}",
                r.layer_sizes(),
                hidden_widths
            )));
        }
    }
    let analysis = Analysis::new(rollouts, cfg)?;
    if analysis.live.is_empty() {
        return Err(Error::AllUnitsDead);
    }
    let mut primitives = Vec::new();
    let mut failures = Vec::new();
    for attr in attributes {
        match analysis.primitive(attr) {
            Ok(p) => primitives.push(p),
            Err(e) => {
                log::warn!("no primitive for {attr}: {e}");
                failures.push((attr.clone(), e.to_string()));
            }
        }
    }
    if primitives.is_empty() {
        return Err(Error::EmptyMap(failures));
    }
    StimulationEvokedMap::new(policy_fingerprint.to_string(), *cfg, primitives, analysis.dead_units(), failures)
}
