//! Rollouts and live shared-control sessions.
//!
//! Stimulation takes effect only at tick boundaries: a command applied or
//! released between ticks `t-1` and `t` changes the overrides used for step
//! `t`. That makes a session's event log an exact schedule, so any
//! interactive episode can be replayed with [`rollout`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dissect::{resolve_command, BehaviorCommand, StimulationEvokedMap};
use crate::envs::{reset, EnvKind, EnvPreset, EnvState, Termination, DT};
use crate::error::{invalid, Error, Result};
use crate::policy::{ForwardTrace, PortablePolicy, StimulationOverride, UnitAddr};
use crate::trace::{RolloutRecord, StepRecord};

/// Seed of episode `index` in a batch starting at `base`.
pub fn episode_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledCommand {
    pub start_tick: u64,
    pub duration: u64,
    pub command: BehaviorCommand,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StimulationSchedule {
    pub entries: Vec<ScheduledCommand>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStimulus {
    pub start_tick: u64,
    pub duration: u64,
    pub command: String,
    pub overrides: Vec<StimulationOverride>,
}

impl ResolvedStimulus {
    fn active_at(&self, tick: u64) -> bool {
        tick >= self.start_tick && tick - self.start_tick < self.duration
    }

    fn overlaps(&self, other: &ResolvedStimulus) -> bool {
        let end = self.start_tick.saturating_add(self.duration);
        let other_end = other.start_tick.saturating_add(other.duration);
        self.start_tick < other_end && other.start_tick < end
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolvedSchedule {
    entries: Vec<ResolvedStimulus>,
}

impl StimulationSchedule {
    pub fn resolve(&self, map: &StimulationEvokedMap) -> Result<ResolvedSchedule> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                if e.duration == 0 {
                    return Err(invalid(format!("command {:?} at tick {} has zero duration", e.command.name, e.start_tick)));
                }
                Ok(ResolvedStimulus {
                    start_tick: e.start_tick,
                    duration: e.duration,
                    command: e.command.name.clone(),
                    overrides: resolve_command(map, &e.command)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ResolvedSchedule::new(entries)
    }
}

impl ResolvedSchedule {
    pub fn new(entries: Vec<ResolvedStimulus>) -> Result<Self> {
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[..i] {
                if !a.overlaps(b) {
                    continue;
                }
                if let Some(o) = a.overrides.iter().find(|o| b.overrides.iter().any(|p| p.addr() == o.addr())) {
                    return Err(Error::Conflict {
                        unit: o.addr(),
                        detail: format!("{:?} and {:?} overlap in time", b.command, a.command),
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ResolvedStimulus] {
        &self.entries
    }

    pub fn active_at(&self, tick: u64) -> Vec<StimulationOverride> {
        self.entries.iter().filter(|e| e.active_at(tick)).flat_map(|e| e.overrides.iter().copied()).collect()
    }
}

/// Preset command names followed by the map's attributes.
pub fn command_names(preset: &EnvPreset, map: &StimulationEvokedMap) -> Vec<String> {
    let mut names: Vec<String> = preset.commands.iter().map(|c| c.name.clone()).collect();
    names.extend(map.primitives().iter().map(|p| p.attribute.clone()));
    names
}

/// Looks up `name` among the preset commands, then among the map's
/// attributes (which need an explicit `k`). A given `k` replaces every
/// entry's `k`.
pub fn find_command(preset: &EnvPreset, map: &StimulationEvokedMap, name: &str, k: Option<f64>) -> Result<BehaviorCommand> {
    if let Some(c) = preset.command(name) {
        return Ok(match k {
            Some(k) => c.with_k(k),
            None => c.clone(),
        });
    }
    if map.primitive(name).is_some() {
        let k = k.ok_or_else(|| invalid(format!("attribute command {name:?} needs an explicit k")))?;
        return Ok(BehaviorCommand::new(name, alloc::vec![(name.to_string(), k)]));
    }
    Err(invalid(format!("unknown command {name:?}; valid commands: {}", command_names(preset, map).join(", "))))
}

/// Records one episode: observe, forward with the active overrides, step.
pub fn rollout(
    policy: &PortablePolicy,
    kind: EnvKind,
    seed: u64,
    max_steps: u64,
    schedule: &ResolvedSchedule,
    episode_id: u64,
) -> Result<RolloutRecord> {
    if max_steps == 0 {
        return Err(invalid("max_steps = 0 would produce an empty record"));
    }
    for e in schedule.entries() {
        policy.validate_overrides(&e.overrides)?;
    }
    let (mut state, mut obs) = reset(kind, seed);
    let mut steps = Vec::new();
    let mut trace = ForwardTrace::default();
    for t in 0..max_steps {
        let overrides = schedule.active_at(t);
        policy.forward_into(&obs, &overrides, &mut trace)?;
        let r = state.step(&trace.action)?;
        steps.push(StepRecord {
            t,
            observation: obs,
            action: trace.action.clone(),
            activations: trace.hidden.clone(),
            kinematics: r.kinematics,
        });
        state = r.next;
        obs = state.observe();
        if r.terminated.is_some() {
            break;
        }
    }
    RolloutRecord::new(episode_id, DT, policy.hidden_widths(), kind.kinematic_names(), steps)
}

/// Summary of an unrecorded episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub total_reward: f64,
    pub steps: u64,
    pub termination: Option<Termination>,
    pub final_state: EnvState,
    /// Sum of the first kinematic channel (`v_x` for the ant, `speed` for the car).
    pub first_channel_sum: f64,
}

pub fn run_episode(policy: &PortablePolicy, kind: EnvKind, seed: u64, max_steps: u64) -> Result<EpisodeOutcome> {
    let (mut state, mut obs) = reset(kind, seed);
    let mut trace = ForwardTrace::default();
    let mut out = EpisodeOutcome { total_reward: 0.0, steps: 0, termination: None, final_state: state, first_channel_sum: 0.0 };
    while out.steps < max_steps {
        policy.forward_into(&obs, &[], &mut trace)?;
        let r = state.step(&trace.action)?;
        out.total_reward += r.reward;
        out.first_channel_sum += r.kinematics[0];
        out.steps += 1;
        state = r.next;
        if r.terminated.is_some() {
            out.termination = r.terminated;
            break;
        }
        obs = state.observe();
    }
    out.final_state = state;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionMode {
    Running,
    Paused,
    Finished,
}

impl SessionMode {
    pub fn name(self) -> &'static str {
        match self {
            SessionMode::Running => "running",
            SessionMode::Paused => "paused",
            SessionMode::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub kind: EnvKind,
    pub seed: u64,
    pub max_steps: u64,
    /// Extra units, ranked by running variance, to include in `z_sample`.
    pub top_k: usize,
    /// Send every hidden unit in `z_sample`.
    pub full_dump: bool,
}

impl SessionConfig {
    pub fn new(kind: EnvKind, seed: u64) -> Self {
        Self { kind, seed, max_steps: kind.timeout() as u64, top_k: 8, full_dump: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEventKind {
    Started { seed: u64 },
    Applied { command: BehaviorCommand, duration: Option<u64>, human: bool },
    Released { command: String },
    Expired { command: String },
    /// Released before it ever became active.
    Cancelled { command: String },
    Paused,
    Resumed,
    Finished { reason: Option<Termination> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionEvent {
    pub tick: u64,
    pub kind: SessionEventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveCommand {
    pub command: BehaviorCommand,
    pub overrides: Vec<StimulationOverride>,
    pub start_tick: u64,
    pub remaining: Option<u64>,
    pub human: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum PendingOp {
    Apply { command: BehaviorCommand, overrides: Vec<StimulationOverride>, duration: Option<u64>, human: bool },
    Release(String),
}

/// Returned when a command is accepted; it becomes active at `activates_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ack {
    pub command: String,
    pub overrides: Vec<StimulationOverride>,
    pub activates_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverrideView {
    pub command: String,
    pub layer: usize,
    pub unit: usize,
    pub value: f64,
}

/// Everything a client needs to draw one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFrame {
    pub tick: u64,
    pub mode: SessionMode,
    pub env: EnvKind,
    pub pose: (f64, f64, f64),
    pub kinematics: Vec<(String, f64)>,
    pub action: Vec<f64>,
    pub overrides: Vec<OverrideView>,
    pub z_sample: Vec<(UnitAddr, f64)>,
    pub human_involvement: u64,
    pub episode_return: f64,
    pub termination: Option<Termination>,
}

/// Full state for a client joining mid-episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub frame: StateFrame,
    pub seed: u64,
    pub trajectory: Vec<(f64, f64, f64)>,
    pub commands: Vec<BehaviorCommand>,
    pub preset: EnvPreset,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, Copy, Default)]
struct RunningVariance {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningVariance {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }
}

/// One shared-control episode: owns the environment, the policy and all
/// mutable state; callers drive it tick by tick.
pub struct Session {
    cfg: SessionConfig,
    policy: PortablePolicy,
    map: StimulationEvokedMap,
    preset: EnvPreset,
    seed: u64,
    state: EnvState,
    obs: Vec<f64>,
    tick: u64,
    mode: SessionMode,
    active: Vec<ActiveCommand>,
    pending: Vec<PendingOp>,
    human_involvement: u64,
    episode_return: f64,
    termination: Option<Termination>,
    kinematics: Vec<f64>,
    last_trace: ForwardTrace,
    unit_stats: Vec<RunningVariance>,
    steps: Vec<StepRecord>,
    trajectory: Vec<(f64, f64, f64)>,
    events: Vec<SessionEvent>,
}

impl Session {
    pub fn new(policy: PortablePolicy, map: StimulationEvokedMap, preset: EnvPreset, cfg: SessionConfig) -> Result<Self> {
        if preset.kind != cfg.kind {
            return Err(invalid(format!("preset {:?} is for {}, session is {}", preset.name, preset.kind, cfg.kind)));
        }
        if policy.obs_dim() != cfg.kind.obs_dim() || policy.act_dim() != cfg.kind.act_dim() {
            return Err(invalid(format!(
                "policy maps {} -> {} but {} needs {} -> {}",
                policy.obs_dim(),
                policy.act_dim(),
                cfg.kind,
                cfg.kind.obs_dim(),
                cfg.kind.act_dim()
            )));
        }
        if cfg.max_steps == 0 {
            return Err(invalid("max_steps must be positive"));
        }
        for p in map.primitives() {
            if !policy.contains(p.unit) {
                return Err(invalid(format!("map primitive {} is outside the policy", p.unit)));
            }
        }
        let (state, obs) = reset(cfg.kind, cfg.seed);
        let mut s = Self {
            seed: cfg.seed,
            kinematics: state.kinematics(),
            trajectory: alloc::vec![state.pose()],
            last_trace: policy.forward(&obs, &[])?,
            unit_stats: alloc::vec![RunningVariance::default(); policy.unit_count()],
            cfg,
            policy,
            map,
            preset,
            state,
            obs,
            tick: 0,
            mode: SessionMode::Running,
            active: Vec::new(),
            pending: Vec::new(),
            human_involvement: 0,
            episode_return: 0.0,
            termination: None,
            steps: Vec::new(),
            events: Vec::new(),
        };
        s.events.push(SessionEvent { tick: 0, kind: SessionEventKind::Started { seed: s.seed } });
        Ok(s)
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn mode(&self) -> SessionMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn human_involvement(&self) -> u64 {
        self.human_involvement
    }

    pub fn active(&self) -> &[ActiveCommand] {
        &self.active
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn map(&self) -> &StimulationEvokedMap {
        &self.map
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn last_trace(&self) -> &ForwardTrace {
        &self.last_trace
    }

    /// Names accepted by [`apply_command`](Self::apply_command).
    pub fn command_names(&self) -> Vec<String> {
        command_names(&self.preset, &self.map)
    }

    fn lookup(&self, name: &str, k: Option<f64>) -> Result<BehaviorCommand> {
        find_command(&self.preset, &self.map, name, k)
    }

    fn releasing(&self, name: &str) -> bool {
        self.pending.iter().any(|p| matches!(p, PendingOp::Release(n) if n == name))
    }

    /// Units that will be pinned after the pending operations are applied.
    fn occupied_units(&self) -> Vec<(UnitAddr, String)> {
        let mut occupied: Vec<(UnitAddr, String)> = self
            .active
            .iter()
            .filter(|a| !self.releasing(&a.command.name))
            .flat_map(|a| a.overrides.iter().map(move |o| (o.addr(), a.command.name.clone())))
            .collect();
        for p in &self.pending {
            if let PendingOp::Apply { command, overrides, .. } = p {
                occupied.extend(overrides.iter().map(|o| (o.addr(), command.name.clone())));
            }
        }
        occupied
    }

    /// Queues a behaviour command for the next tick boundary.
    pub fn apply_command(&mut self, name: &str, k: Option<f64>, duration: Option<u64>) -> Result<Ack> {
        self.apply_inner(name, k, duration, true)
    }

    /// Like [`apply_command`](Self::apply_command) but not counted as human involvement.
    pub fn apply_scheduled(&mut self, name: &str, k: Option<f64>, duration: Option<u64>) -> Result<Ack> {
        self.apply_inner(name, k, duration, false)
    }

    fn apply_inner(&mut self, name: &str, k: Option<f64>, duration: Option<u64>, human: bool) -> Result<Ack> {
        if self.mode == SessionMode::Finished {
            return Err(invalid("session is finished; reset to start a new episode"));
        }
        if duration == Some(0) {
            return Err(invalid("duration must be at least one tick"));
        }
        let command = self.lookup(name, k)?;
        let overrides = resolve_command(&self.map, &command)?;
        let occupied = self.occupied_units();
        if occupied.iter().any(|(_, n)| n == name) {
            return Err(invalid(format!("command {name:?} is already active")));
        }
        for o in &overrides {
            if let Some((_, other)) = occupied.iter().find(|(a, _)| *a == o.addr()) {
                return Err(Error::Conflict { unit: o.addr(), detail: format!("already driven by {other:?}") });
            }
        }
        self.pending.push(PendingOp::Apply { command, overrides: overrides.clone(), duration, human });
        Ok(Ack { command: name.to_string(), overrides, activates_at: self.tick })
    }

    /// Queues removal of a command. Releasing something inactive is a no-op.
    pub fn release_command(&mut self, name: &str) -> bool {
        if let Some(i) = self.pending.iter().position(|p| matches!(p, PendingOp::Apply { command, .. } if command.name == name)) {
            self.pending.remove(i);
            self.events.push(SessionEvent { tick: self.tick, kind: SessionEventKind::Cancelled { command: name.to_string() } });
            return true;
        }
        if self.active.iter().any(|a| a.command.name == name) && !self.releasing(name) {
            self.pending.push(PendingOp::Release(name.to_string()));
            return true;
        }
        false
    }

    /// Releases every active and pending command (used when the controller leaves).
    pub fn release_all(&mut self) {
        let names: Vec<String> = self
            .pending
            .iter()
            .filter_map(|p| match p {
                PendingOp::Apply { command, .. } => Some(command.name.clone()),
                PendingOp::Release(_) => None,
            })
            .chain(self.active.iter().map(|a| a.command.name.clone()))
            .collect();
        for n in names {
            self.release_command(&n);
        }
    }

    pub fn pause(&mut self) {
        if self.mode == SessionMode::Running {
            self.mode = SessionMode::Paused;
            self.events.push(SessionEvent { tick: self.tick, kind: SessionEventKind::Paused });
        }
    }

    pub fn resume(&mut self) {
        if self.mode == SessionMode::Paused {
            self.mode = SessionMode::Running;
            self.events.push(SessionEvent { tick: self.tick, kind: SessionEventKind::Resumed });
        }
    }

    /// Starts a fresh episode: new seed, counters zeroed, log restarted.
    pub fn reset(&mut self, seed: u64) -> Result<()> {
        let (state, obs) = reset(self.cfg.kind, seed);
        self.last_trace = self.policy.forward(&obs, &[])?;
        self.seed = seed;
        self.kinematics = state.kinematics();
        self.trajectory = alloc::vec![state.pose()];
        self.state = state;
        self.obs = obs;
        self.tick = 0;
        self.mode = SessionMode::Running;
        self.active.clear();
        self.pending.clear();
        self.human_involvement = 0;
        self.episode_return = 0.0;
        self.termination = None;
        self.unit_stats = alloc::vec![RunningVariance::default(); self.policy.unit_count()];
        self.steps.clear();
        self.events = alloc::vec![SessionEvent { tick: 0, kind: SessionEventKind::Started { seed } }];
        Ok(())
    }

    fn drain_pending(&mut self) {
        for op in core::mem::take(&mut self.pending) {
            match op {
                PendingOp::Release(name) => {
                    self.active.retain(|a| a.command.name != name);
                    self.events.push(SessionEvent { tick: self.tick, kind: SessionEventKind::Released { command: name } });
                }
                PendingOp::Apply { command, overrides, duration, human } => {
                    self.events.push(SessionEvent {
                        tick: self.tick,
                        kind: SessionEventKind::Applied { command: command.clone(), duration, human },
                    });
                    self.active.push(ActiveCommand { command, overrides, start_tick: self.tick, remaining: duration, human });
                }
            }
        }
    }

    /// Advances one environment step. A paused or finished session is left
    /// untouched and its current frame returned.
    pub fn tick(&mut self) -> Result<StateFrame> {
        if self.mode != SessionMode::Running {
            return Ok(self.frame());
        }
        self.drain_pending();
        let overrides: Vec<StimulationOverride> = self.active.iter().flat_map(|a| a.overrides.iter().copied()).collect();
        let mut trace = ForwardTrace::default();
        self.policy.forward_into(&self.obs, &overrides, &mut trace)?;
        let r = self.state.step(&trace.action)?;

        self.steps.push(StepRecord {
            t: self.tick,
            observation: core::mem::take(&mut self.obs),
            action: trace.action.clone(),
            activations: trace.hidden.clone(),
            kinematics: r.kinematics.clone(),
        });
        if self.active.iter().any(|a| a.human) {
            self.human_involvement += 1;
        }
        self.episode_return += r.reward;
        for (stat, z) in self.unit_stats.iter_mut().zip(trace.hidden.iter().flatten()) {
            stat.push(*z);
        }
        self.kinematics = r.kinematics;
        self.last_trace = trace;
        self.state = r.next;
        self.obs = self.state.observe();
        self.trajectory.push(self.state.pose());
        self.tick += 1;

        let tick = self.tick;
        let mut expired = Vec::new();
        self.active.retain_mut(|a| {
            if let Some(rem) = a.remaining.as_mut() {
                *rem -= 1;
                if *rem == 0 {
                    expired.push(a.command.name.clone());
                    return false;
                }
            }
            true
        });
        for command in expired {
            self.events.push(SessionEvent { tick, kind: SessionEventKind::Expired { command } });
        }

        if r.terminated.is_some() || self.tick >= self.cfg.max_steps {
            self.termination = r.terminated;
            self.mode = SessionMode::Finished;
            self.events.push(SessionEvent { tick, kind: SessionEventKind::Finished { reason: r.terminated } });
        }
        Ok(self.frame())
    }

    fn z_sample(&self) -> Vec<(UnitAddr, f64)> {
        let widths = self.policy.hidden_widths();
        let all: Vec<UnitAddr> =
            widths.iter().enumerate().flat_map(|(l, &n)| (0..n).map(move |i| UnitAddr::new(l, i))).collect();
        let mut chosen: Vec<UnitAddr> = if self.cfg.full_dump {
            all
        } else {
            let mut mapped: Vec<UnitAddr> = self.map.primitives().iter().map(|p| p.unit).collect();
            mapped.sort();
            mapped.dedup();
            let mut ranked: Vec<(usize, UnitAddr)> =
                all.into_iter().enumerate().filter(|(_, a)| mapped.binary_search(a).is_err()).collect();
            // Highest variance first, lowest address on ties.
            ranked.sort_by(|(i, a), (j, b)| {
                self.unit_stats[*j].variance().total_cmp(&self.unit_stats[*i].variance()).then(a.cmp(b))
            });
            mapped.extend(ranked.into_iter().take(self.cfg.top_k).map(|(_, a)| a));
            mapped
        };
        chosen.dedup();
        chosen.into_iter().filter_map(|a| self.last_trace.get(a).map(|v| (a, v))).collect()
    }

    pub fn frame(&self) -> StateFrame {
        StateFrame {
            tick: self.tick,
            mode: self.mode,
            env: self.cfg.kind,
            pose: self.state.pose(),
            kinematics: self.cfg.kind.kinematic_names().into_iter().zip(self.kinematics.iter().copied()).collect(),
            action: self.last_trace.action.clone(),
            overrides: self
                .active
                .iter()
                .flat_map(|a| {
                    a.overrides.iter().map(move |o| OverrideView {
                        command: a.command.name.clone(),
                        layer: o.layer,
                        unit: o.unit,
                        value: o.value,
                    })
                })
                .collect(),
            z_sample: self.z_sample(),
            human_involvement: self.human_involvement,
            episode_return: self.episode_return,
            termination: self.termination,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            frame: self.frame(),
            seed: self.seed,
            trajectory: self.trajectory.clone(),
            commands: self.preset.commands.clone(),
            preset: self.preset.clone(),
            events: self.events.clone(),
        }
    }

    /// The episode recorded so far.
    pub fn record(&self) -> Result<RolloutRecord> {
        RolloutRecord::new(self.seed, DT, self.policy.hidden_widths(), self.cfg.kind.kinematic_names(), self.steps.clone())
    }

    /// The current episode's commands as a batch schedule. Commands still
    /// latched when the log ends run to `max_steps`.
    pub fn replay_schedule(&self) -> StimulationSchedule {
        let mut entries = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            let SessionEventKind::Applied { command, .. } = &ev.kind else { continue };
            let end = self.events[i + 1..]
                .iter()
                .find_map(|later| match &later.kind {
                    SessionEventKind::Released { command: n } | SessionEventKind::Expired { command: n }
                        if *n == command.name =>
                    {
                        Some(later.tick)
                    }
                    _ => None,
                })
                .unwrap_or(self.cfg.max_steps);
            if end > ev.tick {
                entries.push(ScheduledCommand { start_tick: ev.tick, duration: end - ev.tick, command: command.clone() });
            }
        }
        StimulationSchedule { entries }
    }
}
