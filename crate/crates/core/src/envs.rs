//! Deterministic toy control tasks.
//!
//! * `PlanarAnt`: a damped planar body driven by forward/lateral thrust and a
//!   yaw torque. Rewarded only for +x progress.
//! * `PointCar`: a kinematic car on a straight lane of half-width 2 m that must
//!   reach x = 100 m. Reward is `c1 * dx + c2 * v/v_max` per step with
//!   `c1 = 1`, `c2 = 0.1`; the terminal step pays only the terminal reward
//!   (+10 at the goal, -5 off the road).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dissect::BehaviorCommand;
use crate::error::{invalid, Error, Result};
use crate::rng::SplitMix64;
use crate::spectral::wrap_phase;

/// Simulation step for both tasks, seconds.
pub const DT: f64 = 0.05;

pub const ANT_DAMPING: f64 = 0.5;
pub const ANT_YAW_DAMPING: f64 = 1.0;
pub const ANT_TIMEOUT: u32 = 1000;

pub const CAR_ACCEL_GAIN: f64 = 3.0;
pub const CAR_STEER_GAIN: f64 = 1.5;
pub const CAR_V_MAX: f64 = 10.0;
pub const CAR_LANE_HALF_WIDTH: f64 = 2.0;
pub const CAR_GOAL_DISTANCE: f64 = 100.0;
pub const CAR_TIMEOUT: u32 = 600;
pub const CAR_DISPLACEMENT_WEIGHT: f64 = 1.0;
pub const CAR_SPEED_WEIGHT: f64 = 0.1;
pub const CAR_GOAL_REWARD: f64 = 10.0;
pub const CAR_OUT_OF_ROAD_REWARD: f64 = -5.0;
/// Reset draws the lateral offset uniformly from `[-0.5, 0.5)`.
pub const CAR_INITIAL_OFFSET: f64 = 0.5;

pub const ANT_CHANNELS: [&str; 5] = ["v_x", "v_y", "speed", "yaw", "yaw_rate"];
pub const CAR_CHANNELS: [&str; 4] = ["speed", "yaw_rate", "lateral_offset", "heading_error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    PlanarAnt,
    PointCar,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::PlanarAnt => "ant",
            EnvKind::PointCar => "car",
        }
    }

    pub fn obs_dim(self) -> usize {
        5
    }

    pub fn act_dim(self) -> usize {
        match self {
            EnvKind::PlanarAnt => 3,
            EnvKind::PointCar => 2,
        }
    }

    pub fn timeout(self) -> u32 {
        match self {
            EnvKind::PlanarAnt => ANT_TIMEOUT,
            EnvKind::PointCar => CAR_TIMEOUT,
        }
    }

    pub fn kinematic_channels(self) -> &'static [&'static str] {
        match self {
            EnvKind::PlanarAnt => &ANT_CHANNELS,
            EnvKind::PointCar => &CAR_CHANNELS,
        }
    }

    pub fn kinematic_names(self) -> Vec<String> {
        self.kinematic_channels().iter().map(|s| String::from(*s)).collect()
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ant" | "planar_ant" => Ok(EnvKind::PlanarAnt),
            "car" | "point_car" => Ok(EnvKind::PointCar),
            other => Err(invalid(format!("unknown environment {other:?}; expected car or ant"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarAntState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Forward body velocity.
    pub u: f64,
    /// Lateral body velocity.
    pub w: f64,
    pub omega: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointCarState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvState {
    Ant(PlanarAntState),
    Car(PointCarState),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Goal,
    OutOfRoad,
    Timeout,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Goal => "goal",
            Termination::OutOfRoad => "out_of_road",
            Termination::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStepResult {
    pub next: EnvState,
    pub reward: f64,
    pub terminated: Option<Termination>,
    /// Values in [`EnvKind::kinematic_channels`] order.
    pub kinematics: Vec<f64>,
}

fn check_action(action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(Error::DimensionMismatch { what: "action".into(), expected: dim, found: action.len() });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("action".into()));
    }
    Ok(())
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn ant_step(s: &PlanarAntState, action: &[f64]) -> Result<EnvStepResult> {
    check_action(action, 3)?;
    if !all_finite(&[s.x, s.y, s.theta, s.u, s.w, s.omega]) {
        return Err(Error::NonFinite("ant state".into()));
    }
    let a_f = action[0].clamp(-1.0, 1.0);
    let a_l = action[1].clamp(-1.0, 1.0);
    let tau = action[2].clamp(-1.0, 1.0);

    let u = s.u + (a_f - ANT_DAMPING * s.u) * DT;
    let w = s.w + (a_l - ANT_DAMPING * s.w) * DT;
    let omega = s.omega + (tau - ANT_YAW_DAMPING * s.omega) * DT;
    let theta = wrap_phase(s.theta + omega * DT);
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let v_x = u * cos - w * sin;
    let v_y = u * sin + w * cos;
    let next = PlanarAntState { x: s.x + v_x * DT, y: s.y + v_y * DT, theta, u, w, omega, steps: s.steps + 1 };
    let terminated = (next.steps >= ANT_TIMEOUT).then_some(Termination::Timeout);
    Ok(EnvStepResult {
        next: EnvState::Ant(next),
        reward: v_x * DT,
        terminated,
        kinematics: vec![v_x, v_y, libm::sqrt(u * u + w * w), theta, omega],
    })
}

pub fn car_step(s: &PointCarState, action: &[f64]) -> Result<EnvStepResult> {
    check_action(action, 2)?;
    if !all_finite(&[s.x, s.y, s.theta, s.v]) {
        return Err(Error::NonFinite("car state".into()));
    }
    let accel = action[0].clamp(-1.0, 1.0);
    let steer = action[1].clamp(-1.0, 1.0);

    let v = (s.v + CAR_ACCEL_GAIN * accel * DT).clamp(0.0, CAR_V_MAX);
    let yaw_rate = CAR_STEER_GAIN * steer;
    let theta = wrap_phase(s.theta + yaw_rate * DT);
    let x = s.x + v * libm::cos(theta) * DT;
    let y = s.y + v * libm::sin(theta) * DT;
    let next = PointCarState { x, y, theta, v, steps: s.steps + 1 };

    let terminated = if x >= CAR_GOAL_DISTANCE {
        Some(Termination::Goal)
    } else if y.abs() > CAR_LANE_HALF_WIDTH {
        Some(Termination::OutOfRoad)
    } else if next.steps >= CAR_TIMEOUT {
        Some(Termination::Timeout)
    } else {
        None
    };
    let reward = match terminated {
        Some(Termination::Goal) => CAR_GOAL_REWARD,
        Some(Termination::OutOfRoad) => CAR_OUT_OF_ROAD_REWARD,
        _ => CAR_DISPLACEMENT_WEIGHT * (x - s.x) + CAR_SPEED_WEIGHT * v / CAR_V_MAX,
    };
    Ok(EnvStepResult { next: EnvState::Car(next), reward, terminated, kinematics: vec![v, yaw_rate, y, theta] })
}

pub fn reset(kind: EnvKind, seed: u64) -> (EnvState, Vec<f64>) {
    let state = match kind {
        EnvKind::PlanarAnt => EnvState::Ant(PlanarAntState::default()),
        EnvKind::PointCar => {
            let mut rng = SplitMix64::new(seed);
            let y = rng.uniform(-CAR_INITIAL_OFFSET, CAR_INITIAL_OFFSET);
            EnvState::Car(PointCarState { y, ..PointCarState::default() })
        }
    };
    let obs = observe(&state);
    (state, obs)
}

pub fn observe(state: &EnvState) -> Vec<f64> {
    match state {
        EnvState::Ant(s) => vec![s.u, s.w, s.omega, libm::sin(s.theta), libm::cos(s.theta)],
        EnvState::Car(s) => vec![
            s.v / CAR_V_MAX,
            libm::sin(s.theta),
            libm::cos(s.theta),
            s.y / CAR_LANE_HALF_WIDTH,
            (CAR_GOAL_DISTANCE - s.x) / CAR_GOAL_DISTANCE,
        ],
    }
}

impl EnvState {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvState::Ant(_) => EnvKind::PlanarAnt,
            EnvState::Car(_) => EnvKind::PointCar,
        }
    }

    pub fn step(&self, action: &[f64]) -> Result<EnvStepResult> {
        match self {
            EnvState::Ant(s) => ant_step(s, action),
            EnvState::Car(s) => car_step(s, action),
        }
    }

    pub fn observe(&self) -> Vec<f64> {
        observe(self)
    }

    pub fn steps(&self) -> u32 {
        match self {
            EnvState::Ant(s) => s.steps,
            EnvState::Car(s) => s.steps,
        }
    }

    /// Planar pose `(x, y, theta)`.
    pub fn pose(&self) -> (f64, f64, f64) {
        match self {
            EnvState::Ant(s) => (s.x, s.y, s.theta),
            EnvState::Car(s) => (s.x, s.y, s.theta),
        }
    }

    /// Kinematics of a state not reached through a step (e.g. right after reset).
    /// Rates that depend on the last action are reported from the state alone.
    pub fn kinematics(&self) -> Vec<f64> {
        match self {
            EnvState::Ant(s) => {
                let (sin, cos) = (libm::sin(s.theta), libm::cos(s.theta));
                vec![s.u * cos - s.w * sin, s.u * sin + s.w * cos, libm::sqrt(s.u * s.u + s.w * s.w), s.theta, s.omega]
            }
            EnvState::Car(s) => vec![s.v, 0.0, s.y, s.theta],
        }
    }
}

/// A key binding shipped with a preset for interactive control panels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyBinding {
    pub key: String,
    pub command: String,
}

/// Named environment configuration: constants, the kinematic attributes to
/// dissect, and the default behaviour commands with their hand-set `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPreset {
    pub name: String,
    pub kind: EnvKind,
    pub constants: Vec<(String, f64)>,
    pub attributes: Vec<String>,
    pub commands: Vec<BehaviorCommand>,
    pub key_bindings: Vec<KeyBinding>,
}

impl EnvPreset {
    pub fn builtin(kind: EnvKind) -> Self {
        let c = |n: &str, v: f64| (String::from(n), v);
        let cmd = |name: &str, entries: &[(&str, f64)]| {
            BehaviorCommand::new(name, entries.iter().map(|(a, k)| (String::from(*a), *k)).collect())
        };
        let key = |k: &str, c: &str| KeyBinding { key: k.into(), command: c.into() };
        match kind {
            EnvKind::PointCar => Self {
                name: "car".into(),
                kind,
                constants: vec![
                    c("dt", DT),
                    c("accel_gain", CAR_ACCEL_GAIN),
                    c("steer_gain", CAR_STEER_GAIN),
                    c("v_max", CAR_V_MAX),
                    c("lane_half_width", CAR_LANE_HALF_WIDTH),
                    c("goal_distance", CAR_GOAL_DISTANCE),
                    c("timeout", CAR_TIMEOUT as f64),
                    c("c1", CAR_DISPLACEMENT_WEIGHT),
                    c("c2", CAR_SPEED_WEIGHT),
                ],
                attributes: kind.kinematic_names(),
                commands: vec![
                    cmd("brake", &[("speed", -0.6)]),
                    cmd("lane_left", &[("lateral_offset", 0.5)]),
                    cmd("lane_right", &[("lateral_offset", -0.5)]),
                ],
                key_bindings: vec![key("s", "brake"), key("a", "lane_left"), key("d", "lane_right")],
            },
            EnvKind::PlanarAnt => Self {
                name: "ant".into(),
                kind,
                constants: vec![
                    c("dt", DT),
                    c("damping", ANT_DAMPING),
                    c("yaw_damping", ANT_YAW_DAMPING),
                    c("timeout", ANT_TIMEOUT as f64),
                ],
                attributes: kind.kinematic_names(),
                commands: vec![
                    cmd("spin", &[("yaw_rate", 0.8)]),
                    cmd("spin_reverse", &[("yaw_rate", -0.8)]),
                    cmd("move_y", &[("v_y", 0.5), ("yaw", 0.5)]),
                    cmd("stop", &[("v_x", -0.6)]),
                ],
                key_bindings: vec![
                    key("q", "spin"),
                    key("e", "spin_reverse"),
                    key("w", "move_y"),
                    key("s", "stop"),
                ],
            },
        }
    }

    pub fn command(&self, name: &str) -> Option<&BehaviorCommand> {
        self.commands.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ant_thrust_from_rest() {
        let r = ant_step(&PlanarAntState::default(), &[1.0, 0.0, 0.0]).unwrap();
        let EnvState::Ant(s) = r.next else { panic!() };
        assert!((s.u - 0.05).abs() < 1e-15);
        assert!((r.kinematics[0] - 0.05).abs() < 1e-15);
        assert!((r.reward - 0.0025).abs() < 1e-15);
        assert_eq!(r.terminated, None);
    }

    #[test]
    fn ant_rest_is_fixed_point() {
        let r = ant_step(&PlanarAntState::default(), &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.next, EnvState::Ant(PlanarAntState { steps: 1, ..Default::default() }));
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn ant_damping() {
        let s = PlanarAntState { u: 2.0, ..Default::default() };
        let r = ant_step(&s, &[0.0, 0.0, 0.0]).unwrap();
        let EnvState::Ant(n) = r.next else { panic!() };
        assert!((n.u - 1.95).abs() < 1e-15);
    }

    #[test]
    fn ant_speeds_decay_without_action() {
        let mut s = PlanarAntState { u: 1.0, w: -0.7, omega: 2.0, ..Default::default() };
        for _ in 0..200 {
            let EnvState::Ant(n) = ant_step(&s, &[0.0; 3]).unwrap().next else { panic!() };
            assert!(n.u.abs() < s.u.abs() && n.w.abs() < s.w.abs() && n.omega.abs() < s.omega.abs());
            s = n;
        }
    }

    #[test]
    fn ant_times_out() {
        let s = PlanarAntState { steps: ANT_TIMEOUT - 1, ..Default::default() };
        assert_eq!(ant_step(&s, &[0.0; 3]).unwrap().terminated, Some(Termination::Timeout));
    }

    #[test]
    fn car_speed_saturates() {
        let s = PointCarState { v: 10.0, ..Default::default() };
        let EnvState::Car(n) = car_step(&s, &[1.0, 0.0]).unwrap().next else { panic!() };
        assert_eq!(n.v, 10.0);
        let EnvState::Car(n) = car_step(&PointCarState::default(), &[-1.0, 0.0]).unwrap().next else { panic!() };
        assert_eq!(n.v, 0.0);
    }

    #[test]
    fn car_reward_weights() {
        let s = PointCarState { v: 5.0, ..Default::default() };
        let r = car_step(&s, &[0.0, 0.0]).unwrap();
        assert!((r.reward - (5.0 * DT + 0.1 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn car_lateral_and_yaw_channels() {
        let s = PointCarState { v: 8.0, y: 0.3, theta: 0.1, ..Default::default() };
        let r = car_step(&s, &[0.0, 0.4]).unwrap();
        let EnvState::Car(n) = r.next else { panic!() };
        assert_eq!(r.kinematics[2], n.y);
        assert!((r.kinematics[1] - (n.theta - s.theta) / DT).abs() < 1e-12);
    }

    #[test]
    fn car_full_speed_run_reaches_goal() {
        let (mut state, _) = reset(EnvKind::PointCar, 0);
        let EnvState::Car(c) = state else { panic!() };
        let y0 = c.y;
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let r = state.step(&[1.0, 0.0]).unwrap();
            total += r.reward;
            steps += 1;
            state = r.next;
            if let Some(t) = r.terminated {
                assert_eq!(t, Termination::Goal);
                break;
            }
        }
        // Closed form: the speed ramps by 0.15 m/s per step and saturates at
        // step 67; position after n steps is 0.05 * sum of speeds.
        let mut x = 0.0;
        let mut v: f64 = 0.0;
        let mut n = 0;
        let mut shaped = 0.0;
        while x < 100.0 {
            v = (v + 3.0 * 0.05).min(10.0);
            let nx = x + v * 0.05;
            n += 1;
            if nx < 100.0 {
                shaped += (nx - x) + 0.1 * v / 10.0;
            }
            x = nx;
        }
        assert_eq!(steps, n);
        assert_eq!(n, 233);
        assert!((total - (shaped + 10.0)).abs() < 1e-9);
        let EnvState::Car(c) = state else { panic!() };
        assert_eq!(c.y, y0);
    }

    #[test]
    fn car_out_of_road() {
        let s = PointCarState { v: 10.0, y: 1.99, theta: 0.5, ..Default::default() };
        let r = car_step(&s, &[0.0, 0.0]).unwrap();
        assert_eq!(r.terminated, Some(Termination::OutOfRoad));
        assert_eq!(r.reward, CAR_OUT_OF_ROAD_REWARD);
    }

    #[test]
    fn reset_is_seeded() {
        assert_eq!(reset(EnvKind::PointCar, 9), reset(EnvKind::PointCar, 9));
        let (s, obs) = reset(EnvKind::PlanarAnt, 9);
        assert_eq!(obs, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(s.kinematics().iter().all(|&v| v == 0.0));
        // The documented generator: one splitmix64 draw mapped to [-0.5, 0.5).
        let mut rng = SplitMix64::new(9);
        let y = -0.5 + rng.next_f64();
        let EnvState::Car(c) = reset(EnvKind::PointCar, 9).0 else { panic!() };
        assert_eq!(c.y, y);
        let mut r0 = SplitMix64::new(0);
        let expected = (0xE220_A839_7B1D_CDAFu64 >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        assert_eq!(r0.next_f64() - 0.5, expected);
    }

    #[test]
    fn car_observation_at_centre() {
        let s = EnvState::Car(PointCarState::default());
        assert_eq!(observe(&s), vec![0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(EnvKind::PointCar.obs_dim(), 5);
        assert_eq!(EnvKind::PlanarAnt.obs_dim(), 5);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(car_step(&PointCarState::default(), &[f64::NAN, 0.0]).is_err());
        let s = PlanarAntState { u: f64::INFINITY, ..Default::default() };
        assert!(ant_step(&s, &[0.0; 3]).is_err());
    }

    #[test]
    fn channel_schema() {
        assert_eq!(EnvKind::PlanarAnt.kinematic_channels(), &["v_x", "v_y", "speed", "yaw", "yaw_rate"]);
        assert_eq!(EnvKind::PointCar.kinematic_channels(), &["speed", "yaw_rate", "lateral_offset", "heading_error"]);
        let r = car_step(&PointCarState::default(), &[0.5, 0.1]).unwrap();
        assert_eq!(r.kinematics.len(), 4);
        let r = ant_step(&PlanarAntState::default(), &[0.5, 0.1, 0.2]).unwrap();
        assert_eq!(r.kinematics.len(), 5);
    }
}
