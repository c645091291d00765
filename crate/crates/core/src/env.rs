//! Deterministic cart-pole with normalized observations.
//!
//! Classical inverted-pendulum dynamics integrated with explicit Euler. Each
//! step earns +1. An episode ends when the pole leans past the angle limit,
//! the cart leaves the track, or the step budget is used up.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::init::Rng;

/// Half-width of the uniform reset noise on the pole angle, in radians.
pub const RESET_ANGLE_NOISE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartpoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub gravity: f64,
    pub force_magnitude: f64,
    pub dt: f64,
    pub angle_limit: f64,
    pub position_limit: f64,
    pub max_steps: usize,
    /// Normalization half-range of the cart velocity.
    pub velocity_range: f64,
    /// Normalization half-range of the pole tip velocity.
    pub tip_velocity_range: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        CartpoleParams {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            gravity: 9.8,
            force_magnitude: 10.0,
            dt: 0.02,
            angle_limit: 15f64.to_radians(),
            position_limit: 0.39,
            max_steps: 195,
            velocity_range: 2.0,
            tip_velocity_range: 3.0,
        }
    }
}

impl CartpoleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_half_length", self.pole_half_length),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("angle_limit", self.angle_limit),
            ("position_limit", self.position_limit),
            ("velocity_range", self.velocity_range),
            ("tip_velocity_range", self.tip_velocity_range),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.force_magnitude >= 0.0 && self.force_magnitude.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "force_magnitude must be non-negative, got {}",
                self.force_magnitude
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Forward = 0,
    Backward = 1,
}

impl Action {
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Action::Forward),
            1 => Ok(Action::Backward),
            _ => Err(Error::InvalidArgument(format!(
                "action index {i} out of range"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::Backward => "backward",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "forward" | "0" => Ok(Action::Forward),
            "backward" | "1" => Ok(Action::Backward),
            other => Err(Error::InvalidArgument(format!("unknown action '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartpoleState {
    pub x: f64,
    pub x_dot: f64,
    /// 0 is upright; positive leans toward +x.
    pub theta: f64,
    pub theta_dot: f64,
    pub step_index: usize,
}

/// Normalized (cart position, cart velocity, pole angle, tip velocity), each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; 4]);

impl Observation {
    pub const POSITION: usize = 0;
    pub const VELOCITY: usize = 1;
    pub const ANGLE: usize = 2;
    pub const TIP_VELOCITY: usize = 3;

    pub fn midpoint() -> Self {
        Observation([0.5; 4])
    }

    pub fn new(values: [f64; 4]) -> Result<Self> {
        let obs = Observation(values);
        obs.validate()?;
        Ok(obs)
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; 4] = values.try_into().map_err(|_| {
            Error::InvalidArgument(format!("observation needs 4 values, got {}", values.len()))
        })?;
        Observation::new(arr)
    }

    pub fn validate(&self) -> Result<()> {
        match self.0.iter().position(|v| !(0.0..=1.0).contains(v)) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidArgument(format!(
                "observation component {i} = {} lies outside [0, 1]",
                self.0[i]
            ))),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    Running,
    PoleFell,
    CartOut,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub termination_reason: TerminationReason,
}

/// Maps `v ∈ [−range, range]` onto [0, 1], clamping first.
#[inline]
fn normalize(v: f64, range: f64) -> f64 {
    (v.clamp(-range, range) + range) / (2.0 * range)
}

pub fn observe(state: &CartpoleState, params: &CartpoleParams) -> Observation {
    let tip_velocity =
        state.x_dot + 2.0 * params.pole_half_length * state.theta_dot * state.theta.cos();
    Observation([
        normalize(state.x, params.position_limit),
        normalize(state.x_dot, params.velocity_range),
        normalize(state.theta, params.angle_limit),
        normalize(tip_velocity, params.tip_velocity_range),
    ])
}

/// Reset from a unit draw `u ∈ [0, 1)`: θ = (2u − 1)·0.05, everything else 0.
pub fn reset_from_unit(u: f64) -> CartpoleState {
    CartpoleState {
        theta: (2.0 * u - 1.0) * RESET_ANGLE_NOISE,
        ..CartpoleState::default()
    }
}

pub fn reset(params: &CartpoleParams, rng: &mut Rng) -> (CartpoleState, Observation) {
    let state = reset_from_unit(rng.unit());
    (state, observe(&state, params))
}

/// Which termination rule (if any) applies to `state`, checked in the order
/// pole angle, cart position, step budget.
pub fn termination(state: &CartpoleState, params: &CartpoleParams) -> TerminationReason {
    if state.theta.abs() > params.angle_limit {
        TerminationReason::PoleFell
    } else if state.x.abs() > params.position_limit {
        TerminationReason::CartOut
    } else if state.step_index >= params.max_steps {
        TerminationReason::MaxSteps
    } else {
        TerminationReason::Running
    }
}

/// (ẍ, θ̈) for the given state and applied horizontal force.
pub fn accelerations(state: &CartpoleState, force: f64, params: &CartpoleParams) -> (f64, f64) {
    let total_mass = params.cart_mass + params.pole_mass;
    let l = params.pole_half_length;
    let (sin, cos) = state.theta.sin_cos();
    let temp =
        (force + params.pole_mass * l * state.theta_dot * state.theta_dot * sin) / total_mass;
    let theta_acc = (params.gravity * sin - cos * temp)
        / (l * (4.0 / 3.0 - params.pole_mass * cos * cos / total_mass));
    let x_acc = (force
        + params.pole_mass * l * (state.theta_dot * state.theta_dot * sin - theta_acc * cos))
        / total_mass;
    (x_acc, theta_acc)
}

pub fn step(
    state: &CartpoleState,
    action: Action,
    params: &CartpoleParams,
) -> Result<(CartpoleState, StepResult)> {
    if termination(state, params) != TerminationReason::Running {
        return Err(Error::EpisodeTerminated);
    }
    let force = match action {
        Action::Forward => params.force_magnitude,
        Action::Backward => -params.force_magnitude,
    };
    let (x_acc, theta_acc) = accelerations(state, force, params);
    let dt = params.dt;
    let next = CartpoleState {
        x: state.x + dt * state.x_dot,
        x_dot: state.x_dot + dt * x_acc,
        theta: state.theta + dt * state.theta_dot,
        theta_dot: state.theta_dot + dt * theta_acc,
        step_index: state.step_index + 1,
    };
    let reason = termination(&next, params);
    Ok((
        next,
        StepResult {
            observation: observe(&next, params),
            reward: 1.0,
            done: reason != TerminationReason::Running,
            termination_reason: reason,
        },
    ))
}

/// Stateful wrapper around [`reset`] / [`step`].
#[derive(Debug, Clone)]
pub struct Cartpole {
    params: CartpoleParams,
    state: CartpoleState,
    rng: Rng,
}

impl Cartpole {
    pub fn new(params: CartpoleParams, rng: Rng) -> Self {
        Cartpole {
            params,
            state: CartpoleState::default(),
            rng,
        }
    }

    pub fn params(&self) -> &CartpoleParams {
        &self.params
    }

    pub fn state(&self) -> &CartpoleState {
        &self.state
    }

    pub fn reset(&mut self) -> Observation {
        let (state, obs) = reset(&self.params, &mut self.rng);
        self.state = state;
        obs
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        let (next, result) = step(&self.state, action, &self.params)?;
        self.state = next;
        Ok(result)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub state: CartpoleState,
    pub action: Action,
    pub reward: f64,
    pub done: bool,
}

pub const TRAJECTORY_HEADER: &str = "step,x,x_dot,theta,theta_dot,action,reward,done";

pub fn write_trajectory_csv(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}\n",
            r.step,
            r.state.x,
            r.state.x_dot,
            r.state.theta,
            r.state.theta_dot,
            r.action.index(),
            r.reward,
            r.done as u8
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
