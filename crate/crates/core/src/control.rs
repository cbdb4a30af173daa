//! Discrete PID law and the summed position/velocity/effort strategy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("gain {name} = {value} outside [0, {max}]")]
    GainOutOfBounds {
        name: &'static str,
        value: f64,
        max: f64,
    },
}

/// Upper bounds of the admissible gain box; the lower bound is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBounds {
    pub kp_max: f64,
    pub ki_max: f64,
    pub kd_max: f64,
}

impl Default for GainBounds {
    fn default() -> Self {
        Self {
            kp_max: 1000.0,
            ki_max: 1.0,
            kd_max: 100.0,
        }
    }
}

impl GainBounds {
    pub fn as_array(&self) -> [f64; 3] {
        [self.kp_max, self.ki_max, self.kd_max]
    }
}

/// Proportional, integral and derivative gains of one joint controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const ZERO: PidGains = PidGains::raw(0.0, 0.0, 0.0);

    /// Builds gains without checking the bounds.
    pub const fn raw(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn new(kp: f64, ki: f64, kd: f64, bounds: &GainBounds) -> Result<Self, ControlError> {
        let gains = Self::raw(kp, ki, kd);
        gains.check(bounds)?;
        Ok(gains)
    }

    pub fn check(&self, bounds: &GainBounds) -> Result<(), ControlError> {
        for (name, value, max) in [
            ("kp", self.kp, bounds.kp_max),
            ("ki", self.ki, bounds.ki_max),
            ("kd", self.kd, bounds.kd_max),
        ] {
            if !(0.0..=max).contains(&value) {
                return Err(ControlError::GainOutOfBounds { name, value, max });
            }
        }
        Ok(())
    }

    pub fn is_within(&self, bounds: &GainBounds) -> bool {
        self.check(bounds).is_ok()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.kp, self.ki, self.kd]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::raw(a[0], a[1], a[2])
    }
}

/// Integrator and previous error of one PID loop.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// One tick of `u = kp·e + ki·∫e + kd·de/dt`.
///
/// The integral uses backward Euler and the derivative is a first
/// difference of the error, taken as zero on the first tick after a reset.
pub fn pid_step(gains: &PidGains, state: &mut PidState, error: f64, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    state.integral += error * dt;
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        0.0
    };
    state.prev_error = error;
    state.initialized = true;
    gains.kp * error + gains.ki * state.integral + gains.kd * derivative
}

/// Commanded or measured quantities for one joint.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointSignal {
    pub position: f64,
    pub velocity: f64,
    pub effort: f64,
}

/// Position, velocity and effort loops whose outputs are summed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlStrategy {
    pub position_gains: PidGains,
    pub velocity_gains: PidGains,
    pub effort_gains: PidGains,
}

impl ControlStrategy {
    /// Only the position loop active, the configuration used for tuning.
    pub fn position_only(gains: PidGains) -> Self {
        Self {
            position_gains: gains,
            velocity_gains: PidGains::ZERO,
            effort_gains: PidGains::ZERO,
        }
    }

    pub fn is_position_only(&self) -> bool {
        self.velocity_gains == PidGains::ZERO && self.effort_gains == PidGains::ZERO
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StrategyState {
    pub position: PidState,
    pub velocity: PidState,
    pub effort: PidState,
}

impl StrategyState {
    pub fn reset(&mut self) {
        self.position.reset();
        self.velocity.reset();
        self.effort.reset();
    }
}

pub fn strategy_output(
    strategy: &ControlStrategy,
    state: &mut StrategyState,
    commanded: &JointSignal,
    measured: &JointSignal,
    dt: f64,
) -> f64 {
    let position = pid_step(
        &strategy.position_gains,
        &mut state.position,
        commanded.position - measured.position,
        dt,
    );
    let velocity = pid_step(
        &strategy.velocity_gains,
        &mut state.velocity,
        commanded.velocity - measured.velocity,
        dt,
    );
    let effort = pid_step(
        &strategy.effort_gains,
        &mut state.effort,
        commanded.effort - measured.effort,
        dt,
    );
    position + velocity + effort
}
