//! Planar two-link arm (shoulder J1, elbow J2).
//!
//! Each joint is a decoupled second-order system driven by a saturated
//! torque, integrated with semi-implicit Euler. Kinematics follow the
//! convention that `q = (0, 0)` points the stretched arm along `+y`:
//!
//! ```text
//! x = l1·sin(q1) + l2·sin(q1 + q2)
//! y = l1·cos(q1) + l2·cos(q1 + q2)
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracking::{CrashReason, EpisodeLog};

/// Number of simulated (and tunable) joints.
pub const NUM_JOINTS: usize = 2;

/// One value per joint, `[J1, J2]`.
pub type JointPair = [f64; NUM_JOINTS];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("point ({x:.4}, {y:.4}) is outside the reachable annulus")]
    Unreachable { x: f64, y: f64 },
    #[error("joint configuration ({q1:.4}, {q2:.4}) violates joint limits")]
    LimitViolation { q1: f64, q2: f64 },
    #[error("invalid arm geometry: {0}")]
    InvalidGeometry(&'static str),
}

/// Link lengths, joint limits and per-joint actuator model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmGeometry {
    pub l1: f64,
    pub l2: f64,
    pub q_min: JointPair,
    pub q_max: JointPair,
    pub tau_max: JointPair,
    pub inertia: JointPair,
    pub damping: JointPair,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            l1: 0.5,
            l2: 0.5,
            q_min: [-PI, 0.0],
            q_max: [PI, PI],
            tau_max: [20.0, 20.0],
            inertia: [0.3, 0.15],
            damping: [0.8, 0.8],
        }
    }
}

impl ArmGeometry {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(PlantError::InvalidGeometry("link lengths must be positive"));
        }
        if ((self.l1 + self.l2) - 1.0).abs() > 1e-12 {
            return Err(PlantError::InvalidGeometry("total arm length must be 1 m"));
        }
        for j in 0..NUM_JOINTS {
            if !(self.q_min[j] < self.q_max[j]) {
                return Err(PlantError::InvalidGeometry("q_min must be below q_max"));
            }
            if !(self.tau_max[j] > 0.0) {
                return Err(PlantError::InvalidGeometry("tau_max must be positive"));
            }
            if !(self.inertia[j] > 0.0) {
                return Err(PlantError::InvalidGeometry("inertia must be positive"));
            }
            if !(self.damping[j] >= 0.0) {
                return Err(PlantError::InvalidGeometry("damping must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &JointPair) -> bool {
        (0..NUM_JOINTS).all(|j| q[j] >= self.q_min[j] && q[j] <= self.q_max[j])
    }

    pub fn forward_kinematics(&self, q: &JointPair) -> [f64; 2] {
        let outer = q[0] + q[1];
        [
            self.l1 * q[0].sin() + self.l2 * outer.sin(),
            self.l1 * q[0].cos() + self.l2 * outer.cos(),
        ]
    }

    /// Closed-form elbow-down (`q2 >= 0`) solution.
    pub fn inverse_kinematics(&self, p: [f64; 2]) -> Result<JointPair, PlantError> {
        let [x, y] = p;
        let d = x.hypot(y);
        let reach = self.l1 + self.l2;
        let inner = (self.l1 - self.l2).abs();
        if !d.is_finite() || d > reach + 1e-12 || d < inner - 1e-12 {
            return Err(PlantError::Unreachable { x, y });
        }
        let cos_q2 = ((d * d - self.l1 * self.l1 - self.l2 * self.l2)
            / (2.0 * self.l1 * self.l2))
            .clamp(-1.0, 1.0);
        let sin_q2 = (1.0 - cos_q2 * cos_q2).max(0.0).sqrt();
        let q2 = sin_q2.atan2(cos_q2);
        let q1 = wrap_angle(x.atan2(y) - (self.l2 * sin_q2).atan2(self.l1 + self.l2 * cos_q2));
        let q = [q1, q2];
        if !self.within_limits(&q) {
            return Err(PlantError::LimitViolation { q1, q2 });
        }
        Ok(q)
    }

    /// Advance one tick. Torques saturate at `±tau_max`; positions that
    /// leave the joint range are clamped and their velocity zeroed.
    pub fn step_dynamics(&self, state: &ArmState, torques: &JointPair, dt: f64) -> StepResult {
        debug_assert!(dt > 0.0);
        let mut next = ArmState {
            q: state.q,
            qd: state.qd,
            t: state.t + dt,
        };
        let mut clamped = false;
        for j in 0..NUM_JOINTS {
            let tau = torques[j].clamp(-self.tau_max[j], self.tau_max[j]);
            let qdd = (tau - self.damping[j] * state.qd[j]) / self.inertia[j];
            let qd = state.qd[j] + qdd * dt;
            let q = state.q[j] + qd * dt;
            if q < self.q_min[j] {
                next.q[j] = self.q_min[j];
                next.qd[j] = 0.0;
                clamped = true;
            } else if q > self.q_max[j] {
                next.q[j] = self.q_max[j];
                next.qd[j] = 0.0;
                clamped = true;
            } else {
                next.q[j] = q;
                next.qd[j] = qd;
            }
        }
        StepResult {
            state: next,
            limit_hit: clamped,
        }
    }

    pub fn kinetic_energy(&self, state: &ArmState) -> f64 {
        (0..NUM_JOINTS)
            .map(|j| 0.5 * self.inertia[j] * state.qd[j] * state.qd[j])
            .sum()
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Joint positions and velocities at simulation time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub q: JointPair,
    pub qd: JointPair,
    pub t: f64,
}

impl ArmState {
    pub fn at_rest(q: JointPair) -> Self {
        Self {
            q,
            qd: [0.0; NUM_JOINTS],
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: ArmState,
    /// A joint hit its limit during this tick.
    pub limit_hit: bool,
}

/// Apple coordinate in the robot frame (meters). `z` is carried through
/// but does not influence the planar simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Apple {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn planar(self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance(&self, other: &Apple) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// The fixed single-apple target.
pub const SINGLE_APPLE: Apple = Apple::new(0.0, 0.625, 0.5);

/// Harvest basket stand-in the arm starts from and returns to.
pub const HOME: Apple = Apple::new(0.55, 0.20, 0.5);

/// Region apple coordinates are sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub z_fixed: f64,
    pub min_separation: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            x_range: [-0.5, 0.5],
            y_range: [0.5, 0.75],
            z_fixed: 0.5,
            min_separation: 0.01,
        }
    }
}

impl Workspace {
    pub fn contains(&self, apple: &Apple) -> bool {
        apple.x >= self.x_range[0]
            && apple.x <= self.x_range[1]
            && apple.y >= self.y_range[0]
            && apple.y <= self.y_range[1]
            && apple.z == self.z_fixed
    }
}

/// Thresholds that turn a motion into an aborted one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashCriteria {
    /// Per-joint tracking error (rad) that counts as diverging.
    pub divergence_threshold: f64,
    /// How long (s) divergence must persist before the motion aborts.
    pub divergence_window: f64,
    /// Slack (s) beyond the planned duration before the motion times out.
    pub timeout_margin: f64,
}

impl Default for CrashCriteria {
    fn default() -> Self {
        Self {
            divergence_threshold: 0.5,
            divergence_window: 0.25,
            timeout_margin: 2.0,
        }
    }
}

/// Online form of the tracking-divergence rule, fed one sample at a time.
#[derive(Debug, Clone)]
pub struct DivergenceMonitor {
    threshold: f64,
    window: f64,
    since: [Option<f64>; NUM_JOINTS],
}

impl DivergenceMonitor {
    pub fn new(criteria: &CrashCriteria) -> Self {
        Self {
            threshold: criteria.divergence_threshold,
            window: criteria.divergence_window,
            since: [None; NUM_JOINTS],
        }
    }

    /// Returns true once any joint has stayed above the threshold for the
    /// whole window.
    pub fn observe(&mut self, t: f64, commanded: &JointPair, actual: &JointPair) -> bool {
        let mut diverged = false;
        for j in 0..NUM_JOINTS {
            if (commanded[j] - actual[j]).abs() > self.threshold {
                let start = *self.since[j].get_or_insert(t);
                // 1e-9 absorbs accumulated tick rounding in t
                if t - start >= self.window - 1e-9 {
                    diverged = true;
                }
            } else {
                self.since[j] = None;
            }
        }
        diverged
    }
}

/// Decide whether a finished (or running) motion counts as crashed.
///
/// `limit_hit` reports whether the plant clamped a joint at any point and
/// `planned_duration` is the commanded trajectory length the timeout rule
/// measures against.
pub fn detect_crash(
    log: &EpisodeLog,
    limit_hit: bool,
    planned_duration: f64,
    criteria: &CrashCriteria,
) -> Option<CrashReason> {
    let samples = log.samples();
    let first = samples.first()?;
    let mut monitor = DivergenceMonitor::new(criteria);
    if samples
        .iter()
        .any(|s| monitor.observe(s.t, &s.commanded, &s.actual))
    {
        return Some(CrashReason::TrackingDivergence);
    }
    if limit_hit {
        return Some(CrashReason::LimitHit);
    }
    let last = samples.last().unwrap_or(first);
    if last.t - first.t > planned_duration + criteria.timeout_margin {
        return Some(CrashReason::Timeout);
    }
    None
}
