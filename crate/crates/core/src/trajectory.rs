//! Joint-space paths and their trapezoidal time parameterization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{ArmGeometry, JointPair, NUM_JOINTS};

/// Velocity limit applied to the dominant joint (rad/s).
pub const DEFAULT_V_MAX: f64 = 1.5;
/// Acceleration limit applied to the dominant joint (rad/s²).
pub const DEFAULT_A_MAX: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("waypoint ({q1:.4}, {q2:.4}) violates joint limits")]
    LimitViolation { q1: f64, q2: f64 },
    #[error("a path needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("velocity and acceleration limits must be positive")]
    InvalidLimits,
}

/// Ordered joint-space waypoints from start to goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<JointPair>,
}

impl Path {
    pub fn new(waypoints: Vec<JointPair>) -> Result<Self, TrajectoryError> {
        if waypoints.len() < 2 {
            return Err(TrajectoryError::TooFewWaypoints(waypoints.len()));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[JointPair] {
        &self.waypoints
    }

    pub fn start(&self) -> JointPair {
        self.waypoints[0]
    }

    pub fn goal(&self) -> JointPair {
        self.waypoints[self.waypoints.len() - 1]
    }
}

/// Linear joint interpolation between two configurations.
pub fn plan_path(
    geometry: &ArmGeometry,
    start: JointPair,
    goal: JointPair,
    n_waypoints: usize,
) -> Result<Path, TrajectoryError> {
    if n_waypoints < 2 {
        return Err(TrajectoryError::TooFewWaypoints(n_waypoints));
    }
    for q in [start, goal] {
        if !geometry.within_limits(&q) {
            return Err(TrajectoryError::LimitViolation { q1: q[0], q2: q[1] });
        }
    }
    let last = (n_waypoints - 1) as f64;
    let waypoints = (0..n_waypoints)
        .map(|i| {
            if i == n_waypoints - 1 {
                return goal;
            }
            let s = i as f64 / last;
            let mut q = [0.0; NUM_JOINTS];
            for j in 0..NUM_JOINTS {
                q[j] = start[j] + s * (goal[j] - start[j]);
            }
            q
        })
        .collect();
    Path::new(waypoints)
}

/// Scalar trapezoidal (or triangular) profile covering `length` from rest
/// to rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidProfile {
    pub length: f64,
    pub peak_velocity: f64,
    pub accel: f64,
    pub t_accel: f64,
    pub t_cruise: f64,
}

impl TrapezoidProfile {
    pub fn new(length: f64, v_max: f64, a_max: f64) -> Self {
        debug_assert!(length >= 0.0);
        if length == 0.0 {
            return Self {
                length,
                peak_velocity: 0.0,
                accel: a_max,
                t_accel: 0.0,
                t_cruise: 0.0,
            };
        }
        let ramp_length = v_max * v_max / a_max;
        if length >= ramp_length {
            Self {
                length,
                peak_velocity: v_max,
                accel: a_max,
                t_accel: v_max / a_max,
                t_cruise: (length - ramp_length) / v_max,
            }
        } else {
            let t_accel = (length / a_max).sqrt();
            Self {
                length,
                peak_velocity: a_max * t_accel,
                accel: a_max,
                t_accel,
                t_cruise: 0.0,
            }
        }
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t_accel + self.t_cruise
    }

    pub fn is_triangular(&self) -> bool {
        self.t_cruise == 0.0 && self.length > 0.0
    }

    /// Distance travelled and speed at time `t` (clamped to the profile).
    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        let total = self.duration();
        if t <= 0.0 || total == 0.0 {
            return (0.0, 0.0);
        }
        if t >= total {
            return (self.length, 0.0);
        }
        let ta = self.t_accel;
        let v = self.peak_velocity;
        if t < ta {
            (0.5 * self.accel * t * t, self.accel * t)
        } else if t < ta + self.t_cruise {
            (0.5 * v * ta + v * (t - ta), v)
        } else {
            let remaining = total - t;
            (
                self.length - 0.5 * self.accel * remaining * remaining,
                self.accel * remaining,
            )
        }
    }
}

/// Time-parameterized path, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    waypoints: Vec<JointPair>,
    /// Cumulative path parameter (max-norm joint distance) at each waypoint.
    knots: Vec<f64>,
    profile: TrapezoidProfile,
}

/// Assigns times to `path` so that the dominant joint obeys a trapezoidal
/// profile; all joints arrive together.
pub fn parameterize(
    path: &Path,
    v_max: f64,
    a_max: f64,
) -> Result<TimedTrajectory, TrajectoryError> {
    if !(v_max > 0.0 && a_max > 0.0) {
        return Err(TrajectoryError::InvalidLimits);
    }
    let waypoints = path.waypoints().to_vec();
    let mut knots = Vec::with_capacity(waypoints.len());
    let mut s = 0.0;
    knots.push(0.0);
    for pair in waypoints.windows(2) {
        let seg = (0..NUM_JOINTS)
            .map(|j| (pair[1][j] - pair[0][j]).abs())
            .fold(0.0, f64::max);
        s += seg;
        knots.push(s);
    }
    Ok(TimedTrajectory {
        waypoints,
        knots,
        profile: TrapezoidProfile::new(s, v_max, a_max),
    })
}

impl TimedTrajectory {
    pub fn duration(&self) -> f64 {
        self.profile.duration()
    }

    pub fn profile(&self) -> &TrapezoidProfile {
        &self.profile
    }

    pub fn start(&self) -> JointPair {
        self.waypoints[0]
    }

    pub fn goal(&self) -> JointPair {
        self.waypoints[self.waypoints.len() - 1]
    }

    /// Commanded positions and velocities at `t`; holds the goal after the
    /// end of the trajectory.
    pub fn sample(&self, t: f64) -> (JointPair, JointPair) {
        if t >= self.duration() {
            return (self.goal(), [0.0; NUM_JOINTS]);
        }
        let (s, speed) = self.profile.evaluate(t);
        // segment containing s; zero-length segments are skipped naturally
        let seg = match self.knots.partition_point(|&k| k <= s) {
            0 => 0,
            i => (i - 1).min(self.waypoints.len() - 2),
        };
        let a = self.waypoints[seg];
        let b = self.waypoints[seg + 1];
        let seg_len = self.knots[seg + 1] - self.knots[seg];
        let mut q = a;
        let mut qd = [0.0; NUM_JOINTS];
        if seg_len > 0.0 {
            let frac = ((s - self.knots[seg]) / seg_len).clamp(0.0, 1.0);
            for j in 0..NUM_JOINTS {
                let dir = (b[j] - a[j]) / seg_len;
                q[j] = a[j] + frac * (b[j] - a[j]);
                qd[j] = dir * speed;
            }
        }
        (q, qd)
    }
}
