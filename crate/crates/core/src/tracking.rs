//! Episode logs and the tracking-error reward.
//!
//! The reward is the negative area under the summed absolute joint error,
//! integrated through a cubic interpolating spline so that the sampling
//! density does not change the result.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt::sig9;
use crate::plant::JointPair;
use crate::spline::{trapezoid, CubicSpline};

/// Reward assigned to every aborted motion.
pub const CRASH_REWARD: f64 = -3.0;

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("episode log is empty")]
    EmptyLog,
    #[error("log time {t} does not increase past {prev}")]
    NonIncreasingTime { prev: f64, t: f64 },
    #[error("times and errors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashReason {
    TrackingDivergence,
    LimitHit,
    Timeout,
    /// Forced by a fault-injection wrapper.
    Injected,
}

impl CrashReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            CrashReason::TrackingDivergence => "tracking_divergence",
            CrashReason::LimitHit => "limit_hit",
            CrashReason::Timeout => "timeout",
            CrashReason::Injected => "injected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tracking_divergence" => CrashReason::TrackingDivergence,
            "limit_hit" => CrashReason::LimitHit,
            "timeout" => CrashReason::Timeout,
            "injected" => CrashReason::Injected,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSample {
    pub t: f64,
    pub commanded: JointPair,
    pub actual: JointPair,
}

/// Commanded and actual joint positions for every control tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    samples: Vec<LogSample>,
    crash: Option<CrashReason>,
}

impl EpisodeLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            samples: Vec::with_capacity(n),
            crash: None,
        }
    }

    pub fn push(&mut self, sample: LogSample) -> Result<(), TrackingError> {
        if let Some(last) = self.samples.last() {
            if !(sample.t > last.t) {
                return Err(TrackingError::NonIncreasingTime {
                    prev: last.t,
                    t: sample.t,
                });
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[LogSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn crashed(&self) -> bool {
        self.crash.is_some()
    }

    pub fn crash_reason(&self) -> Option<CrashReason> {
        self.crash
    }

    pub fn mark_crash(&mut self, reason: CrashReason) {
        self.crash = Some(reason);
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Writes `t,cmd_q1,cmd_q2,act_q1,act_q2` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), TrackingError> {
        writeln!(out, "t,cmd_q1,cmd_q2,act_q1,act_q2")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                sig9(s.t),
                sig9(s.commanded[0]),
                sig9(s.commanded[1]),
                sig9(s.actual[0]),
                sig9(s.actual[1])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub value: f64,
    pub crash_penalty_applied: bool,
}

/// Per-sample sum over joints of `|commanded - actual|`.
pub fn absolute_errors(log: &EpisodeLog) -> Result<Vec<f64>, TrackingError> {
    if log.is_empty() {
        return Err(TrackingError::EmptyLog);
    }
    Ok(log
        .samples()
        .iter()
        .map(|s| {
            s.commanded
                .iter()
                .zip(&s.actual)
                .map(|(c, a)| (c - a).abs())
                .sum()
        })
        .collect())
}

/// Area under the error signal. Uses the cubic spline when at least four
/// samples exist and the trapezoid rule otherwise.
pub fn integrate_error(times: &[f64], errors: &[f64]) -> Result<f64, TrackingError> {
    if times.len() != errors.len() {
        return Err(TrackingError::LengthMismatch(times.len(), errors.len()));
    }
    if times.is_empty() {
        return Err(TrackingError::EmptyLog);
    }
    if let Some(i) = (1..times.len()).find(|&i| !(times[i] > times[i - 1])) {
        return Err(TrackingError::NonIncreasingTime {
            prev: times[i - 1],
            t: times[i],
        });
    }
    match CubicSpline::not_a_knot(times, errors) {
        Ok(spline) => Ok(spline.integral()),
        Err(_) => Ok(trapezoid(times, errors)),
    }
}

pub fn compute_reward(log: &EpisodeLog) -> Result<Reward, TrackingError> {
    if log.is_empty() {
        return Err(TrackingError::EmptyLog);
    }
    if log.crashed() {
        return Ok(Reward {
            value: CRASH_REWARD,
            crash_penalty_applied: true,
        });
    }
    let errors = absolute_errors(log)?;
    let area = integrate_error(&log.times(), &errors)?;
    Ok(Reward {
        value: -area,
        crash_penalty_applied: false,
    })
}
