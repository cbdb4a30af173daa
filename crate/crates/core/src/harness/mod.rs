//! Experiment orchestration: episodes, fail-safe recovery, apple sampling,
//! baseline evaluation, coefficient analysis and result export.

mod apples;
mod baseline;
mod config;
mod episode;
mod experiment;
mod export;
mod fault;
mod regression;
mod svg;

pub use apples::{sample_apples, shuffle_apples};
pub use baseline::{evaluate_baseline, evaluate_held_out, BaselineStats, HeldOutReport, HeldOutRow};
pub use config::{Algorithm, ExperimentMode, ExperimentPlan, ExperimentSpec, Scale};
pub use episode::{
    run_episode, run_failsafe, MotionExecutor, MotionOutcome, SimConfig, SimulatedArm, StepRecord,
};
pub use experiment::{run_experiment, run_experiment_with, seeded_rng, RunArtifact};
pub use export::{export_results, read_steps_csv, replot, write_coefficients_csv, write_steps_csv};
pub use fault::CrashInjector;
pub use regression::{fit_coefficients, fit_ols, CoefficientReport, CoefficientTable, FourWayTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentError;
use crate::control::PidGains;
use crate::neuralnet::NeuralNetError;
use crate::plant::{PlantError, NUM_JOINTS};
use crate::tracking::TrackingError;
use crate::trajectory::TrajectoryError;

/// Hand-tuned reference gains for J1 and J2.
pub const BASELINE_GAINS: [PidGains; NUM_JOINTS] =
    [PidGains::raw(15.0, 0.0, 1.0), PidGains::raw(30.0, 0.0, 1.0)];

/// RNG stream for policy sampling during training.
pub const ACTION_STREAM: u64 = 3;
/// RNG stream for the training apple set and per-epoch shuffles.
pub const TRAIN_APPLE_STREAM: u64 = 4;
/// RNG stream for held-out test apples.
pub const TEST_APPLE_STREAM: u64 = 5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Network(#[from] NeuralNetError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("fail-safe recovery crashed twice after step {step}")]
    DoubleFault { step: u64 },
    #[error("design matrix is singular (column {column})")]
    SingularDesign { column: String },
    #[error("too few records for regression: {0}")]
    TooFewRecords(usize),
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// A tunable joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Joint {
    J1,
    J2,
}

impl Joint {
    pub const ALL: [Joint; NUM_JOINTS] = [Joint::J1, Joint::J2];

    pub fn index(self) -> usize {
        match self {
            Joint::J1 => 0,
            Joint::J2 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::J1 => "J1",
            Joint::J2 => "J2",
        }
    }
}
