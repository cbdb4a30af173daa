//! Experiment configuration as read from JSON, and its resolved form.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::SimConfig;
use super::{HarnessError, Joint};
use crate::agent::AgentConfig;
use crate::plant::{Apple, Workspace, SINGLE_APPLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    SingleAppleSingleActuator,
    SingleAppleTwoActuators,
    MultiApple,
}

impl ExperimentMode {
    pub fn is_multi(self) -> bool {
        self == ExperimentMode::MultiApple
    }

    fn default_joints(self) -> Vec<Joint> {
        match self {
            ExperimentMode::SingleAppleSingleActuator => vec![Joint::J1],
            _ => vec![Joint::J1, Joint::J2],
        }
    }
}

/// Step-count preset: `desk` for quick runs, `paper` for the full schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    A2c,
    Reinforce,
}

fn default_baseline_runs() -> usize {
    20
}

/// Experiment description as written in a config file. Unset counts and
/// agent settings fall back to the mode's defaults at the chosen scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: ExperimentMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuned_joints: Option<Vec<Joint>>,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_apples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_apples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apple: Option<Apple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentConfig>,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_baseline_runs")]
    pub baseline_runs: usize,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub workspace: Workspace,
    /// Learning steps whose full tick log is exported.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectory_steps: Vec<u64>,
    /// Learning steps whose motion is forced to crash.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inject_crash_steps: Vec<u64>,
}

impl ExperimentSpec {
    pub fn new(mode: ExperimentMode) -> Self {
        Self {
            mode,
            tuned_joints: None,
            scale: Scale::Desk,
            steps: None,
            epochs: None,
            train_apples: None,
            test_apples: None,
            apple: None,
            agent: None,
            algorithm: Algorithm::A2c,
            seed: 0,
            baseline_runs: default_baseline_runs(),
            sim: SimConfig::default(),
            workspace: Workspace::default(),
            trajectory_steps: Vec::new(),
            inject_crash_steps: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Fills in defaults and checks consistency.
    pub fn resolve(&self) -> Result<ExperimentPlan, HarnessError> {
        let paper = self.scale == Scale::Paper;
        let tuned_joints = self
            .tuned_joints
            .clone()
            .unwrap_or_else(|| self.mode.default_joints());
        let unique: BTreeSet<_> = tuned_joints.iter().collect();
        if unique.len() != tuned_joints.len() {
            return Err(HarnessError::Config("tuned_joints contains duplicates".into()));
        }
        let expected = match self.mode {
            ExperimentMode::SingleAppleSingleActuator => 1,
            _ => 2,
        };
        if tuned_joints.len() != expected {
            return Err(HarnessError::Config(format!(
                "mode {:?} tunes {expected} joint(s), got {}",
                self.mode,
                tuned_joints.len()
            )));
        }

        let mut agent = self.agent.clone().unwrap_or_else(|| {
            if expected == 1 {
                AgentConfig::single_actuator(self.seed)
            } else {
                AgentConfig::two_actuator(self.seed)
            }
        });
        agent.seed = self.seed;
        agent.validate()?;

        let (steps, epochs, train_apples, test_apples) = match self.mode {
            ExperimentMode::SingleAppleSingleActuator => {
                (self.steps.unwrap_or(if paper { 1000 } else { 300 }), 1, 1, 0)
            }
            ExperimentMode::SingleAppleTwoActuators => {
                (self.steps.unwrap_or(if paper { 3000 } else { 600 }), 1, 1, 0)
            }
            ExperimentMode::MultiApple => {
                if self.steps.is_some() {
                    return Err(HarnessError::Config(
                        "multi_apple uses epochs and train_apples, not steps".into(),
                    ));
                }
                let epochs = self.epochs.unwrap_or(if paper { 100 } else { 20 });
                let train = self.train_apples.unwrap_or(if paper { 100 } else { 30 });
                let test = self.test_apples.unwrap_or(if paper { 100 } else { 30 });
                (epochs * train as u64, epochs, train, test)
            }
        };
        if steps == 0 || epochs == 0 || train_apples == 0 {
            return Err(HarnessError::Config("step, epoch and apple counts must be positive".into()));
        }
        if self.baseline_runs == 0 {
            return Err(HarnessError::Config("baseline_runs must be at least 1".into()));
        }
        if !self.mode.is_multi() && (self.epochs.is_some() || self.train_apples.is_some()) {
            return Err(HarnessError::Config(
                "epochs and train_apples only apply to multi_apple".into(),
            ));
        }
        let ws = &self.workspace;
        if !(ws.x_range[0] <= ws.x_range[1] && ws.y_range[0] <= ws.y_range[1] && ws.min_separation >= 0.0) {
            return Err(HarnessError::Config("workspace ranges are inverted".into()));
        }

        self.sim.validate()?;
        let apple = self.apple.unwrap_or(SINGLE_APPLE);
        self.sim.geometry.inverse_kinematics(apple.planar())?;
        for corner in [
            [ws.x_range[0], ws.y_range[0]],
            [ws.x_range[0], ws.y_range[1]],
            [ws.x_range[1], ws.y_range[0]],
            [ws.x_range[1], ws.y_range[1]],
        ] {
            if self.mode.is_multi() {
                self.sim.geometry.inverse_kinematics(corner)?;
            }
        }

        Ok(ExperimentPlan {
            spec: self.clone(),
            mode: self.mode,
            tuned_joints,
            learning_steps: steps,
            epochs,
            train_apples,
            test_apples,
            apple,
            agent,
        })
    }
}

/// Validated experiment with every count and setting spelled out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub spec: ExperimentSpec,
    pub mode: ExperimentMode,
    pub tuned_joints: Vec<Joint>,
    /// Total learning updates (`epochs × train_apples` in multi-apple mode).
    pub learning_steps: u64,
    pub epochs: u64,
    pub train_apples: usize,
    pub test_apples: usize,
    pub apple: Apple,
    pub agent: AgentConfig,
}

impl ExperimentPlan {
    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn sim(&self) -> &SimConfig {
        &self.spec.sim
    }

    pub fn workspace(&self) -> &Workspace {
        &self.spec.workspace
    }

    /// Baseline repetitions per apple. The simulator is deterministic, so
    /// multi-apple runs score each training apple once.
    pub fn baseline_runs_per_apple(&self) -> usize {
        if self.mode.is_multi() {
            1
        } else {
            self.spec.baseline_runs
        }
    }
}
