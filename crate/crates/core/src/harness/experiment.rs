//! Training loop for the three experiment families.

use std::collections::BTreeSet;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::apples::{sample_apples, shuffle_apples};
use super::baseline::{evaluate_baseline, BaselineStats};
use super::config::{Algorithm, ExperimentPlan};
use super::episode::{run_episode, run_failsafe, MotionExecutor, SimulatedArm, StepRecord};
use super::fault::CrashInjector;
use super::regression::{fit_coefficients, CoefficientReport};
use super::{HarnessError, ACTION_STREAM, TRAIN_APPLE_STREAM};
use crate::agent::{A2cAgent, GainTuner, ReinforceAgent};
use crate::plant::Apple;
use crate::tracking::EpisodeLog;

/// Everything a finished (or aborted) run produced.
pub struct RunArtifact {
    pub plan: ExperimentPlan,
    pub records: Vec<StepRecord>,
    pub baseline: BaselineStats,
    /// `None` when the records could not support a fit.
    pub coefficients: Option<CoefficientReport>,
    pub agent: Box<dyn GainTuner>,
    /// Tick logs of the learning steps listed in the spec.
    pub trajectories: Vec<(u64, EpisodeLog)>,
    pub train_apples: Vec<Apple>,
    /// Learning step at which a double fault stopped training.
    pub aborted: Option<u64>,
}

impl RunArtifact {
    /// Learning-step records only.
    pub fn learning_records(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| !r.recovery)
    }
}

/// Generator for one of the harness RNG streams.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn build_agent(plan: &ExperimentPlan) -> Result<Box<dyn GainTuner>, HarnessError> {
    let n = plan.tuned_joints.len();
    Ok(match plan.spec.algorithm {
        Algorithm::A2c => Box::new(A2cAgent::new(plan.agent.clone(), n)?),
        Algorithm::Reinforce => Box::new(ReinforceAgent::new(plan.agent.clone(), n)?),
    })
}

/// Runs the plan on the built-in simulator, applying any crash injection
/// listed in the spec.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<RunArtifact, HarnessError> {
    let arm = SimulatedArm::new(plan.sim().clone())?;
    if plan.spec.inject_crash_steps.is_empty() {
        let mut arm = arm;
        run_experiment_with(plan, &mut arm)
    } else {
        let mut injected = CrashInjector::new(arm, plan.spec.inject_crash_steps.iter().copied());
        run_experiment_with(plan, &mut injected)
    }
}

/// Runs the plan against any executor.
pub fn run_experiment_with(
    plan: &ExperimentPlan,
    executor: &mut dyn MotionExecutor,
) -> Result<RunArtifact, HarnessError> {
    let seed = plan.seed();
    let mut apple_rng = seeded_rng(seed, TRAIN_APPLE_STREAM);
    let mut action_rng = seeded_rng(seed, ACTION_STREAM);

    let mut train_apples = if plan.mode.is_multi() {
        sample_apples(plan.workspace(), plan.train_apples, &mut apple_rng)
    } else {
        vec![plan.apple]
    };
    let baseline = evaluate_baseline(executor, &train_apples, plan.baseline_runs_per_apple())?;
    info!("baseline reward {:.6} ± {:.6} over {} runs", baseline.mean, baseline.std, baseline.n);
    executor.reset_to_home();

    let sampled = train_apples.clone();
    let mut agent = build_agent(plan)?;
    let keep: BTreeSet<u64> = plan.spec.trajectory_steps.iter().copied().collect();
    let mut records = Vec::with_capacity(plan.learning_steps as usize + 16);
    let mut trajectories = Vec::new();
    let mut aborted = None;
    let mut step = 0u64;

    'epochs: for epoch in 0..plan.epochs {
        if plan.mode.is_multi() {
            shuffle_apples(&mut train_apples, &mut apple_rng);
        }
        let per_epoch = if plan.mode.is_multi() {
            plan.train_apples as u64
        } else {
            plan.learning_steps
        };
        for k in 0..per_epoch {
            let apple = train_apples[k as usize % train_apples.len()];
            executor.begin_step(step);
            let (record, outcome) = run_episode(
                agent.as_mut(),
                executor,
                &plan.tuned_joints,
                &apple,
                step,
                epoch,
                &mut action_rng,
            )?;
            let crashed = record.crashed();
            records.push(record);
            if keep.contains(&step) {
                trajectories.push((step, outcome.log));
            }
            if crashed {
                match run_failsafe(executor, &apple, step, epoch, &mut records) {
                    Ok(()) => {}
                    Err(HarnessError::DoubleFault { step }) => {
                        warn!("double fault after step {step}; stopping training");
                        aborted = Some(step);
                        break 'epochs;
                    }
                    Err(e) => return Err(e),
                }
            }
            step += 1;
        }
        if plan.mode.is_multi() {
            info!("epoch {epoch} done ({step} steps)");
        }
    }

    let coefficients = match fit_coefficients(&records, &plan.tuned_joints) {
        Ok(c) => Some(c),
        Err(e) => {
            warn!("coefficient fit skipped: {e}");
            None
        }
    };

    Ok(RunArtifact {
        plan: plan.clone(),
        records,
        baseline,
        coefficients,
        agent,
        trajectories,
        train_apples: sampled,
        aborted,
    })
}
