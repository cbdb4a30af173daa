//! Reference performance of the hand-tuned gains and held-out evaluation.

use serde::{Deserialize, Serialize};

use super::episode::{assemble_gains, MotionExecutor};
use super::{HarnessError, Joint, BASELINE_GAINS};
use crate::agent::GainTuner;
use crate::control::PidGains;
use crate::plant::{Apple, NUM_JOINTS};
use crate::tracking::CrashReason;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub mean: f64,
    /// Population standard deviation over all runs.
    pub std: f64,
    pub n: usize,
    /// Mean reward per apple, in input order.
    pub per_apple: Vec<f64>,
}

impl BaselineStats {
    /// Looks up the per-apple mean by index.
    pub fn for_apple(&self, index: usize) -> Option<f64> {
        self.per_apple.get(index).copied()
    }
}

/// Runs the baseline gains `n_runs` times on every apple, resetting the arm
/// before each run.
pub fn evaluate_baseline<E: MotionExecutor + ?Sized>(
    executor: &mut E,
    apples: &[Apple],
    n_runs: usize,
) -> Result<BaselineStats, HarnessError> {
    if apples.is_empty() || n_runs == 0 {
        return Err(HarnessError::Config("baseline needs at least one apple and one run".into()));
    }
    let mut all = Vec::with_capacity(apples.len() * n_runs);
    let mut per_apple = Vec::with_capacity(apples.len());
    for apple in apples {
        let mut sum = 0.0;
        for _ in 0..n_runs {
            executor.reset_to_home();
            let r = executor.execute(&BASELINE_GAINS, apple)?.reward.value;
            sum += r;
            all.push(r);
        }
        per_apple.push(sum / n_runs as f64);
    }
    let n = all.len();
    let mean = all.iter().sum::<f64>() / n as f64;
    let var = all.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(BaselineStats {
        mean,
        std: var.sqrt(),
        n,
        per_apple,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutRow {
    pub apple: Apple,
    pub gains: [PidGains; NUM_JOINTS],
    pub reward: f64,
    pub baseline_reward: f64,
    pub crash: Option<CrashReason>,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutReport {
    pub rows: Vec<HeldOutRow>,
    pub improved: usize,
    pub fraction: f64,
}

/// Executes the greedy policy and the baseline on each apple. An apple
/// counts as improved when the learned reward is strictly higher.
pub fn evaluate_held_out<A, E>(
    agent: &A,
    executor: &mut E,
    tuned: &[Joint],
    apples: &[Apple],
) -> Result<HeldOutReport, HarnessError>
where
    A: GainTuner + ?Sized,
    E: MotionExecutor + ?Sized,
{
    let mut rows = Vec::with_capacity(apples.len());
    for apple in apples {
        let gains = assemble_gains(tuned, &agent.greedy_action(&apple.to_array()));
        executor.reset_to_home();
        let learned = executor.execute(&gains, apple)?;
        executor.reset_to_home();
        let base = executor.execute(&BASELINE_GAINS, apple)?;
        rows.push(HeldOutRow {
            apple: *apple,
            gains,
            reward: learned.reward.value,
            baseline_reward: base.reward.value,
            crash: learned.log.crash_reason(),
            improved: learned.reward.value > base.reward.value,
        });
    }
    let improved = rows.iter().filter(|r| r.improved).count();
    let fraction = if rows.is_empty() {
        0.0
    } else {
        improved as f64 / rows.len() as f64
    };
    Ok(HeldOutReport {
        rows,
        improved,
        fraction,
    })
}
