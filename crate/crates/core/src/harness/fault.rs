use std::collections::BTreeSet;

use super::episode::{MotionExecutor, MotionOutcome};
use super::HarnessError;
use crate::control::PidGains;
use crate::plant::{Apple, NUM_JOINTS};
use crate::tracking::CrashReason;

/// Wraps an executor and forces crashes on chosen learning steps.
///
/// The motion is still simulated and logged; only its verdict changes.
/// `follow_up` additionally crashes that many motions after each injected
/// one, which is how a failing recovery is staged.
#[derive(Debug, Clone)]
pub struct CrashInjector<E> {
    inner: E,
    steps: BTreeSet<u64>,
    follow_up: usize,
    armed: bool,
    pending: usize,
}

impl<E: MotionExecutor> CrashInjector<E> {
    pub fn new(inner: E, steps: impl IntoIterator<Item = u64>) -> Self {
        Self {
            inner,
            steps: steps.into_iter().collect(),
            follow_up: 0,
            armed: false,
            pending: 0,
        }
    }

    pub fn with_follow_up(mut self, follow_up: usize) -> Self {
        self.follow_up = follow_up;
        self
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: MotionExecutor> MotionExecutor for CrashInjector<E> {
    fn execute(&mut self, gains: &[PidGains; NUM_JOINTS], apple: &Apple) -> Result<MotionOutcome, HarnessError> {
        let mut outcome = self.inner.execute(gains, apple)?;
        if self.armed {
            self.armed = false;
            self.pending = self.follow_up;
            outcome.force_crash(CrashReason::Injected);
        } else if self.pending > 0 {
            self.pending -= 1;
            outcome.force_crash(CrashReason::Injected);
        }
        Ok(outcome)
    }

    fn reset_to_home(&mut self) {
        self.inner.reset_to_home();
    }

    fn begin_step(&mut self, step: u64) {
        self.armed = self.steps.contains(&step);
        self.inner.begin_step(step);
    }
}
