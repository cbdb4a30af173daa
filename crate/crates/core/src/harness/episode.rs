//! A single pick-and-return motion, the learning step built on it, and the
//! post-crash fail-safe.

use log::{debug, warn};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Joint, BASELINE_GAINS};
use crate::agent::GainTuner;
use crate::control::{strategy_output, ControlStrategy, JointSignal, PidGains, StrategyState};
use crate::plant::{
    detect_crash, Apple, ArmGeometry, ArmState, CrashCriteria, DivergenceMonitor, JointPair, HOME,
    NUM_JOINTS,
};
use crate::tracking::{compute_reward, CrashReason, EpisodeLog, LogSample, Reward, CRASH_REWARD};
use crate::trajectory::{parameterize, plan_path, TimedTrajectory, DEFAULT_A_MAX, DEFAULT_V_MAX};

/// Simulator and motion settings shared by every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: ArmGeometry,
    pub dt: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Hold at the apple between the two legs (s).
    pub dwell: f64,
    pub n_waypoints: usize,
    pub crash: CrashCriteria,
    /// A leg ends once every joint is this close to its goal (rad)...
    pub arrival_tolerance: f64,
    /// ...and slower than this (rad/s).
    pub arrival_velocity: f64,
    pub home: Apple,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            geometry: ArmGeometry::default(),
            dt: 0.001,
            v_max: DEFAULT_V_MAX,
            a_max: DEFAULT_A_MAX,
            dwell: 0.2,
            n_waypoints: 10,
            crash: CrashCriteria::default(),
            arrival_tolerance: 0.02,
            arrival_velocity: 0.2,
            home: HOME,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.geometry.validate()?;
        let positive = [
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("arrival_tolerance", self.arrival_tolerance),
            ("arrival_velocity", self.arrival_velocity),
            ("divergence_threshold", self.crash.divergence_threshold),
            ("divergence_window", self.crash.divergence_window),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.dwell >= 0.0 && self.crash.timeout_margin >= 0.0) {
            return Err(HarnessError::Config(
                "dwell and timeout_margin must be non-negative".into(),
            ));
        }
        if self.n_waypoints < 2 {
            return Err(HarnessError::Config("n_waypoints must be at least 2".into()));
        }
        self.geometry.inverse_kinematics(self.home.planar())?;
        Ok(())
    }
}

/// Everything observed during one full motion.
#[derive(Debug, Clone)]
pub struct MotionOutcome {
    pub log: EpisodeLog,
    pub reward: Reward,
    /// Sum of both leg durations and the dwell (s).
    pub planned_duration: f64,
}

impl MotionOutcome {
    pub fn crashed(&self) -> bool {
        self.log.crashed()
    }

    /// Marks the motion as aborted and applies the crash reward.
    pub fn force_crash(&mut self, reason: CrashReason) {
        self.log.mark_crash(reason);
        self.reward = Reward {
            value: CRASH_REWARD,
            crash_penalty_applied: true,
        };
    }
}

/// Runs full home → apple → home motions with fixed per-joint gains.
pub trait MotionExecutor {
    fn execute(&mut self, gains: &[PidGains; NUM_JOINTS], apple: &Apple) -> Result<MotionOutcome, HarnessError>;

    /// Puts the arm back at the home configuration at rest.
    fn reset_to_home(&mut self);

    /// Called before the motion of learning step `step`. Hardware executors
    /// can pause here to let motors cool; the simulator has no thermal model.
    fn begin_step(&mut self, _step: u64) {}
}

enum Phase<'a> {
    Leg(&'a TimedTrajectory),
    Dwell { hold: JointPair, duration: f64 },
}

impl Phase<'_> {
    fn command(&self, local: f64) -> (JointPair, JointPair) {
        match self {
            Phase::Leg(traj) => traj.sample(local),
            Phase::Dwell { hold, .. } => (*hold, [0.0; NUM_JOINTS]),
        }
    }

    fn finished(&self, local: f64, state: &ArmState, cfg: &SimConfig) -> bool {
        const EPS: f64 = 1e-9;
        match self {
            Phase::Leg(traj) => {
                let goal = traj.goal();
                local >= traj.duration() - EPS
                    && (0..NUM_JOINTS).all(|j| {
                        (goal[j] - state.q[j]).abs() <= cfg.arrival_tolerance
                            && state.qd[j].abs() <= cfg.arrival_velocity
                    })
            }
            Phase::Dwell { duration, .. } => local >= duration - EPS,
        }
    }
}

/// The arm simulator driven by position-loop PID controllers.
///
/// Arm state persists between motions, the way a physical arm would end
/// one motion where the next begins; only [`MotionExecutor::reset_to_home`]
/// puts it back at rest.
#[derive(Debug, Clone)]
pub struct SimulatedArm {
    config: SimConfig,
    home_q: JointPair,
    state: ArmState,
}

impl SimulatedArm {
    pub fn new(config: SimConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let home_q = config.geometry.inverse_kinematics(config.home.planar())?;
        Ok(Self {
            config,
            home_q,
            state: ArmState::at_rest(home_q),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn home_q(&self) -> JointPair {
        self.home_q
    }

    pub fn state(&self) -> &ArmState {
        &self.state
    }
}

impl MotionExecutor for SimulatedArm {
    fn reset_to_home(&mut self) {
        self.state = ArmState::at_rest(self.home_q);
    }

    fn execute(&mut self, gains: &[PidGains; NUM_JOINTS], apple: &Apple) -> Result<MotionOutcome, HarnessError> {
        let cfg = &self.config;
        let g = &cfg.geometry;
        let apple_q = g.inverse_kinematics(apple.planar())?;
        let outbound = parameterize(&plan_path(g, self.home_q, apple_q, cfg.n_waypoints)?, cfg.v_max, cfg.a_max)?;
        let inbound = parameterize(&plan_path(g, apple_q, self.home_q, cfg.n_waypoints)?, cfg.v_max, cfg.a_max)?;
        let planned = outbound.duration() + cfg.dwell + inbound.duration();
        let deadline = planned + cfg.crash.timeout_margin;
        let phases = [
            Phase::Leg(&outbound),
            Phase::Dwell {
                hold: apple_q,
                duration: cfg.dwell,
            },
            Phase::Leg(&inbound),
        ];

        let strategies = gains.map(ControlStrategy::position_only);
        let mut controllers = [StrategyState::default(); NUM_JOINTS];
        let mut monitor = DivergenceMonitor::new(&cfg.crash);
        let expected_ticks = ((deadline / cfg.dt) as usize).min(1 << 20);
        let mut log = EpisodeLog::with_capacity(expected_ticks / 2);

        let mut state = self.state;
        state.t = 0.0;
        let mut tick: u64 = 0;
        let mut phase_idx = 0;
        let mut phase_start: u64 = 0;
        let mut limit_hit = false;
        let mut crash: Option<CrashReason> = None;
        log.push(LogSample {
            t: 0.0,
            commanded: phases[0].command(0.0).0,
            actual: state.q,
        })?;

        loop {
            let local = (tick - phase_start) as f64 * cfg.dt;
            if phases[phase_idx].finished(local, &state, cfg) {
                phase_idx += 1;
                phase_start = tick;
                if phase_idx == phases.len() {
                    break;
                }
                continue;
            }
            let (q_cmd, qd_cmd) = phases[phase_idx].command(local);
            let mut torques = [0.0; NUM_JOINTS];
            for j in 0..NUM_JOINTS {
                let commanded = JointSignal {
                    position: q_cmd[j],
                    velocity: qd_cmd[j],
                    effort: 0.0,
                };
                let measured = JointSignal {
                    position: state.q[j],
                    velocity: state.qd[j],
                    effort: 0.0,
                };
                torques[j] = strategy_output(&strategies[j], &mut controllers[j], &commanded, &measured, cfg.dt);
            }
            let step = g.step_dynamics(&state, &torques, cfg.dt);
            state = step.state;
            tick += 1;
            let t = tick as f64 * cfg.dt;
            state.t = t;
            let commanded = phases[phase_idx].command((tick - phase_start) as f64 * cfg.dt).0;
            log.push(LogSample {
                t,
                commanded,
                actual: state.q,
            })?;
            if step.limit_hit {
                limit_hit = true;
                crash = Some(CrashReason::LimitHit);
                break;
            }
            if monitor.observe(t, &commanded, &state.q) {
                crash = Some(CrashReason::TrackingDivergence);
                break;
            }
            if t > deadline {
                crash = Some(CrashReason::Timeout);
                break;
            }
        }
        self.state = state;

        // the online reason names the event that stopped the motion
        if let Some(reason) = crash.or_else(|| detect_crash(&log, limit_hit, planned, &cfg.crash)) {
            log.mark_crash(reason);
        }
        let reward = compute_reward(&log)?;
        Ok(MotionOutcome {
            log,
            reward,
            planned_duration: planned,
        })
    }
}

/// One row of the training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Learning-step index; recovery motions repeat the index of the step
    /// that crashed.
    pub step: u64,
    pub epoch: u64,
    pub apple: Apple,
    pub gains: [PidGains; NUM_JOINTS],
    pub reward: f64,
    pub td_error: Option<f64>,
    pub value: Option<f64>,
    pub crash: Option<CrashReason>,
    pub recovery: bool,
}

impl StepRecord {
    pub fn crashed(&self) -> bool {
        self.crash.is_some()
    }
}

/// Gains for both joints: tuned joints take the sampled action in order,
/// the rest keep the baseline.
pub fn assemble_gains(tuned: &[Joint], action: &[PidGains]) -> [PidGains; NUM_JOINTS] {
    let mut gains = BASELINE_GAINS;
    for (joint, g) in tuned.iter().zip(action) {
        gains[joint.index()] = *g;
    }
    gains
}

/// Sample gains, execute the motion, score it and update the agent.
pub fn run_episode<A, E>(
    agent: &mut A,
    executor: &mut E,
    tuned: &[Joint],
    apple: &Apple,
    step: u64,
    epoch: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(StepRecord, MotionOutcome), HarnessError>
where
    A: GainTuner + ?Sized,
    E: MotionExecutor + ?Sized,
{
    let state = apple.to_array();
    let action = agent.sample_action(&state, rng);
    let gains = assemble_gains(tuned, &action.gains);
    let outcome = executor.execute(&gains, apple)?;
    let learned = agent.learn(&state, &action, outcome.reward.value);
    debug!(
        "step {step}: reward {:.6} δ {:.6} crash {:?}",
        outcome.reward.value,
        learned.td_error,
        outcome.log.crash_reason()
    );
    let record = StepRecord {
        step,
        epoch,
        apple: *apple,
        gains,
        reward: outcome.reward.value,
        td_error: Some(learned.td_error),
        value: Some(learned.value),
        crash: outcome.log.crash_reason(),
        recovery: false,
    };
    Ok((record, outcome))
}

/// Motions executed with baseline gains after a crash.
pub const RECOVERY_MOTIONS: usize = 2;

/// Restores baseline gains, resets the arm and runs two unlearned motions.
///
/// Recovery records are appended to `records` as they happen. If a
/// recovery motion crashes the whole recovery is repeated once; a second
/// failure is a [`HarnessError::DoubleFault`].
pub fn run_failsafe<E: MotionExecutor + ?Sized>(
    executor: &mut E,
    apple: &Apple,
    step: u64,
    epoch: u64,
    records: &mut Vec<StepRecord>,
) -> Result<(), HarnessError> {
    for attempt in 0..2 {
        executor.reset_to_home();
        let mut clean = true;
        for _ in 0..RECOVERY_MOTIONS {
            let outcome = executor.execute(&BASELINE_GAINS, apple)?;
            records.push(StepRecord {
                step,
                epoch,
                apple: *apple,
                gains: BASELINE_GAINS,
                reward: outcome.reward.value,
                td_error: None,
                value: None,
                crash: outcome.log.crash_reason(),
                recovery: true,
            });
            if outcome.crashed() {
                warn!("recovery motion after step {step} crashed (attempt {})", attempt + 1);
                clean = false;
                break;
            }
        }
        if clean {
            return Ok(());
        }
    }
    Err(HarnessError::DoubleFault { step })
}
