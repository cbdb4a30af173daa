use std::collections::BTreeMap;

use pid_a2c::agent::{A2cAgent, AgentConfig};
use pid_a2c::control::PidGains;
use pid_a2c::harness::{
    evaluate_baseline, evaluate_held_out, export_results, fit_coefficients, fit_ols, read_steps_csv, replot,
    run_experiment, run_experiment_with, sample_apples, seeded_rng, CrashInjector, ExperimentMode, ExperimentSpec,
    HarnessError, Joint, MotionExecutor, MotionOutcome, SimConfig, SimulatedArm, StepRecord, BASELINE_GAINS,
    TRAIN_APPLE_STREAM,
};
use pid_a2c::plant::{Apple, Workspace, NUM_JOINTS, SINGLE_APPLE};
use pid_a2c::tracking::CrashReason;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Records every gain set it is asked to run.
struct Recording {
    arm: SimulatedArm,
    seen: Vec<[PidGains; NUM_JOINTS]>,
}

impl MotionExecutor for Recording {
    fn execute(&mut self, gains: &[PidGains; NUM_JOINTS], apple: &Apple) -> Result<MotionOutcome, HarnessError> {
        self.seen.push(*gains);
        self.arm.execute(gains, apple)
    }

    fn reset_to_home(&mut self) {
        self.arm.reset_to_home();
    }
}

fn spec(mode: ExperimentMode, steps: u64) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(mode);
    s.seed = 12;
    s.baseline_runs = 2;
    if mode == ExperimentMode::MultiApple {
        s.epochs = Some(steps);
    } else {
        s.steps = Some(steps);
    }
    s
}

#[test]
fn crashes_do_not_change_the_learning_step_count() {
    let mut s = spec(ExperimentMode::SingleAppleTwoActuators, 30);
    s.inject_crash_steps = vec![3, 10, 29];
    let art = run_experiment(&s.resolve().unwrap()).unwrap();
    let learning: Vec<&StepRecord> = art.learning_records().collect();
    assert_eq!(learning.len(), 30);
    assert_eq!(art.records.len(), 30 + 3 * 2);
    let steps: Vec<u64> = learning.iter().map(|r| r.step).collect();
    assert_eq!(steps, (0..30).collect::<Vec<_>>());
    for (i, r) in art.records.iter().enumerate() {
        if r.crash == Some(CrashReason::Injected) {
            assert_eq!(r.reward, -3.0);
            assert!(art.records[i + 1].recovery && art.records[i + 2].recovery);
            assert_eq!(art.records[i + 1].step, r.step);
            assert_eq!(art.records[i + 1].gains, BASELINE_GAINS);
        }
    }
    assert!(art.aborted.is_none());
}

#[test]
fn repeated_recovery_failure_aborts_with_partial_records() {
    let plan = spec(ExperimentMode::SingleAppleTwoActuators, 20).resolve().unwrap();
    let arm = SimulatedArm::new(plan.sim().clone()).unwrap();
    // crash the learned step and the first motion of both recovery attempts
    let mut exec = CrashInjector::new(arm, [5]).with_follow_up(2);
    let art = run_experiment_with(&plan, &mut exec).unwrap();
    assert_eq!(art.aborted, Some(5));
    assert_eq!(art.learning_records().count(), 6);
    assert_eq!(art.records.iter().filter(|r| r.recovery).count(), 2);

    // a single failed recovery motion is retried and succeeds
    let arm = SimulatedArm::new(plan.sim().clone()).unwrap();
    let mut exec = CrashInjector::new(arm, [5]).with_follow_up(1);
    let art = run_experiment_with(&plan, &mut exec).unwrap();
    assert!(art.aborted.is_none());
    assert_eq!(art.learning_records().count(), 20);
    assert_eq!(art.records.iter().filter(|r| r.recovery).count(), 3);
}

#[test]
fn untuned_joint_always_runs_baseline_gains() {
    let plan = spec(ExperimentMode::SingleAppleSingleActuator, 25).resolve().unwrap();
    let mut exec = Recording {
        arm: SimulatedArm::new(plan.sim().clone()).unwrap(),
        seen: Vec::new(),
    };
    let art = run_experiment_with(&plan, &mut exec).unwrap();
    assert!(exec.seen.iter().all(|g| g[1] == BASELINE_GAINS[1]));
    assert!(exec.seen.iter().any(|g| g[0] != BASELINE_GAINS[0]));
    assert!(art.records.iter().all(|r| r.gains[1] == BASELINE_GAINS[1]));

    let mut s = spec(ExperimentMode::SingleAppleSingleActuator, 10);
    s.tuned_joints = Some(vec![Joint::J2]);
    let art = run_experiment(&s.resolve().unwrap()).unwrap();
    assert!(art.records.iter().all(|r| r.gains[0] == BASELINE_GAINS[0]));
}

#[test]
fn every_epoch_visits_each_training_apple_once() {
    let mut s = spec(ExperimentMode::MultiApple, 4);
    s.train_apples = Some(7);
    let art = run_experiment(&s.resolve().unwrap()).unwrap();
    let key = |a: &Apple| (a.x.to_bits(), a.y.to_bits());
    let mut expected: Vec<_> = art.train_apples.iter().map(key).collect();
    expected.sort();
    let mut by_epoch: BTreeMap<u64, Vec<_>> = BTreeMap::new();
    for r in art.learning_records() {
        by_epoch.entry(r.epoch).or_default().push(key(&r.apple));
    }
    assert_eq!(by_epoch.len(), 4);
    for (_, mut seen) in by_epoch {
        seen.sort();
        assert_eq!(seen, expected);
    }
}

#[test]
fn regression_residuals_are_orthogonal_and_planted_slopes_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let beta = [0.0004, -0.09, 0.003, 0.0002, 0.05, -0.006];
    let records: Vec<StepRecord> = (0..200)
        .map(|k| {
            let g = |rng: &mut ChaCha8Rng| {
                PidGains::raw(rng.random_range(0.0..1000.0), rng.random_range(0.0..1.0), rng.random_range(0.0..100.0))
            };
            let gains = [g(&mut rng), g(&mut rng)];
            let x: Vec<f64> = gains.iter().flat_map(|g| g.as_array()).collect();
            let noise = rng.random_range(-0.01..0.01);
            let reward = -0.2 + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + noise;
            StepRecord {
                step: k,
                epoch: 0,
                apple: SINGLE_APPLE,
                gains,
                reward,
                td_error: None,
                value: None,
                crash: None,
                recovery: false,
            }
        })
        .collect();
    let rep = fit_coefficients(&records, &Joint::ALL).unwrap();
    assert!(rep.crashes_included.max_normal_residual < 1e-6);
    for (got, want) in rep.crashes_included.coefficients.iter().zip(&beta) {
        assert!((got - want).abs() < 0.05 * want.abs() + 1e-4, "{got} vs {want}");
    }
    // fitted values from the raw-unit coefficients match a direct refit
    let names: Vec<String> = rep.crashes_included.names.clone();
    let rows: Vec<Vec<f64>> = records.iter().map(|r| r.gains.iter().flat_map(|g| g.as_array()).collect()).collect();
    let fitted: Vec<f64> = rows.iter().map(|r| rep.crashes_included.predict(r)).collect();
    let refit = fit_ols(&names, &rows, &fitted).unwrap();
    for (a, b) in refit.coefficients.iter().zip(&rep.crashes_included.coefficients) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn baseline_is_deterministic_and_per_apple() {
    let sim = SimConfig::default();
    let mut arm = SimulatedArm::new(sim).unwrap();
    let apples = sample_apples(&Workspace::default(), 3, &mut seeded_rng(1, TRAIN_APPLE_STREAM));
    let a = evaluate_baseline(&mut arm, &apples, 4).unwrap();
    let b = evaluate_baseline(&mut arm, &apples, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n, 12);
    assert_eq!(a.per_apple.len(), 3);
    let mean = a.per_apple.iter().sum::<f64>() / 3.0;
    assert!((mean - a.mean).abs() < 1e-12);
    let single = evaluate_baseline(&mut arm, &[SINGLE_APPLE], 5).unwrap();
    assert!(single.std < 1e-12);
    assert!(single.mean < 0.0 && single.mean > -3.0);
}

/// Scores every motion the same regardless of gains.
struct Indifferent(SimulatedArm);

impl MotionExecutor for Indifferent {
    fn execute(&mut self, _gains: &[PidGains; NUM_JOINTS], apple: &Apple) -> Result<MotionOutcome, HarnessError> {
        self.0.execute(&BASELINE_GAINS, apple)
    }

    fn reset_to_home(&mut self) {
        self.0.reset_to_home();
    }
}

#[test]
fn ties_with_the_baseline_are_not_improvements() {
    let agent = A2cAgent::new(AgentConfig::two_actuator(0), 2).unwrap();
    let mut exec = Indifferent(SimulatedArm::new(SimConfig::default()).unwrap());
    let apples = sample_apples(&Workspace::default(), 5, &mut seeded_rng(0, 5));
    let rep = evaluate_held_out(&agent, &mut exec, &Joint::ALL, &apples).unwrap();
    assert_eq!(rep.improved, 0);
    assert_eq!(rep.fraction, 0.0);
}

#[test]
fn export_writes_consistent_artifacts_and_replot_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(ExperimentMode::SingleAppleTwoActuators, 25);
    s.inject_crash_steps = vec![4];
    s.trajectory_steps = vec![0, 24];
    let art = run_experiment(&s.resolve().unwrap()).unwrap();
    export_results(dir.path(), &art).unwrap();

    let back = read_steps_csv(&dir.path().join("steps.csv")).unwrap();
    assert_eq!(back.len(), art.records.len());
    assert_eq!(back.iter().filter(|r| !r.recovery).count(), 25);
    assert_eq!(back.iter().filter(|r| r.recovery).count(), 2);
    for (a, b) in back.iter().zip(&art.records) {
        assert_eq!((a.step, a.recovery, a.crash), (b.step, b.recovery, b.crash));
        assert!((a.reward - b.reward).abs() <= 1e-8 * b.reward.abs().max(1e-3));
    }

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["baseline"]["mean"].as_f64().unwrap(), art.baseline.mean);
    assert_eq!(meta["seed"].as_u64().unwrap(), 12);
    for f in ["coefficients.csv", "trajectory_0.csv", "trajectory_24.csv", "actor.params", "critic.json", "reward.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let reward_svg = std::fs::read(dir.path().join("reward.svg")).unwrap();
    let gains_svg = std::fs::read(dir.path().join("gains_j2_kd.svg")).unwrap();
    replot(dir.path()).unwrap();
    replot(dir.path()).unwrap();
    assert_eq!(std::fs::read(dir.path().join("reward.svg")).unwrap(), reward_svg);
    assert_eq!(std::fs::read(dir.path().join("gains_j2_kd.svg")).unwrap(), gains_svg);
}

#[test]
fn same_seed_gives_identical_steps_csv() {
    let s = spec(ExperimentMode::MultiApple, 2);
    let plan = s.resolve().unwrap();
    let write = || {
        let dir = tempfile::tempdir().unwrap();
        export_results(dir.path(), &run_experiment(&plan).unwrap()).unwrap();
        std::fs::read(dir.path().join("steps.csv")).unwrap()
    };
    assert_eq!(write(), write());
}
