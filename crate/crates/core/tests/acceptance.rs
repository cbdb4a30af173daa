//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{jitter, random_state, worst_fd_error};
use pid_a2c::agent::{
    actor_loss_gradient, critic_loss_gradient, reinforce_loss_gradient, sample_action, scale_action, A2cAgent,
    AgentConfig, GainTuner, Transition,
};
use pid_a2c::control::{pid_step, GainBounds, PidGains, PidState};
use pid_a2c::harness::{
    evaluate_held_out, export_results, fit_coefficients, run_episode, run_experiment, run_failsafe, sample_apples,
    seeded_rng, CrashInjector, ExperimentMode, ExperimentSpec, FourWayTable, Joint, SimConfig, SimulatedArm,
    StepRecord, ACTION_STREAM, BASELINE_GAINS, TEST_APPLE_STREAM,
};
use pid_a2c::neuralnet::{agent_layers, Mlp};
use pid_a2c::plant::{ArmGeometry, ArmState, SINGLE_APPLE};
use pid_a2c::spline::trapezoid;
use pid_a2c::tracking::{compute_reward, CrashReason, EpisodeLog, LogSample, CRASH_REWARD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn gradient_fidelity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let (mut wa, mut wc, mut wr): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for case in 0..20 {
        let out = if case % 2 == 0 { 6 } else { 12 };
        let mut actor = Mlp::new(&agent_layers(out), &mut rng).unwrap();
        let mut critic = Mlp::new(&agent_layers(1), &mut rng).unwrap();
        jitter(&mut actor, 0.01, &mut rng);
        jitter(&mut critic, 0.01, &mut rng);
        let s = random_state(&mut rng);
        let raw: Vec<f64> = (0..out / 2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let delta = rng.random_range(-1.0..1.0);
        let reward = rng.random_range(-3.0..0.0);

        let (_, g) = actor_loss_gradient(&actor, &s, &raw, delta);
        wa = wa.max(worst_fd_error(&actor, &g, 100, &mut rng, |n| {
            actor_loss_gradient(n, &s, &raw, delta).0
        }));
        let (_, g) = critic_loss_gradient(&critic, &s, reward);
        wc = wc.max(worst_fd_error(&critic, &g, 100, &mut rng, |n| {
            critic_loss_gradient(n, &s, reward).0
        }));
        let traj: Vec<Transition> = (0..4)
            .map(|_| Transition {
                state: random_state(&mut rng),
                raw: (0..out / 2).map(|_| rng.random_range(-2.0..2.0)).collect(),
                reward: rng.random_range(-1.0..0.0),
            })
            .collect();
        let (_, g) = reinforce_loss_gradient(&actor, &traj);
        wr = wr.max(worst_fd_error(&actor, &g, 100, &mut rng, |n| {
            reinforce_loss_gradient(n, &traj).0
        }));
    }
    verdict(
        wa < 1e-4 && wc < 1e-4 && wr < 1e-4,
        format!("max rel err actor {wa:.2e} critic {wc:.2e} reinforce {wr:.2e}"),
    )
}

fn j1_overshoot(gains: PidGains) -> f64 {
    let geom = ArmGeometry::default();
    let target = 0.5;
    let mut state = ArmState::at_rest([0.0, 1.0]);
    let mut pid = PidState::default();
    let mut peak: f64 = 0.0;
    for _ in 0..5000 {
        let u = pid_step(&gains, &mut pid, target - state.q[0], 0.001);
        state = geom.step_dynamics(&state, &[u, 0.0], 0.001).state;
        peak = peak.max(state.q[0]);
    }
    (peak - target) / target
}

fn pid_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_p: f64 = 0.0;
    for _ in 0..1000 {
        let kp = rng.random_range(0.0..1000.0);
        let e = rng.random_range(-5.0..5.0);
        let mut s = PidState::default();
        worst_p = worst_p.max((pid_step(&PidGains::raw(kp, 0.0, 0.0), &mut s, e, 0.001) - kp * e).abs());
    }
    let g = PidGains::raw(2.0, 1.0, 0.0);
    let mut s = PidState::default();
    let mut x = 0.0;
    for _ in 0..10_000 {
        let u = pid_step(&g, &mut s, 1.0 - x, 0.001);
        x += (-x + u) * 0.001;
    }
    let offset = (1.0 - x).abs();
    let damped = j1_overshoot(PidGains::raw(15.0, 0.0, 1.0));
    let undamped = j1_overshoot(PidGains::raw(15.0, 0.0, 0.0));
    verdict(
        worst_p <= 1e-12 && offset < 0.02 && damped < undamped,
        format!("P err {worst_p:.1e}, offset {:.3}%, overshoot {damped:.3} < {undamped:.3}", 100.0 * offset),
    )
}

fn reward_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let terms: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| (rng.random_range(0.0..0.05), rng.random_range(0.5..12.0), rng.random_range(0.0..6.3)))
            .collect();
        let offset = rng.random_range(0.0..0.05);
        let f = |t: f64| offset + terms.iter().map(|(a, w, p)| a * (w * t + p).sin().powi(2)).sum::<f64>();
        let n = rng.random_range(1000..4000usize);
        let dt = 0.001;
        let mut log = EpisodeLog::new();
        for k in 0..=n {
            let t = k as f64 * dt;
            let e = f(t);
            log.push(LogSample {
                t,
                commanded: [0.6 * e, 0.2],
                actual: [0.0, 0.2 + 0.4 * e],
            })
            .unwrap();
        }
        let r = compute_reward(&log).unwrap().value;
        let dense: Vec<f64> = (0..=n * 50).map(|k| k as f64 * dt / 50.0).collect();
        let vals: Vec<f64> = dense.iter().map(|&t| f(t)).collect();
        let oracle = -trapezoid(&dense, &vals);
        worst = worst.max(((r - oracle) / oracle).abs());
    }
    let mut crashed = EpisodeLog::new();
    for k in 0..100 {
        crashed
            .push(LogSample {
                t: k as f64 * 0.001,
                commanded: [0.3, 0.0],
                actual: [0.0, 0.0],
            })
            .unwrap();
    }
    crashed.mark_crash(CrashReason::TrackingDivergence);
    let crash = compute_reward(&crashed).unwrap().value;
    verdict(
        worst < 1e-3 && crash == -3.0,
        format!("max rel diff {worst:.2e}, crash reward {crash}"),
    )
}

fn action_bounds() -> Verdict {
    let bounds = GainBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for k in 0..10 {
        let mut actor = Mlp::new(&agent_layers(if k % 2 == 0 { 6 } else { 12 }), &mut rng).unwrap();
        jitter(&mut actor, 0.02 * (k as f64 + 1.0), &mut rng);
        for _ in 0..1000 {
            let a = sample_action(&actor, &random_state(&mut rng), &bounds, &mut rng);
            violations += a.gains.iter().filter(|g| !g.is_within(&bounds)).count();
        }
    }
    let mid = scale_action(&[0.0, 0.0, 0.0], &bounds)[0].as_array();
    verdict(
        violations == 0 && mid == [500.0, 0.5, 50.0],
        format!("{violations} out-of-bound gains in 10000 actions, scale(0) = {mid:?}"),
    )
}

fn tail_mean(records: &[&StepRecord]) -> f64 {
    let n = records.len();
    let tail = &records[n - n / 10..];
    tail.iter().map(|r| r.reward).sum::<f64>() / tail.len() as f64
}

fn single_apple_learning() -> Verdict {
    let mut passes = 0;
    let mut sums = (0.0, 0.0);
    let mut parts = Vec::new();
    for seed in 0..3 {
        let mut spec = ExperimentSpec::new(ExperimentMode::SingleAppleTwoActuators);
        spec.seed = seed;
        let plan = spec.resolve().unwrap();
        let art = run_experiment(&plan).unwrap();
        let learning: Vec<&StepRecord> = art.learning_records().collect();
        assert_eq!(learning.len(), 600);
        let tail = tail_mean(&learning);
        if tail > art.baseline.mean {
            passes += 1;
        }
        sums.0 += tail;
        sums.1 += art.baseline.mean;
        parts.push(format!("seed {seed}: {tail:.5} vs {:.5}", art.baseline.mean));
    }
    verdict(
        passes >= 2 && sums.0 / 3.0 > sums.1 / 3.0,
        format!("{passes}/3 seeds above baseline ({})", parts.join("; ")),
    )
}

fn multi_apple_generalization() -> Verdict {
    let mut passes = 0;
    let mut parts = Vec::new();
    for seed in 0..3 {
        let mut spec = ExperimentSpec::new(ExperimentMode::MultiApple);
        spec.seed = seed;
        let plan = spec.resolve().unwrap();
        let art = run_experiment(&plan).unwrap();
        let test = sample_apples(plan.workspace(), 30, &mut seeded_rng(seed, TEST_APPLE_STREAM));
        let mut arm = SimulatedArm::new(plan.sim().clone()).unwrap();
        let rep = evaluate_held_out(art.agent.as_ref(), &mut arm, &plan.tuned_joints, &test).unwrap();
        if rep.fraction >= 0.6 {
            passes += 1;
        }
        parts.push(format!("seed {seed}: {}/30", rep.improved));
    }
    verdict(passes >= 2, format!("{passes}/3 seeds ≥ 60% ({})", parts.join(", ")))
}

fn fail_safe() -> Verdict {
    let cfg = AgentConfig::two_actuator(9);
    let mut agent = A2cAgent::new(cfg, 2).unwrap();
    let arm = SimulatedArm::new(SimConfig::default()).unwrap();
    let mut exec = CrashInjector::new(arm, [0]);
    let mut rng = seeded_rng(9, ACTION_STREAM);
    let mut records = Vec::new();

    use pid_a2c::harness::MotionExecutor;
    exec.begin_step(0);
    let (rec, _) = run_episode(&mut agent, &mut exec, &Joint::ALL, &SINGLE_APPLE, 0, 0, &mut rng).unwrap();
    let learned_crash = rec.reward == CRASH_REWARD && rec.crash == Some(CrashReason::Injected) && rec.td_error.is_some();
    records.push(rec);
    let (actor, critic) = (agent.actor().clone(), agent.critic().clone());
    run_failsafe(&mut exec, &SINGLE_APPLE, 0, 0, &mut records).unwrap();
    let untouched = agent.actor().params() == actor.params() && agent.critic().params() == critic.params();
    let recovery: Vec<&StepRecord> = records[1..].iter().collect();
    let flagged = recovery.len() == 2
        && recovery
            .iter()
            .all(|r| r.recovery && r.step == 0 && r.gains == BASELINE_GAINS && r.td_error.is_none() && !r.crashed());

    // and within a full run the crashed step does not consume extra steps
    let mut spec = ExperimentSpec::new(ExperimentMode::SingleAppleTwoActuators);
    spec.steps = Some(40);
    spec.baseline_runs = 1;
    spec.inject_crash_steps = vec![7];
    let art = run_experiment(&spec.resolve().unwrap()).unwrap();
    let steps: Vec<u64> = art.learning_records().map(|r| r.step).collect();
    let conserved = steps == (0..40).collect::<Vec<_>>() && art.records.len() == 42;
    verdict(
        learned_crash && untouched && flagged && conserved,
        format!(
            "crash step learned with −3: {learned_crash}, params untouched: {untouched}, \
             2 flagged recoveries: {flagged}, step count conserved: {conserved}"
        ),
    )
}

fn determinism() -> Verdict {
    let mut identical = true;
    for mode in [ExperimentMode::SingleAppleTwoActuators, ExperimentMode::MultiApple] {
        let mut spec = ExperimentSpec::new(mode);
        spec.seed = 42;
        spec.inject_crash_steps = vec![11];
        let plan = spec.resolve().unwrap();
        let bytes = || {
            let dir = tempfile::tempdir().unwrap();
            export_results(dir.path(), &run_experiment(&plan).unwrap()).unwrap();
            std::fs::read(dir.path().join("steps.csv")).unwrap()
        };
        identical &= bytes() == bytes();
    }
    verdict(identical, format!("steps.csv byte-identical across reruns: {identical}"))
}

fn synthetic(joints: &[Joint], beta: &[f64], intercept: f64, rng: &mut ChaCha8Rng) -> Vec<StepRecord> {
    (0..120)
        .map(|k| {
            let mut gains = BASELINE_GAINS;
            for j in joints {
                gains[j.index()] = PidGains::raw(
                    rng.random_range(0.0..1000.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..100.0),
                );
            }
            let x: Vec<f64> = joints.iter().flat_map(|j| gains[j.index()].as_array()).collect();
            let crash = k % 7 == 0;
            StepRecord {
                step: k,
                epoch: 0,
                apple: SINGLE_APPLE,
                gains,
                reward: intercept + x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>(),
                td_error: Some(0.0),
                value: Some(0.0),
                crash: crash.then_some(CrashReason::Timeout),
                recovery: false,
            }
        })
        .collect()
}

fn regression_recovery() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let both = [0.000357, -0.089056, -0.004412, 0.000185, -0.121808, -0.006347];
    let j1 = [0.001609, -0.120123, -0.002428];
    let j2 = [0.000773, 0.130234, -0.003016];
    let together = fit_coefficients(&synthetic(&Joint::ALL, &both, -0.2, &mut rng), &Joint::ALL).unwrap();
    let r1 = fit_coefficients(&synthetic(&[Joint::J1], &j1, -0.1, &mut rng), &[Joint::J1]).unwrap();
    let r2 = fit_coefficients(&synthetic(&[Joint::J2], &j2, -0.3, &mut rng), &[Joint::J2]).unwrap();
    let table = FourWayTable::assemble(&together, &r1, &r2).unwrap();
    let independent: Vec<f64> = j1.iter().chain(&j2).copied().collect();
    let err = |got: &[f64], want: &[f64]| got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let worst = [
        err(&table.together_excluded, &both),
        err(&table.together_included, &both),
        err(&table.independent_excluded, &independent),
        err(&table.independent_included, &independent),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let structure = table.panels().iter().all(|(_, v)| v.len() == 6)
        && table.names.len() == 6
        && together.crashes_excluded.n < together.crashes_included.n;
    verdict(
        worst < 1e-8 && structure,
        format!("max coefficient error {worst:.2e}, four 6-term panels: {structure}"),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 9] = [
        ("1 gradient fidelity", Duration::from_secs(30), gradient_fidelity),
        ("2 PID law properties", Duration::from_secs(10), pid_properties),
        ("3 reward oracle equivalence", Duration::from_secs(10), reward_oracle),
        ("4 action-bound safety", Duration::from_secs(5), action_bounds),
        ("5 single-apple learning", Duration::from_secs(600), single_apple_learning),
        ("6 multi-apple generalization", Duration::from_secs(900), multi_apple_generalization),
        ("7 fail-safe protocol", Duration::from_secs(30), fail_safe),
        ("8 determinism", Duration::from_secs(120), determinism),
        ("9 regression recovery", Duration::from_secs(5), regression_recovery),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let ok = v.pass && elapsed <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({}; {:.2}s of {}s)",
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
