use pid_a2c::plant::{detect_crash, ArmGeometry, ArmState, CrashCriteria, JointPair};
use pid_a2c::tracking::{CrashReason, EpisodeLog, LogSample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute force over every contiguous run of over-threshold samples.
fn diverges_oracle(log: &EpisodeLog, c: &CrashCriteria) -> bool {
    let s = log.samples();
    for j in 0..2 {
        for a in 0..s.len() {
            for b in a..s.len() {
                if (s[b].commanded[j] - s[b].actual[j]).abs() <= c.divergence_threshold {
                    break;
                }
                if s[b].t - s[a].t >= c.divergence_window - 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

proptest! {
    #[test]
    fn divergence_rule_matches_sliding_window_oracle(
        errs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 5..120),
        dt in 0.005f64..0.05,
    ) {
        let c = CrashCriteria::default();
        let mut log = EpisodeLog::new();
        for (k, (e1, e2)) in errs.iter().enumerate() {
            log.push(LogSample { t: k as f64 * dt, commanded: [*e1, 0.0], actual: [0.0, *e2] }).unwrap();
        }
        let got = detect_crash(&log, false, 1e6, &c) == Some(CrashReason::TrackingDivergence);
        prop_assert_eq!(got, diverges_oracle(&log, &c));
    }

    #[test]
    fn states_never_leave_joint_limits(
        torques in prop::collection::vec((-40.0f64..40.0, -40.0f64..40.0), 1..400),
        q0 in (-3.0f64..3.0, 0.05f64..3.0),
    ) {
        let g = ArmGeometry::default();
        let mut s = ArmState::at_rest([q0.0, q0.1]);
        for (t1, t2) in torques {
            for _ in 0..20 {
                s = g.step_dynamics(&s, &[t1, t2], 0.001).state;
                prop_assert!(g.within_limits(&s.q), "{:?}", s.q);
            }
        }
    }
}

#[test]
fn ik_fk_round_trip_on_random_reachable_points() {
    let g = ArmGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 1000 {
        let q: JointPair = [rng.random_range(-3.1..3.1), rng.random_range(0.01..3.1)];
        let p = g.forward_kinematics(&q);
        let back = g.forward_kinematics(&g.inverse_kinematics(p).unwrap());
        worst = worst.max((back[0] - p[0]).hypot(back[1] - p[1]));
        n += 1;
    }
    assert!(worst < 1e-9, "worst round-trip error {worst}");
}

#[test]
fn kinetic_energy_never_grows_without_torque() {
    let g = ArmGeometry::default();
    let mut s = ArmState {
        q: [0.0, 1.5],
        qd: [2.0, -1.5],
        t: 0.0,
    };
    let mut e = g.kinetic_energy(&s);
    for _ in 0..5000 {
        s = g.step_dynamics(&s, &[0.0, 0.0], 0.001).state;
        let next = g.kinetic_energy(&s);
        assert!(next <= e, "{next} > {e}");
        e = next;
    }
}

#[test]
fn identical_inputs_give_bit_identical_trajectories() {
    let g = ArmGeometry::default();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = ArmState::at_rest([0.3, 1.2]);
        let mut out = Vec::new();
        for _ in 0..3000 {
            let tau = [rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0)];
            s = g.step_dynamics(&s, &tau, 0.001).state;
            out.push((s.q[0].to_bits(), s.q[1].to_bits(), s.qd[0].to_bits(), s.qd[1].to_bits()));
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn timeout_and_limit_rules() {
    let c = CrashCriteria::default();
    let mut log = EpisodeLog::new();
    for k in 0..=3500 {
        log.push(LogSample {
            t: k as f64 * 0.001,
            commanded: [0.0; 2],
            actual: [0.0; 2],
        })
        .unwrap();
    }
    assert_eq!(detect_crash(&log, false, 1.0, &c), Some(CrashReason::Timeout));
    assert_eq!(detect_crash(&log, false, 1.6, &c), None);
    assert_eq!(detect_crash(&log, true, 1.6, &c), Some(CrashReason::LimitHit));
}
