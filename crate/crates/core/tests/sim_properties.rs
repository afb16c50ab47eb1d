use manicon_core::analysis::{damping_sweep_teleop, manipulability_sweep};
use manicon_core::graph::{laplacian, left_eigenvector_gamma};
use manicon_core::nalgebra::{DMatrix, Vector2};
use manicon_core::robot::{forward_kinematics, jacobian_raw};
use manicon_core::scenario::Integrator;
use manicon_core::{consensus_report, presets, run_config, DelayChannel, DirectedGraph, KinematicParams};
use proptest::prelude::*;

fn final_weighted(cfg: &manicon_core::ScenarioConfig) -> Vector2<f64> {
    let sc = cfg.resolve().unwrap();
    let trace = run_config(cfg).unwrap();
    consensus_report(&trace, &sc.graph, 1e-3).final_weighted
}

#[test]
fn euler_and_rk4_agree_on_the_consensus_value() {
    let rk4 = presets::sec5a_consensus();
    let mut euler = rk4.clone();
    euler.integrator = Integrator::Euler;
    let d = (final_weighted(&rk4) - final_weighted(&euler)).amax();
    assert!(d < 1e-3, "{d}");
}

#[test]
fn positive_alpha_restores_the_predicted_consensus() {
    let mut base = presets::sec5a_consensus();
    base.t_end = 200.0;
    let predicted = base.resolve().unwrap().predicted_consensus().unwrap();
    let rows = manipulability_sweep(&base, &[10.0, 1.0, 0.0], None, 1e-3);
    let means: Vec<_> = rows.into_iter().map(|r| r.unwrap().final_weighted).collect();
    assert!((means[0] - predicted).amax() < 1e-6, "{}", means[0]);
    assert!((means[1] - predicted).amax() < 1e-6, "{}", means[1]);
    // without the I_s feedback the start-up transient stays in the equilibrium
    assert!((means[2] - predicted).amax() > 1e-2, "{}", means[2]);
}

#[test]
fn small_operator_torque_scales_displacement() {
    let base = presets::teleop_damping();
    let one = damping_sweep_teleop(&base, &[1.0], [0.2, 0.1], 2.0);
    let two = damping_sweep_teleop(&base, &[1.0], [0.4, 0.2], 2.0);
    let (a, b) = (one[0].as_ref().unwrap().displacement, two[0].as_ref().unwrap().displacement);
    assert!(a > 0.0);
    assert!((b / a - 2.0).abs() < 0.4, "{a} {b}");
}

#[test]
fn runs_are_reproducible_with_noise() {
    let mut cfg = presets::sec5c_noise();
    cfg.t_end = 1.0;
    let a = run_config(&cfg).unwrap();
    let b = run_config(&cfg).unwrap();
    assert_eq!(a.last(), b.last());
    cfg.seed += 1;
    let c = run_config(&cfg).unwrap();
    assert_ne!(a.last(), c.last());
}

fn strongly_connected(n: usize, extra: &[(usize, usize, f64)]) -> DirectedGraph {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, (i + 1) % n)] = 0.3;
    }
    for &(i, j, v) in extra {
        if i % n != j % n {
            w[(i % n, j % n)] = v;
        }
    }
    DirectedGraph::undelayed(w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_is_a_probability_left_null_vector(
        n in 2usize..8,
        extra in prop::collection::vec((0usize..8, 0usize..8, 0.05f64..3.0), 0..12),
    ) {
        let g = strongly_connected(n, &extra);
        let gamma = left_eigenvector_gamma(&g).unwrap();
        let res = (gamma.transpose() * laplacian(&g)).amax();
        prop_assert!(res < 1e-10);
        prop_assert!((gamma.sum() - 1.0).abs() < 1e-12);
        prop_assert!(gamma.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn jacobian_matches_central_difference(
        q1 in -3.0f64..3.0,
        q2 in -3.0f64..3.0,
        l1 in 0.5f64..5.0,
        l2 in 0.5f64..5.0,
    ) {
        let kp = KinematicParams::new(l1, l2).unwrap();
        let q = Vector2::new(q1, q2);
        let j = jacobian_raw(&Vector2::new(l1, l2), &q);
        let h = 1e-6;
        for c in 0..2 {
            let mut e = Vector2::zeros();
            e[c] = h;
            let fd = (forward_kinematics(&kp, &(q + e)) - forward_kinematics(&kp, &(q - e))) / (2.0 * h);
            prop_assert!((fd - j.column(c)).amax() < 1e-6);
        }
    }

    #[test]
    fn channel_replays_pushed_values_after_the_delay(
        delay_steps in 1usize..40,
        values in prop::collection::vec(-5.0f64..5.0, 60),
    ) {
        let dt = 0.01;
        let delay = delay_steps as f64 * dt;
        let mut ch = DelayChannel::new(delay, 2.0 * dt);
        for (k, v) in values.iter().enumerate() {
            ch.push(k as f64 * dt, Vector2::new(*v, -*v), Vector2::zeros()).unwrap();
            let t = k as f64 * dt;
            if t >= delay {
                let back = ((t - delay) / dt).round() as usize;
                let s = ch.sample(t);
                prop_assert!(s.valid);
                prop_assert!((s.x_o_delayed[0] - values[back]).abs() < 1e-12);
            } else {
                prop_assert!(!ch.sample(t).valid);
            }
        }
    }
}
