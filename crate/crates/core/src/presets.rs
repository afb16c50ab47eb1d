//! Bundled scenarios for the six-arm consensus, manipulability, industrial
//! servo, noise and teleoperation experiments.

use nalgebra::Vector2;

use crate::robot::{inverse_kinematics, KinematicParams};
use crate::scenario::{
    diag2, GainsSpec, GraphSpec, ModeSpec, NoiseSpec, ObserverInit, RobotSpec, ScenarioConfig,
    StimulusSpec,
};

pub const NAMES: [&str; 8] = [
    "sec5a-consensus",
    "sec5b-alpha10",
    "sec5b-alpha005",
    "sec5b-alpha0",
    "sec5c-pi",
    "sec5c-p-only",
    "sec5c-noise",
    "teleop-damping",
];

pub const TRUE_THETA: [f64; 2] = [2.0, 3.0];
pub const TRUE_VARTHETA: [f64; 3] = [4.0, 1.0, 1.5];

/// Initial kinematic estimates of the six arms.
pub const THETA_HAT0: [[f64; 2]; 6] = [
    [1.5, 2.5],
    [3.2, 3.2],
    [2.6, 2.8],
    [3.2, 2.7],
    [3.5, 2.9],
    [1.3, 2.8],
];

/// End-effector start positions; joint angles follow from elbow-up inverse
/// kinematics of the true arm.
pub const START_POSITIONS: [[f64; 2]; 6] = [
    [1.6, 0.3],
    [2.7, 0.9],
    [2.0, 1.0],
    [2.4, 0.2],
    [1.8, 0.7],
    [2.6, 0.5],
];

pub const RING_WEIGHT: f64 = 0.5;
pub const RING_DELAY: f64 = 0.5;
pub const DT: f64 = 0.005;

/// Horizon of the runs with an operator input. The ring needs well over a
/// minute to settle once the input pulls one arm away.
pub const STIMULUS_T_END: f64 = 200.0;

/// Constant operator torque of the teleoperation preset.
pub const TELEOP_TORQUE: [f64; 2] = [2.0, 1.0];

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "sec5a-consensus" => sec5a_consensus(),
        "sec5b-alpha10" => sec5b_alpha(10.0),
        "sec5b-alpha005" => sec5b_alpha(0.05),
        "sec5b-alpha0" => sec5b_alpha(0.0),
        "sec5c-pi" => sec5c_pi(10.0),
        "sec5c-p-only" => sec5c_pi(0.0),
        "sec5c-noise" => sec5c_noise(),
        "teleop-damping" => teleop_damping(),
        _ => return None,
    })
}

fn start_joints(x: [f64; 2]) -> [f64; 2] {
    let theta = KinematicParams::new(TRUE_THETA[0], TRUE_THETA[1]).expect("valid lengths");
    inverse_kinematics(&theta, &Vector2::from(x))
        .expect("start position reachable")
        .into()
}

/// Directed ring: agent `i` listens to agent `i + 1 (mod n)`.
pub fn ring(n: usize, weight: f64, delay: f64) -> GraphSpec {
    let mut weights = vec![vec![0.0; n]; n];
    let mut delays = vec![vec![0.0; n]; n];
    for i in 0..n {
        let j = (i + 1) % n;
        if j != i {
            weights[i][j] = weight;
            delays[i][j] = delay;
        }
    }
    GraphSpec { weights, delays }
}

fn six_arms() -> Vec<RobotSpec> {
    START_POSITIONS
        .iter()
        .zip(THETA_HAT0)
        .map(|(x, th)| RobotSpec {
            theta: TRUE_THETA,
            vartheta: TRUE_VARTHETA,
            q0: start_joints(*x),
            qdot0: [0.0; 2],
            theta_hat0: th,
            vartheta_hat0: [0.0; 3],
        })
        .collect()
}

/// Six delayed arms on a ring with the default gains, no external input.
pub fn sec5a_consensus() -> ScenarioConfig {
    ScenarioConfig {
        name: "sec5a-consensus".into(),
        graph: ring(6, RING_WEIGHT, RING_DELAY),
        robots: six_arms(),
        gains: GainsSpec::default(),
        mode: ModeSpec::Dynamic,
        observer_init: ObserverInit::Offset(0.02),
        stimulus: None,
        noise: NoiseSpec::default(),
        dt: DT,
        t_end: 60.0,
        integrator: Default::default(),
        seed: 0,
    }
}

/// Operator pulling the first arm toward `[2.6, 0.9]` from `t = 10 s`.
pub fn operator_stimulus() -> StimulusSpec {
    StimulusSpec::TaskPd {
        agent: 0,
        t_on: 10.0,
        kd: 15.0,
        kp: 30.0,
        x_h: [2.6, 0.9],
    }
}

pub fn sec5b_alpha(alpha: f64) -> ScenarioConfig {
    let mut cfg = sec5a_consensus();
    cfg.name = match alpha {
        a if a == 10.0 => "sec5b-alpha10".into(),
        a if a == 0.05 => "sec5b-alpha005".into(),
        a if a == 0.0 => "sec5b-alpha0".into(),
        a => format!("sec5b-alpha{a}"),
    };
    cfg.gains.alpha = alpha;
    cfg.stimulus = Some(operator_stimulus());
    cfg.t_end = STIMULUS_T_END;
    cfg
}

/// Velocity-commanded arms behind a joint PI servo with `K_P = 60 I` and the
/// given integral gain, `alpha = 0`.
pub fn sec5c_pi(ki: f64) -> ScenarioConfig {
    let mut cfg = sec5b_alpha(0.0);
    cfg.name = if ki == 0.0 { "sec5c-p-only".into() } else { "sec5c-pi".into() };
    cfg.mode = ModeSpec::KinematicPi {
        kp: diag2(60.0),
        ki: diag2(ki),
    };
    cfg
}

pub fn sec5c_noise() -> ScenarioConfig {
    let mut cfg = sec5c_pi(0.0);
    cfg.name = "sec5c-noise".into();
    cfg.noise = NoiseSpec {
        q: 0.002,
        qdot: 0.005,
        x: 0.01,
    };
    cfg.seed = 2016;
    cfg
}

/// Two identical arms with joint PD coupling and a constant operator torque
/// on the first arm. `K_D` here is the unit of the damping sweep.
pub fn teleop_damping() -> ScenarioConfig {
    let q0 = start_joints([2.2, 0.6]);
    let arm = RobotSpec {
        theta: TRUE_THETA,
        vartheta: TRUE_VARTHETA,
        q0,
        qdot0: [0.0; 2],
        theta_hat0: TRUE_THETA,
        vartheta_hat0: [0.0; 3],
    };
    ScenarioConfig {
        name: "teleop-damping".into(),
        graph: ring(2, 1.0, 0.0),
        robots: vec![arm.clone(), arm],
        gains: GainsSpec::default(),
        mode: ModeSpec::TeleopPd {
            kd: diag2(5.0),
            kp: diag2(50.0),
        },
        observer_init: ObserverInit::Offset(0.0),
        stimulus: Some(StimulusSpec::JointTorque {
            agent: 0,
            t_on: 0.0,
            torque: TELEOP_TORQUE,
        }),
        noise: NoiseSpec::default(),
        dt: DT,
        t_end: 10.0,
        integrator: Default::default(),
        seed: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::forward_kinematics;

    #[test]
    fn every_preset_validates() {
        for name in NAMES {
            let cfg = by_name(name).unwrap();
            assert_eq!(cfg.name, name);
            let v = cfg.validate();
            assert!(v.is_empty(), "{name}: {v:?}");
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn start_joints_hit_targets_away_from_singularity() {
        let theta = KinematicParams::new(2.0, 3.0).unwrap();
        for x in START_POSITIONS {
            let q = Vector2::from(start_joints(x));
            assert!((forward_kinematics(&theta, &q) - Vector2::from(x)).amax() < 1e-12);
            assert!(q[1].sin().abs() > 0.3);
        }
    }
}
