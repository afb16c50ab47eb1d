//! Declarative experiment description.
//!
//! [`ScenarioConfig`] is the on-disk JSON schema. [`ScenarioConfig::resolve`]
//! checks every invariant at once and produces a typed [`Scenario`] for the
//! simulator.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::{check_spd2, AgentState, ControllerGains, PiServoGains, TaskSpacePd};
use crate::error::{Error, Result, Violation};
use crate::graph::{self, DirectedGraph};
use crate::robot::{self, DynamicParams, KinematicParams, Robot};

pub type Mat2 = [[f64; 2]; 2];
pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub graph: GraphSpec,
    pub robots: Vec<RobotSpec>,
    pub gains: GainsSpec,
    pub mode: ModeSpec,
    #[serde(default)]
    pub observer_init: ObserverInit,
    #[serde(default)]
    pub stimulus: Option<StimulusSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    /// `weights[i][j] > 0` when agent `i` receives from agent `j`.
    pub weights: Vec<Vec<f64>>,
    /// Delay in seconds of the `j -> i` link.
    pub delays: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    /// True link lengths `[l1, l2]`.
    pub theta: [f64; 2],
    /// True lumped inertias `[a1, a2, a3]`.
    pub vartheta: [f64; 3],
    pub q0: [f64; 2],
    #[serde(default)]
    pub qdot0: [f64; 2],
    pub theta_hat0: [f64; 2],
    #[serde(default)]
    pub vartheta_hat0: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub k: Mat2,
    pub gamma: Mat3,
    pub lambda_kin: Mat2,
    pub theta_lo: [f64; 2],
    pub theta_hi: [f64; 2],
    pub det_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    /// Adaptive torque controller.
    Dynamic,
    /// Velocity-commanded arms behind a joint PI servo.
    KinematicPi { kp: Mat2, ki: Mat2 },
    /// Two arms coupled by joint-space PD.
    TeleopPd { kd: Mat2, kp: Mat2 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverInit {
    /// `x_o(0) = x(0) + offset` in both coordinates.
    Offset(f64),
    Explicit(Vec<[f64; 2]>),
}

impl Default for ObserverInit {
    fn default() -> Self {
        ObserverInit::Offset(0.02)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StimulusSpec {
    TaskPd {
        agent: usize,
        t_on: f64,
        kd: f64,
        kp: f64,
        x_h: [f64; 2],
    },
    JointTorque {
        agent: usize,
        t_on: f64,
        torque: [f64; 2],
    },
}

/// Standard deviations of additive Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub qdot: f64,
    #[serde(default)]
    pub x: f64,
}

impl NoiseSpec {
    pub fn is_zero(&self) -> bool {
        self.q == 0.0 && self.qdot == 0.0 && self.x == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

impl std::str::FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rk4" => Ok(Self::Rk4),
            "euler" => Ok(Self::Euler),
            other => Err(format!("unknown integrator `{other}` (expected rk4 or euler)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Dynamic,
    KinematicPi(PiServoGains),
    TeleopPd { kd: Matrix2<f64>, kp: Matrix2<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stimulus {
    TaskPd { agent: usize, pd: TaskSpacePd },
    JointTorque { agent: usize, t_on: f64, torque: Vector2<f64> },
}

impl Stimulus {
    pub fn agent(&self) -> usize {
        match *self {
            Stimulus::TaskPd { agent, .. } | Stimulus::JointTorque { agent, .. } => agent,
        }
    }
}

/// Validated, typed scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: DirectedGraph,
    pub robots: Vec<Robot>,
    pub initial: Vec<AgentState>,
    pub gains: ControllerGains,
    pub mode: Mode,
    pub stimulus: Option<Stimulus>,
    pub noise: NoiseSpec,
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub seed: u64,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.robots.len()
    }

    /// Number of integration steps; the trace holds one more sample.
    pub fn steps(&self) -> usize {
        // Guard against t_end / dt landing a hair below an integer.
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    pub fn initial_observed(&self) -> Vec<Vector2<f64>> {
        self.initial.iter().map(|s| s.x_o).collect()
    }

    /// Equilibrium predicted from the graph and the initial observations.
    pub fn predicted_consensus(&self) -> Result<Vector2<f64>> {
        graph::predicted_consensus_value(&self.graph, &self.initial_observed())
    }
}

pub fn mat2(m: &Mat2) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

pub fn mat3(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

pub fn diag2(d: f64) -> Mat2 {
    [[d, 0.0], [0.0, d]]
}

pub fn diag3(d: f64) -> Mat3 {
    [[d, 0.0, 0.0], [0.0, d, 0.0], [0.0, 0.0, d]]
}

impl GainsSpec {
    pub fn to_gains(&self) -> ControllerGains {
        ControllerGains {
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            k: mat2(&self.k),
            gamma: mat3(&self.gamma),
            lambda_kin: mat2(&self.lambda_kin),
            theta_lo: Vector2::from(self.theta_lo),
            theta_hi: Vector2::from(self.theta_hi),
            det_floor: self.det_floor,
        }
    }
}

impl Default for GainsSpec {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 10.0,
            lambda: 25.0,
            k: diag2(30.0),
            gamma: diag3(10.0),
            lambda_kin: diag2(10.0),
            theta_lo: [0.5, 0.5],
            theta_hi: [5.0, 5.0],
            det_floor: 1e-3,
        }
    }
}

fn finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

fn is_diag_positive(m: &Matrix2<f64>) -> bool {
    m[(0, 1)] == 0.0 && m[(1, 0)] == 0.0 && m[(0, 0)] > 0.0 && m[(1, 1)] > 0.0 && finite(m.as_slice())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Every violated invariant; empty when the scenario is runnable.
    pub fn validate(&self) -> Vec<Violation> {
        match self.resolve() {
            Ok(_) => Vec::new(),
            Err(Error::InvalidConfig(v)) => v,
            Err(other) => vec![Violation::new("scenario", other.to_string())],
        }
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let mut out: Vec<Violation> = Vec::new();

        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(Violation::new("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            out.push(Violation::new("t_end", format!("must be >= dt, got {}", self.t_end)));
        }
        for (name, v) in [("noise.q", self.noise.q), ("noise.qdot", self.noise.qdot), ("noise.x", self.noise.x)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(name, format!("standard deviation must be >= 0, got {v}")));
            }
        }

        let n = self.robots.len();
        if n == 0 {
            out.push(Violation::new("robots", "at least one robot is required"));
        }

        let graph = match DirectedGraph::from_rows(&self.graph.weights, &self.graph.delays) {
            Ok(g) if g.n() == n => Some(g),
            Ok(g) => {
                out.push(Violation::new(
                    "graph",
                    format!("graph has {} agents but {} robots are listed", g.n(), n),
                ));
                None
            }
            Err(Error::InvalidConfig(v)) => {
                out.extend(v);
                None
            }
            Err(e) => {
                out.push(Violation::new("graph", e.to_string()));
                None
            }
        };

        let is_teleop = matches!(self.mode, ModeSpec::TeleopPd { .. });
        if let Some(g) = &graph {
            if !is_teleop && n > 0 && !graph::has_spanning_tree(g) {
                out.push(Violation::new(
                    "graph",
                    "interaction graph has no directed spanning tree",
                ));
            }
            if self.dt > 0.0 {
                for i in 0..g.n() {
                    for (j, _, t) in g.neighbors(i) {
                        if t > 0.0 && t < self.dt {
                            out.push(Violation::new(
                                format!("graph.delays[{i}][{j}]"),
                                format!("nonzero delay {t} s is shorter than dt = {} s", self.dt),
                            ));
                        }
                    }
                }
            }
        }

        let gains = self.gains.to_gains();
        out.extend(gains.violations());

        let mode = match &self.mode {
            ModeSpec::Dynamic => Mode::Dynamic,
            ModeSpec::KinematicPi { kp, ki } => {
                let (kp, ki) = (mat2(kp), mat2(ki));
                check_spd2(&mut out, "mode.kp", &kp);
                let sym = finite(ki.as_slice()) && (ki - ki.transpose()).amax() <= 1e-12 * ki.amax().max(1.0);
                if !(sym && ki.symmetric_eigenvalues().iter().all(|&e| e >= 0.0)) {
                    out.push(Violation::new("mode.ki", "must be symmetric positive semidefinite"));
                }
                Mode::KinematicPi(PiServoGains { kp, ki })
            }
            ModeSpec::TeleopPd { kd, kp } => {
                let (kd, kp) = (mat2(kd), mat2(kp));
                if n != 2 {
                    out.push(Violation::new("robots", format!("teleop_pd needs exactly 2 robots, got {n}")));
                }
                if !is_diag_positive(&kd) {
                    out.push(Violation::new("mode.kd", "must be diagonal positive definite"));
                }
                if !is_diag_positive(&kp) {
                    out.push(Violation::new("mode.kp", "must be diagonal positive definite"));
                }
                Mode::TeleopPd { kd, kp }
            }
        };

        let stimulus = self.stimulus.as_ref().map(|s| {
            let (agent, t_on) = match *s {
                StimulusSpec::TaskPd { agent, t_on, .. } | StimulusSpec::JointTorque { agent, t_on, .. } => (agent, t_on),
            };
            if agent >= n {
                out.push(Violation::new("stimulus.agent", format!("agent {agent} out of range for {n} robots")));
            }
            if !(t_on.is_finite() && t_on >= 0.0) {
                out.push(Violation::new("stimulus.t_on", "must be finite and >= 0"));
            }
            match *s {
                StimulusSpec::TaskPd { agent, t_on, kd, kp, x_h } => {
                    if !(kd.is_finite() && kd >= 0.0 && kp.is_finite() && kp >= 0.0 && finite(&x_h)) {
                        out.push(Violation::new("stimulus", "task_pd gains must be >= 0 and target finite"));
                    }
                    Stimulus::TaskPd {
                        agent,
                        pd: TaskSpacePd { t_on, kd, kp, x_h: Vector2::from(x_h) },
                    }
                }
                StimulusSpec::JointTorque { agent, t_on, torque } => {
                    if !finite(&torque) {
                        out.push(Violation::new("stimulus.torque", "must be finite"));
                    }
                    Stimulus::JointTorque { agent, t_on, torque: Vector2::from(torque) }
                }
            }
        });

        if let ObserverInit::Explicit(xs) = &self.observer_init {
            if xs.len() != n {
                out.push(Violation::new(
                    "observer_init.explicit",
                    format!("expected {n} entries, got {}", xs.len()),
                ));
            }
        }

        let mut robots = Vec::with_capacity(n);
        let mut initial = Vec::with_capacity(n);
        for (i, r) in self.robots.iter().enumerate() {
            let kin = KinematicParams::new(r.theta[0], r.theta[1]);
            let dynp = DynamicParams::new(r.vartheta[0], r.vartheta[1], r.vartheta[2]);
            if let Err(e) = &kin {
                out.push(Violation::new(format!("robots[{i}].theta"), e.to_string()));
            }
            if let Err(e) = &dynp {
                out.push(Violation::new(format!("robots[{i}].vartheta"), e.to_string()));
            }
            if !finite(&r.q0) || !finite(&r.qdot0) || !finite(&r.vartheta_hat0) {
                out.push(Violation::new(format!("robots[{i}]"), "initial state must be finite"));
            }
            for k in 0..2 {
                let th = r.theta_hat0[k];
                if !(th >= gains.theta_lo[k] && th <= gains.theta_hi[k]) {
                    out.push(Violation::new(
                        format!("robots[{i}].theta_hat0[{k}]"),
                        format!("{th} lies outside the projection box [{}, {}]", gains.theta_lo[k], gains.theta_hi[k]),
                    ));
                }
            }
            let (Ok(kin), Ok(dynp)) = (kin, dynp) else { continue };
            let q = Vector2::from(r.q0);
            if !is_teleop {
                let det = robot::jacobian_raw(&Vector2::from(r.theta_hat0), &q).determinant();
                if !(det.abs() >= gains.det_floor) {
                    out.push(Violation::new(
                        format!("robots[{i}].q0"),
                        format!("initial estimated Jacobian is singular (|det| = {:.3e})", det.abs()),
                    ));
                }
            }
            let x = robot::forward_kinematics(&kin, &q);
            let x_o = match &self.observer_init {
                ObserverInit::Offset(d) => x + Vector2::repeat(*d),
                ObserverInit::Explicit(xs) => xs.get(i).map(|v| Vector2::from(*v)).unwrap_or(x),
            };
            robots.push(Robot { kinematics: kin, dynamics: dynp });
            initial.push(AgentState {
                q,
                qdot: Vector2::from(r.qdot0),
                x_o,
                theta_hat: Vector2::from(r.theta_hat0),
                vartheta_hat: Vector3::from(r.vartheta_hat0),
                ..Default::default()
            });
        }

        if !out.is_empty() {
            return Err(Error::InvalidConfig(out));
        }
        Ok(Scenario {
            name: self.name.clone(),
            graph: graph.expect("validated"),
            robots,
            initial,
            gains,
            mode,
            stimulus,
            noise: self.noise,
            dt: self.dt,
            t_end: self.t_end,
            integrator: self.integrator,
            seed: self.seed,
        })
    }
}
