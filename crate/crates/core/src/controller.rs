//! Observer-based adaptive consensus controller.
//!
//! Each agent keeps an observed task-space position `x_o` driven by its
//! reference velocity instead of its joint velocity, a joint reference
//! velocity built from delayed neighbor observations, a kinematic parameter
//! estimate updated by the observation error and (in torque mode) a dynamic
//! parameter estimate. The same kinematic loop also feeds a joint-velocity PI
//! servo for arms that only accept velocity commands.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result, Violation};
use crate::robot::{
    self, dynamic_regressor, jacobian_raw, jacobian_rate, kinematic_regressor, KinematicParams,
    Robot,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    /// Integral gain on the consensus sliding vector; `1/alpha` indexes manipulability.
    pub alpha: f64,
    /// Observer proportional gain.
    pub beta: f64,
    /// Observer integral gain.
    pub lambda: f64,
    /// Torque feedback gain.
    pub k: Matrix2<f64>,
    /// Dynamic adaptation gain.
    pub gamma: Matrix3<f64>,
    /// Kinematic adaptation gain.
    pub lambda_kin: Matrix2<f64>,
    pub theta_lo: Vector2<f64>,
    pub theta_hi: Vector2<f64>,
    /// Smallest admissible `|det J_hat|`.
    pub det_floor: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 10.0,
            lambda: 25.0,
            k: Matrix2::identity() * 30.0,
            gamma: Matrix3::identity() * 10.0,
            lambda_kin: Matrix2::identity() * 10.0,
            theta_lo: Vector2::repeat(0.5),
            theta_hi: Vector2::repeat(5.0),
            det_floor: 1e-3,
        }
    }
}

impl ControllerGains {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            out.push(Violation::new("gains.alpha", "must be finite and >= 0"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            out.push(Violation::new("gains.beta", "must be finite and > 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            out.push(Violation::new("gains.lambda", "must be finite and >= 0"));
        }
        check_spd2(&mut out, "gains.k", &self.k);
        if !is_spd3(&self.gamma) {
            out.push(Violation::new("gains.gamma", "must be symmetric positive definite"));
        }
        check_spd2(&mut out, "gains.lambda_kin", &self.lambda_kin);
        for k in 0..2 {
            if !(self.theta_lo[k] > 0.0 && self.theta_lo[k] < self.theta_hi[k] && self.theta_hi[k].is_finite()) {
                out.push(Violation::new(
                    format!("gains.theta_bounds[{k}]"),
                    format!(
                        "need 0 < lo < hi < inf, got [{}, {}]",
                        self.theta_lo[k], self.theta_hi[k]
                    ),
                ));
            }
        }
        if !(self.det_floor.is_finite() && self.det_floor > 0.0) {
            out.push(Violation::new("gains.det_floor", "must be finite and > 0"));
        }
        out
    }
}

pub(crate) fn check_spd2(out: &mut Vec<Violation>, field: &str, m: &Matrix2<f64>) {
    if !is_spd2(m) {
        out.push(Violation::new(field, "must be symmetric positive definite"));
    }
}

fn symmetric<const D: usize>(m: &nalgebra::SMatrix<f64, D, D>) -> bool {
    m.iter().all(|x| x.is_finite()) && (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0)
}

pub(crate) fn is_spd2(m: &Matrix2<f64>) -> bool {
    symmetric(m) && m.cholesky().is_some()
}

pub(crate) fn is_spd3(m: &Matrix3<f64>) -> bool {
    symmetric(m) && m.cholesky().is_some()
}

/// Augmented per-agent state integrated by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentState {
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
    /// Observed task-space position.
    pub x_o: Vector2<f64>,
    /// Integral of the consensus sliding vector `s*_o`.
    pub i_s: Vector2<f64>,
    /// Integral of the observation error `x_o - x`.
    pub i_x: Vector2<f64>,
    pub theta_hat: Vector2<f64>,
    pub vartheta_hat: Vector3<f64>,
    /// Integral of the joint velocity error `qdot_r - qdot` (PI servo only).
    pub i_v: Vector2<f64>,
    /// Running integral of `s^T J^T J s`, used by the quasi-Lyapunov diagnostic.
    pub coupling: f64,
}

impl AgentState {
    /// `self + h * rate`, field by field.
    pub fn add_scaled(&self, rate: &AgentState, h: f64) -> AgentState {
        AgentState {
            q: self.q + rate.q * h,
            qdot: self.qdot + rate.qdot * h,
            x_o: self.x_o + rate.x_o * h,
            i_s: self.i_s + rate.i_s * h,
            i_x: self.i_x + rate.i_x * h,
            theta_hat: self.theta_hat + rate.theta_hat * h,
            vartheta_hat: self.vartheta_hat + rate.vartheta_hat * h,
            i_v: self.i_v + rate.i_v * h,
            coupling: self.coupling + rate.coupling * h,
        }
    }

    /// Largest magnitude over all fields together with the field's name.
    pub fn largest_entry(&self) -> (&'static str, f64) {
        let fields: [(&'static str, &[f64]); 9] = [
            ("q", self.q.as_slice()),
            ("qdot", self.qdot.as_slice()),
            ("x_o", self.x_o.as_slice()),
            ("i_s", self.i_s.as_slice()),
            ("i_x", self.i_x.as_slice()),
            ("theta_hat", self.theta_hat.as_slice()),
            ("vartheta_hat", self.vartheta_hat.as_slice()),
            ("i_v", self.i_v.as_slice()),
            ("coupling", std::slice::from_ref(&self.coupling)),
        ];
        let mut worst = ("q", 0.0_f64);
        for (name, values) in fields {
            for &v in values {
                if !v.is_finite() {
                    return (name, v);
                }
                if v.abs() > worst.1 {
                    worst = (name, v.abs());
                }
            }
        }
        worst
    }

    /// Clamps the kinematic estimate into its box.
    pub fn project_theta(&mut self, gains: &ControllerGains) {
        for k in 0..2 {
            self.theta_hat[k] = self.theta_hat[k].clamp(gains.theta_lo[k], gains.theta_hi[k]);
        }
    }
}

/// What the controller sees of its own arm. Equal to the truth unless
/// measurement noise is injected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
    pub x: Vector2<f64>,
}

impl Measurement {
    pub fn exact(state: &AgentState, theta: &KinematicParams) -> Self {
        Self {
            q: state.q,
            qdot: state.qdot,
            x: robot::forward_kinematics(theta, &state.q),
        }
    }
}

/// Delayed observation `x_o,j(t - T_ij)` and its rate as received by agent `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSample {
    pub x_o_delayed: Vector2<f64>,
    pub xdot_o_delayed: Vector2<f64>,
    /// `false` before any data has arrived; both vectors are then zero.
    pub valid: bool,
}

impl NeighborSample {
    pub fn new(x_o: Vector2<f64>, xdot_o: Vector2<f64>) -> Self {
        Self {
            x_o_delayed: x_o,
            xdot_o_delayed: xdot_o,
            valid: true,
        }
    }

    pub fn invalid() -> Self {
        Self {
            x_o_delayed: Vector2::zeros(),
            xdot_o_delayed: Vector2::zeros(),
            valid: false,
        }
    }
}

/// `(w_ij, sample)` pairs for one agent.
pub type Neighbors<'a> = &'a [(f64, NeighborSample)];

/// `sum_j w_ij (x_o - x_o,j(t - T_ij))`.
pub fn consensus_error(x_o: &Vector2<f64>, neighbors: Neighbors) -> Vector2<f64> {
    neighbors
        .iter()
        .fold(Vector2::zeros(), |acc, (w, n)| acc + (x_o - n.x_o_delayed) * *w)
}

fn consensus_error_rate(xdot_o: &Vector2<f64>, neighbors: Neighbors) -> Vector2<f64> {
    neighbors
        .iter()
        .fold(Vector2::zeros(), |acc, (w, n)| acc + (xdot_o - n.xdot_o_delayed) * *w)
}

/// Consensus sliding vector in its algebraic form
/// `-alpha I_s - beta (x_o - x) - lambda I_x`.
pub fn s_star(state: &AgentState, meas: &Measurement, gains: &ControllerGains) -> Vector2<f64> {
    -state.i_s * gains.alpha - (state.x_o - meas.x) * gains.beta - state.i_x * gains.lambda
}

/// `J(q; theta_hat)`, rejected when too close to singular.
pub fn estimated_jacobian(
    state: &AgentState,
    meas: &Measurement,
    gains: &ControllerGains,
) -> Result<Matrix2<f64>> {
    let j_hat = jacobian_raw(&state.theta_hat, &meas.q);
    let det = j_hat.determinant();
    if !(det.abs() >= gains.det_floor) {
        return Err(Error::SingularEstimatedJacobian {
            det,
            q: meas.q,
            theta_hat: state.theta_hat,
        });
    }
    Ok(j_hat)
}

fn solve2(m: &Matrix2<f64>, v: &Vector2<f64>) -> Vector2<f64> {
    // Cramer's rule; the caller has already bounded |det| away from zero.
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Vector2::new(
        (m[(1, 1)] * v[0] - m[(0, 1)] * v[1]) / det,
        (m[(0, 0)] * v[1] - m[(1, 0)] * v[0]) / det,
    )
}

/// Task-space command `u` and joint reference velocity `qdot_r = J_hat^-1 u`.
pub fn reference_velocity(
    state: &AgentState,
    meas: &Measurement,
    neighbors: Neighbors,
    gains: &ControllerGains,
) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let j_hat = estimated_jacobian(state, meas, gains)?;
    let u = task_command(state, neighbors, gains);
    Ok((solve2(&j_hat, &u), u))
}

fn task_command(state: &AgentState, neighbors: Neighbors, gains: &ControllerGains) -> Vector2<f64> {
    -consensus_error(&state.x_o, neighbors) - state.i_s * gains.alpha
}

/// Observer rate. Depends on the measured position but never on the joint
/// velocity.
pub fn observer_rhs(
    state: &AgentState,
    meas: &Measurement,
    neighbors: Neighbors,
    gains: &ControllerGains,
) -> Vector2<f64> {
    task_command(state, neighbors, gains)
        - (state.x_o - meas.x) * gains.beta
        - state.i_x * gains.lambda
}

/// Kinematic adaptation with componentwise box projection.
pub fn adaptation_kinematics(
    state: &AgentState,
    meas: &Measurement,
    qdot_r: &Vector2<f64>,
    gains: &ControllerGains,
) -> Vector2<f64> {
    let dx_o = state.x_o - meas.x;
    let raw = -gains.lambda_kin * kinematic_regressor(&meas.q, qdot_r).transpose() * dx_o;
    project_rate(&state.theta_hat, raw, gains)
}

fn project_rate(theta_hat: &Vector2<f64>, mut rate: Vector2<f64>, gains: &ControllerGains) -> Vector2<f64> {
    for k in 0..2 {
        let outward = (theta_hat[k] >= gains.theta_hi[k] && rate[k] > 0.0)
            || (theta_hat[k] <= gains.theta_lo[k] && rate[k] < 0.0);
        if outward {
            rate[k] = 0.0;
        }
    }
    rate
}

/// Every kinematic-loop signal of one agent at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicLoop {
    pub u: Vector2<f64>,
    pub j_hat: Matrix2<f64>,
    pub qdot_r: Vector2<f64>,
    pub xdot_o: Vector2<f64>,
    pub s_star: Vector2<f64>,
    pub theta_hat_rate: Vector2<f64>,
}

pub fn kinematic_loop(
    state: &AgentState,
    meas: &Measurement,
    neighbors: Neighbors,
    gains: &ControllerGains,
) -> Result<KinematicLoop> {
    let j_hat = estimated_jacobian(state, meas, gains)?;
    let u = task_command(state, neighbors, gains);
    let qdot_r = solve2(&j_hat, &u);
    Ok(KinematicLoop {
        u,
        j_hat,
        qdot_r,
        xdot_o: observer_rhs(state, meas, neighbors, gains),
        s_star: s_star(state, meas, gains),
        theta_hat_rate: adaptation_kinematics(state, meas, &qdot_r, gains),
    })
}

/// Analytic time derivative of the reference velocity given an evaluated
/// kinematic loop. Neighbor rates come from the delayed samples.
pub fn reference_acceleration_from(
    lp: &KinematicLoop,
    state: &AgentState,
    meas: &Measurement,
    neighbors: Neighbors,
    gains: &ControllerGains,
) -> Vector2<f64> {
    let u_dot = -consensus_error_rate(&lp.xdot_o, neighbors) - lp.s_star * gains.alpha;
    let j_hat_dot = jacobian_rate(&state.theta_hat, &lp.theta_hat_rate, &meas.q, &meas.qdot);
    solve2(&lp.j_hat, &(u_dot - j_hat_dot * lp.qdot_r))
}

pub fn reference_acceleration(
    state: &AgentState,
    meas: &Measurement,
    neighbors: Neighbors,
    gains: &ControllerGains,
) -> Result<Vector2<f64>> {
    let lp = kinematic_loop(state, meas, neighbors, gains)?;
    Ok(reference_acceleration_from(&lp, state, meas, neighbors, gains))
}

/// Adaptive torque `-K s + Y(q, qdot, qdot_r, qddot_r) vartheta_hat`.
pub fn torque_dynamic(
    state: &AgentState,
    meas: &Measurement,
    qdot_r: &Vector2<f64>,
    qddot_r: &Vector2<f64>,
    gains: &ControllerGains,
) -> Vector2<f64> {
    let s = meas.qdot - qdot_r;
    -gains.k * s + dynamic_regressor(&meas.q, &meas.qdot, qdot_r, qddot_r) * state.vartheta_hat
}

pub fn adaptation_dynamics(
    meas: &Measurement,
    qdot_r: &Vector2<f64>,
    qddot_r: &Vector2<f64>,
    gains: &ControllerGains,
) -> Vector3<f64> {
    let s = meas.qdot - qdot_r;
    -gains.gamma * dynamic_regressor(&meas.q, &meas.qdot, qdot_r, qddot_r).transpose() * s
}

/// Gains of the joint-velocity servo of a velocity-commanded arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiServoGains {
    pub kp: Matrix2<f64>,
    pub ki: Matrix2<f64>,
}

impl Default for PiServoGains {
    fn default() -> Self {
        Self {
            kp: Matrix2::identity() * 60.0,
            ki: Matrix2::identity() * 10.0,
        }
    }
}

pub fn torque_pi_servo(
    state: &AgentState,
    meas: &Measurement,
    qdot_r: &Vector2<f64>,
    servo: &PiServoGains,
) -> Vector2<f64> {
    servo.kp * (qdot_r - meas.qdot) + servo.ki * state.i_v
}

/// Task-space spring-damper applied by an operator from `t_on` onwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpacePd {
    pub t_on: f64,
    pub kd: f64,
    pub kp: f64,
    pub x_h: Vector2<f64>,
}

impl Default for TaskSpacePd {
    fn default() -> Self {
        Self {
            t_on: 10.0,
            kd: 15.0,
            kp: 30.0,
            x_h: Vector2::new(2.6, 0.9),
        }
    }
}

pub fn external_stimulus_pd(
    t: f64,
    q: &Vector2<f64>,
    qdot: &Vector2<f64>,
    theta: &KinematicParams,
    stim: &TaskSpacePd,
) -> Vector2<f64> {
    if t < stim.t_on {
        return Vector2::zeros();
    }
    let j = robot::jacobian(theta, q);
    let x = robot::forward_kinematics(theta, q);
    let xdot = j * qdot;
    j.transpose() * (-xdot * stim.kd - (x - stim.x_h) * stim.kp)
}

/// Master/slave PD coupling; `tau_h` acts on the first arm only.
pub fn teleop_pd_torques(
    q1: &Vector2<f64>,
    qdot1: &Vector2<f64>,
    q2: &Vector2<f64>,
    qdot2: &Vector2<f64>,
    kd: &Matrix2<f64>,
    kp: &Matrix2<f64>,
    tau_h: &Vector2<f64>,
) -> (Vector2<f64>, Vector2<f64>) {
    let coupling = kp * (q1 - q2);
    (-kd * qdot1 - coupling + tau_h, -kd * qdot2 + coupling)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lyapunov {
    /// `1/2 s^T M s + 1/2 dvartheta^T Gamma^-1 dvartheta`.
    pub v: f64,
    /// Quasi-Lyapunov function of the kinematic loop, offset by `l_m / (2 beta)`.
    pub v_star: f64,
}

/// Lyapunov diagnostics from the true parameters. `l_m` bounds the coupling
/// integral; passing zero yields the function up to an additive constant.
pub fn lyapunov_diagnostics(
    state: &AgentState,
    robot: &Robot,
    gains: &ControllerGains,
    qdot_r: &Vector2<f64>,
    l_m: f64,
) -> Lyapunov {
    let s = state.qdot - qdot_r;
    let m = robot::inertia(&robot.dynamics, &state.q);
    let d_vartheta = state.vartheta_hat - robot.dynamics.as_vector();
    let gamma_inv = gains.gamma.try_inverse().unwrap_or_else(Matrix3::zeros);
    let v = 0.5 * s.dot(&(m * s)) + 0.5 * d_vartheta.dot(&(gamma_inv * d_vartheta));

    let dx_o = state.x_o - robot::forward_kinematics(&robot.kinematics, &state.q);
    let d_theta = state.theta_hat - robot.kinematics.as_vector();
    let lambda_inv = gains.lambda_kin.try_inverse().unwrap_or_else(Matrix2::zeros);
    let v_star = 0.5 * dx_o.norm_squared()
        + 0.5 * gains.lambda * state.i_x.norm_squared()
        + (l_m - state.coupling) / (2.0 * gains.beta)
        + 0.5 * d_theta.dot(&(lambda_inv * d_theta));
    Lyapunov { v, v_star }
}

/// Integrand `s^T J^T J s` of the coupling term, with the true Jacobian.
pub fn coupling_rate(state: &AgentState, robot: &Robot, qdot_r: &Vector2<f64>) -> f64 {
    let js = robot::jacobian(&robot.kinematics, &state.q) * (state.qdot - qdot_r);
    js.norm_squared()
}
