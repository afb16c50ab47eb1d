//! Planar two-link arm moving in a horizontal plane.
//!
//! Kinematic parameters are the link lengths `[l1, l2]`; dynamic parameters
//! are the lumped inertias `[a1, a2, a3]` of the standard parameterization
//! `M = [[a1 + 2 a2 c2, a3 + a2 c2], [a3 + a2 c2, a3]]`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Number of `q2` samples over one revolution used to certify uniform
/// positive definiteness of the inertia matrix.
pub const INERTIA_GRID_POINTS: usize = 361;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicParams(Vector2<f64>);

impl KinematicParams {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if !(l1.is_finite() && l1 > 0.0 && l2.is_finite() && l2 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("link lengths must be positive, got [{l1}, {l2}]"),
            });
        }
        Ok(Self(Vector2::new(l1, l2)))
    }

    pub fn from_vector(v: Vector2<f64>) -> Result<Self> {
        Self::new(v[0], v[1])
    }

    pub fn as_vector(&self) -> &Vector2<f64> {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicParams(Vector3<f64>);

impl DynamicParams {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let p = Self(Vector3::new(a1, a2, a3));
        if !p.0.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "vartheta",
                reason: "entries must be finite".into(),
            });
        }
        if let Some(q2) = p.first_indefinite_q2() {
            return Err(Error::InvalidParameter {
                name: "vartheta",
                reason: format!("inertia matrix is not positive definite at q2 = {q2:.4} rad"),
            });
        }
        Ok(p)
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    /// First grid angle at which `M(q2)` fails to be positive definite.
    fn first_indefinite_q2(&self) -> Option<f64> {
        let [a1, a2, a3] = [self.0[0], self.0[1], self.0[2]];
        (0..INERTIA_GRID_POINTS)
            .map(|k| -PI + 2.0 * PI * k as f64 / (INERTIA_GRID_POINTS - 1) as f64)
            .find(|q2| {
                let c = q2.cos();
                !(a3 > 0.0 && a3 * (a1 + 2.0 * a2 * c) - (a3 + a2 * c).powi(2) > 0.0)
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
}

/// True parameters of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Robot {
    pub kinematics: KinematicParams,
    pub dynamics: DynamicParams,
}

struct Trig {
    s1: f64,
    c1: f64,
    s12: f64,
    c12: f64,
}

impl Trig {
    fn new(q: &Vector2<f64>) -> Self {
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        Self { s1, c1, s12, c12 }
    }
}

pub fn forward_kinematics(theta: &KinematicParams, q: &Vector2<f64>) -> Vector2<f64> {
    forward_kinematics_raw(&theta.0, q)
}

pub(crate) fn forward_kinematics_raw(theta: &Vector2<f64>, q: &Vector2<f64>) -> Vector2<f64> {
    let t = Trig::new(q);
    let (l1, l2) = (theta[0], theta[1]);
    Vector2::new(l1 * t.c1 + l2 * t.c12, l1 * t.s1 + l2 * t.s12)
}

pub fn jacobian(theta: &KinematicParams, q: &Vector2<f64>) -> Matrix2<f64> {
    jacobian_raw(&theta.0, q)
}

/// Jacobian for an arbitrary (possibly estimated) link-length vector.
pub fn jacobian_raw(theta: &Vector2<f64>, q: &Vector2<f64>) -> Matrix2<f64> {
    let t = Trig::new(q);
    let (l1, l2) = (theta[0], theta[1]);
    Matrix2::new(
        -l1 * t.s1 - l2 * t.s12,
        -l2 * t.s12,
        l1 * t.c1 + l2 * t.c12,
        l2 * t.c12,
    )
}

/// Time derivative of `J(q; theta)` when both the joints and the link-length
/// vector move.
pub fn jacobian_rate(
    theta: &Vector2<f64>,
    theta_rate: &Vector2<f64>,
    q: &Vector2<f64>,
    qdot: &Vector2<f64>,
) -> Matrix2<f64> {
    let t = Trig::new(q);
    let (l1, l2) = (theta[0], theta[1]);
    let (dl1, dl2) = (theta_rate[0], theta_rate[1]);
    let w1 = qdot[0];
    let w12 = qdot[0] + qdot[1];
    let j01 = -dl2 * t.s12 - l2 * t.c12 * w12;
    let j11 = dl2 * t.c12 - l2 * t.s12 * w12;
    Matrix2::new(
        -dl1 * t.s1 - l1 * t.c1 * w1 + j01,
        j01,
        dl1 * t.c1 - l1 * t.s1 * w1 + j11,
        j11,
    )
}

/// `Z(q, xi)` with `Z(q, xi) * theta == J(q; theta) * xi`.
pub fn kinematic_regressor(q: &Vector2<f64>, xi: &Vector2<f64>) -> Matrix2<f64> {
    let t = Trig::new(q);
    let xi12 = xi[0] + xi[1];
    Matrix2::new(-t.s1 * xi[0], -t.s12 * xi12, t.c1 * xi[0], t.c12 * xi12)
}

pub fn inertia(vartheta: &DynamicParams, q: &Vector2<f64>) -> Matrix2<f64> {
    let [a1, a2, a3] = [vartheta.0[0], vartheta.0[1], vartheta.0[2]];
    let c2 = q[1].cos();
    let off = a3 + a2 * c2;
    Matrix2::new(a1 + 2.0 * a2 * c2, off, off, a3)
}

/// Coriolis/centrifugal matrix chosen so that `dM/dt - 2C` is skew-symmetric.
pub fn coriolis(vartheta: &DynamicParams, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
    let h = vartheta.0[1] * q[1].sin();
    Matrix2::new(-h * qdot[1], -h * (qdot[0] + qdot[1]), h * qdot[0], 0.0)
}

/// Gravity torque; identically zero because the arm moves in a horizontal plane.
pub fn gravity(_vartheta: &DynamicParams, _q: &Vector2<f64>) -> Vector2<f64> {
    Vector2::zeros()
}

/// `Y` with `Y * vartheta == M zeta_dot + C zeta + g`.
pub fn dynamic_regressor(
    q: &Vector2<f64>,
    qdot: &Vector2<f64>,
    zeta: &Vector2<f64>,
    zeta_dot: &Vector2<f64>,
) -> Matrix2x3<f64> {
    let (s2, c2) = q[1].sin_cos();
    let (z1, z2) = (zeta[0], zeta[1]);
    let (dz1, dz2) = (zeta_dot[0], zeta_dot[1]);
    Matrix2x3::new(
        dz1,
        2.0 * c2 * dz1 + c2 * dz2 - s2 * qdot[1] * z1 - s2 * (qdot[0] + qdot[1]) * z2,
        dz2,
        0.0,
        c2 * dz1 + s2 * qdot[0] * z1,
        dz1 + dz2,
    )
}

/// Elbow-up (`q2 > 0`) inverse kinematics. Returns `None` outside the
/// workspace annulus.
pub fn inverse_kinematics(theta: &KinematicParams, x: &Vector2<f64>) -> Option<Vector2<f64>> {
    let (l1, l2) = (theta.0[0], theta.0[1]);
    let r2 = x.norm_squared();
    let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return None;
    }
    let q2 = c2.acos();
    let q1 = x[1].atan2(x[0]) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    Some(Vector2::new(q1, q2))
}

impl Robot {
    /// Joint acceleration under applied torque.
    pub fn forward_dynamics(&self, state: &RobotState, torque: &Vector2<f64>) -> Vector2<f64> {
        let m = inertia(&self.dynamics, &state.q);
        let c = coriolis(&self.dynamics, &state.q, &state.qdot);
        let g = gravity(&self.dynamics, &state.q);
        let rhs = torque - c * state.qdot - g;
        m.cholesky()
            .map(|ch| ch.solve(&rhs))
            .unwrap_or_else(|| Vector2::repeat(f64::NAN))
    }
}
