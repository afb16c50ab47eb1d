use nalgebra::Vector2;
use thiserror::Error;

/// A single failed configuration or parameter check.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("graph has no directed spanning tree (null space of the Laplacian transpose has dimension {nullity})")]
    NoSpanningTree { nullity: usize },

    #[error("estimated Jacobian is singular: |det| = {det:e} at q = [{}, {}], theta_hat = [{}, {}]", q[0], q[1], theta_hat[0], theta_hat[1])]
    SingularEstimatedJacobian {
        det: f64,
        q: Vector2<f64>,
        theta_hat: Vector2<f64>,
    },

    #[error("numerical blowup in `{signal}` (value {value:e})")]
    NumericalBlowup { signal: &'static str, value: f64 },

    #[error("non-monotone push: t = {got} is not after last stored t = {last}")]
    NonMonotoneTime { last: f64, got: f64 },

    #[error("invalid scenario:\n{}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("run failed at t = {t:.4} s (agent {agent}): {source}")]
    RunFailed {
        t: f64,
        agent: usize,
        #[source]
        source: Box<Error>,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
