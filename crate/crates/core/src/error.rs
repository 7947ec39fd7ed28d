use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cost is not superlinear: exponent {0} must exceed 1")]
    NotSuperlinear(f64),

    #[error("cost is not convex: {0}")]
    NotConvex(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("singular linear system")]
    Singular,

    #[error(
        "newton iteration did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("penalty schedule exhausted: gradient excess {excess:.3e} exceeds slack {slack:.3e}")]
    ScheduleExhausted { excess: f64, slack: f64 },

    #[error("discount schedule exhausted: last |Δλ| = {last_change:.3e} exceeds {tolerance:.3e}")]
    DiscountNotConverged { last_change: f64, tolerance: f64 },

    #[error("no sign change of the pasting residual in (0, {0}]")]
    NoBracket(f64),

    #[error("shooting did not converge: {0}")]
    ShootingFailed(String),

    #[error("free boundary mask is empty")]
    EmptyFreeBoundary,

    #[error(
        "test function violates the gradient constraint: max |Dφ| = {max_gradient:.6} > {limit:.6}"
    )]
    GradientConstraint { max_gradient: f64, limit: f64 },

    #[error("bound is inconclusive: extremum attained on the boundary ring at node {0}")]
    BoundaryExtremum(usize),

    #[error("test function violates the far-field growth condition: min radial slope {slope:.6} < {limit:.6}")]
    FarField { slope: f64, limit: f64 },

    #[error("non-finite sample on path {path} at step {step}")]
    NonFiniteSample { path: usize, step: usize },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
