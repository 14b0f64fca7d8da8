use std::fmt;

/// The two parameter inequalities that make the switching time and the
/// nonlinear phase well defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExistenceCondition {
    /// `C < σ² M T`
    A,
    /// `C M < π / 8`
    B,
}

impl fmt::Display for ExistenceCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExistenceCondition::A => write!(f, "A (C < sigma^2*M*T)"),
            ExistenceCondition::B => write!(f, "B (C*M < pi/8)"),
        }
    }
}

/// Last finite state of a time integration that produced a non-finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct NonFiniteFailure {
    /// Index of the macro step that failed (0-based).
    pub step: usize,
    /// Transformed time of the last finite state.
    pub tau: f64,
    /// Full nodal `u` at `tau` (boundary nodes included).
    pub u: Vec<f64>,
    /// Full nodal `v` at `tau`.
    pub v: Vec<f64>,
    /// `Δτ / Δx²` with the effective step sizes.
    pub dtau_dx2: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("existence condition {condition} violated: {lhs} >= {rhs}")]
    ExistenceViolation {
        condition: ExistenceCondition,
        lhs: f64,
        rhs: f64,
    },

    #[error("spot price must be positive, got {0}")]
    NonpositiveSpot(f64),

    #[error("switching profile requires tau* > 0 (C > 0 and M > 0)")]
    DegenerateSwitch,

    #[error("invalid mesh spacing dx = {dx} for radius {radius}")]
    InvalidSpacing { dx: f64, radius: f64 },

    #[error("local coordinate {0} outside the reference element [0, 1]")]
    OutOfRange(f64),

    #[error("element size must be positive, got {0}")]
    InvalidSize(f64),

    #[error("mass matrix is singular")]
    SingularMass,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear solve failed at row {row}: pivot {pivot:e} below tolerance (dtau/dx^2 = {dtau_dx2:?})")]
    LinearSolveFailure {
        row: usize,
        pivot: f64,
        dtau_dx2: Option<f64>,
    },

    #[error(
        "non-finite state at step {}, last finite tau = {} (dtau/dx^2 = {})",
        .0.step, .0.tau, .0.dtau_dx2
    )]
    NonFiniteState(Box<NonFiniteFailure>),

    #[error("spot {spot} outside the computational domain ({lo}, {hi})")]
    SpotOutOfDomain { spot: f64, lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
