use thiserror::Error;

/// Errors produced across the crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not {kind} (max deviation {deviation:.3e})")]
    NotStructured { kind: &'static str, deviation: f64 },

    #[error("eigen-solver did not converge after {sweeps} sweeps (off-diagonal residual {residual:.3e})")]
    EigenNonConvergence { sweeps: usize, residual: f64 },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:.3e})")]
    PositiveDefinitenessViolation { eigenvalue: f64 },

    #[error("integrator exceeded its step budget of {max_steps} at t = {t}")]
    StepBudgetExceeded { max_steps: usize, t: f64 },

    #[error("non-finite value in the vector field; last valid time t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("constraint projection failed to converge (residual {residual:.3e})")]
    ProjectionFailure { residual: f64 },

    #[error("samples are not time-ordered at index {index}")]
    InvalidSampling { index: usize },

    #[error("singular inertia operator (j_i + j_j = {sum:.3e})")]
    SingularInertia { sum: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix is not in SL(2, Z) (determinant {det})")]
    NotUnimodular { det: i64 },

    #[error("automorphism is not hyperbolic (trace {trace})")]
    NotHyperbolic { trace: i64 },

    #[error("unsupported multiplication degree {0} (supported range 2..=6)")]
    UnsupportedDegree(u32),

    #[error("coefficient size {bits} bits exceeds the budget of {budget} bits")]
    BudgetExceeded { bits: u64, budget: u64 },

    #[error("the curve y^2 = x^3 + c is singular for c = 0")]
    SingularCurve,

    #[error("point is not on the curve")]
    NotOnCurve,

    #[error("degenerate point: |Bx| vanishes")]
    DegeneratePoint,

    #[error("Knörrer transform undefined: Joachimsthal integral vanishes")]
    KnoerrerUndefined,

    #[error("no valid chart at the current point")]
    ChartSwitch,

    #[error("degenerate projective chart point (denominator {denominator:.3e})")]
    DegenerateChartPoint { denominator: f64 },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("failed to parse rational {0:?}")]
    ParseRational(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
