use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {x} is outside the substrate domain [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("degenerate Bezier parametrization at x = {x}: dx/dl = {dxdl}")]
    DegenerateParametrization { x: f64, dxdl: f64 },

    #[error("invalid Bezier chain: {0}")]
    InvalidChain(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("infeasible initial data: u = {value} at x = {x}")]
    InfeasibleInitial { x: f64, value: f64 },

    #[error("droplet collapsed at t = {time}: a = {a}, b = {b}")]
    Collapse { time: f64, a: f64, b: f64 },

    #[error("volume constraint is singular (response integral {0})")]
    SingularConstraint(f64),

    #[error("non-finite values at step {step}")]
    BlowUp { step: usize },

    #[error("projection bracket failed: {0}")]
    BracketFailure(String),

    #[error("implicit solve did not converge (residual {residual:e})")]
    ImplicitSolve { residual: f64 },

    #[error("resolvent iteration did not converge (change {change:e})")]
    Resolvent { change: f64 },

    #[error("droplets {left} and {right} overlap: b = {b}, a = {a}")]
    Ordering {
        left: usize,
        right: usize,
        b: f64,
        a: f64,
    },

    #[error("stability bound violated: {0}")]
    StabilityViolation(String),

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::OutOfRange { .. }
                | Error::InvalidChain(_)
                | Error::InvalidParams(_)
                | Error::InfeasibleInitial { .. }
                | Error::Schema(_)
                | Error::Json(_)
        )
    }
}
