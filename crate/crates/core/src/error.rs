use thiserror::Error;

/// Errors raised by the verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the {domain} domain")]
    DomainViolation { domain: &'static str, point: Vec<f64> },

    #[error("cost is not finite at x = {x:?}, y = {y:?}")]
    SingularCost { x: Vec<f64>, y: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown cost `{0}`")]
    UnknownCost(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("newton inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("target covector lies outside the image domain (stagnated residual {residual:e})")]
    OutsideImage { residual: f64 },

    #[error("mixed hessian is singular at the current iterate")]
    SingularHessian,

    #[error("cone axis has vanishing norm {0:e}")]
    ZeroAxis(f64),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("unsupported grid resolution {0} (minimum 16)")]
    UnsupportedResolution(usize),

    #[error("finite-difference stencil leaves the image domain")]
    StencilOutOfDomain,

    #[error("no probe survived the degeneracy filter")]
    EmptyProbeSet,

    #[error("lemma is vacuous: {0}")]
    VacuousLemma(String),

    #[error("infeasible lemma parameters: {0}")]
    InfeasibleParameters(String),
}

pub type Result<T> = std::result::Result<T, Error>;
