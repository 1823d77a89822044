use thiserror::Error;

use crate::sequence::MultiIndex;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid size {given} aliases the support; use a power of two >= {required}")]
    Aliasing { given: usize, required: usize },

    #[error("symbol is not certified invertible (A_certified = {a_certified:e})")]
    NotInvertible { a_certified: f64 },

    #[error(
        "grid size {grid} too small: inverse changed by {change:e} under doubling, retry with N >= {suggested}"
    )]
    GridTooSmall {
        grid: usize,
        change: f64,
        suggested: usize,
    },

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("missing momentum bound for multi-index {0}")]
    MissingMomentum(MultiIndex),

    #[error("constant {constant} diverges for alpha = {alpha}")]
    Divergent { constant: &'static str, alpha: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNoConvergence(String),

    #[error("translates are not a Riesz sequence (A_gram = {a_gram:e})")]
    NotRieszBasis { a_gram: f64 },

    #[error("sampling set is not dense: stretch ({left}, {right}) of length {gap} reaches the limit {limit}")]
    NotDense {
        left: f64,
        right: f64,
        gap: f64,
        limit: f64,
    },

    #[error("sampling points are not strictly increasing at index {index}")]
    Unsorted { index: usize },

    #[error("point {x} lies outside the window [{lo}, {hi}]")]
    OutsideWindow { x: f64, lo: f64, hi: f64 },

    #[error("generator has no derivative available")]
    MissingDerivative,

    #[error("iteration is not contracting (observed ratio {ratio})")]
    NotContracting { ratio: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Aliasing { .. } => "Aliasing",
            Error::NotInvertible { .. } => "NotInvertible",
            Error::GridTooSmall { .. } => "GridTooSmall",
            Error::HypothesisFailed(_) => "HypothesisFailed",
            Error::MissingMomentum(_) => "MissingMomentum",
            Error::Divergent { .. } => "Divergent",
            Error::Infeasible(_) => "Infeasible",
            Error::QuadratureNoConvergence(_) => "QuadratureNoConvergence",
            Error::NotRieszBasis { .. } => "NotRieszBasis",
            Error::NotDense { .. } => "NotDense",
            Error::Unsorted { .. } => "Unsorted",
            Error::OutsideWindow { .. } => "OutsideWindow",
            Error::MissingDerivative => "MissingDerivative",
            Error::NotContracting { .. } => "NotContracting",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
