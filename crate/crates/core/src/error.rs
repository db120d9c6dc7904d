use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("{n_sites} sites exceed the dimension cap {cap}")]
    DimensionCap { n_sites: usize, cap: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("operator is not Hermitian")]
    NotHermitian,

    #[error("function is undefined at eigenvalue {0}")]
    FunctionUndefined(f64),

    #[error("observables {first} and {second} do not commute (commutator norm {norm:e})")]
    NonCommuting {
        first: usize,
        second: usize,
        norm: f64,
    },

    #[error("projection has rank 0")]
    EmptyProjection,

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("unknown observable index {0}")]
    UnknownIndex(usize),

    #[error("lambda solver did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("lambda diverged (|lambda| = {norm:e}); target is on or outside the achievable mean set")]
    Divergence { norm: f64, best: Vec<f64> },

    #[error("Kraus operators are not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
