use thiserror::Error;

/// Errors raised by channel validation, the rate formulas and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at {path}: expected length {expected}, found {found}")]
    DimensionMismatch {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("empty channel vector at {path}")]
    EmptyChannel { path: String },

    #[error("non-finite entry at {path}")]
    NonFinite { path: String },

    #[error("negative power at {path}: {value}")]
    NegativePower { path: String, value: f64 },

    #[error("invalid pseudovariance for user {user}: |ct| = {magnitude} exceeds c = {variance}")]
    InvalidPseudovariance {
        user: usize,
        magnitude: f64,
        variance: f64,
    },

    #[error("composite covariance is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("composite covariance is indefinite (smallest eigenvalue {min_eigenvalue:e})")]
    Indefinite { min_eigenvalue: f64 },

    #[error("direct channel of user {user} is zero")]
    ZeroDirectChannel { user: usize },

    #[error("receive filter of user {user} is zero")]
    ZeroFilter { user: usize },

    #[error("non-finite rate for user {user}")]
    NonFiniteRate { user: usize },

    #[error("invalid rate profile ({rho1}, {rho2})")]
    InvalidProfile { rho1: f64, rho2: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("no admissible power allocation at R = {rate}")]
    NoAdmissiblePowers { rate: f64 },

    #[error("cannot branch a singleton box")]
    DegenerateBox,

    #[error("box list exceeded {boxes} entries (best upper {upper}, best lower {lower})")]
    BoxLimit { boxes: usize, upper: f64, lower: f64 },

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("primal recovery failed: {0}")]
    Recovery(String),

    #[error("unknown preset scenario '{0}'")]
    UnknownPreset(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
