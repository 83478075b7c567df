//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("charge support is not pairwise isotropic: <{a}, {b}> = {pairing}")]
    NonIsotropicSupport { a: String, b: String, pairing: String },

    #[error("pairing does not admit an integral Darboux basis")]
    NonUnimodularPairing,

    #[error("conflicting BPS indices for a charge and its negative: {0}")]
    ConflictingIndex(String),

    #[error("BPS support must lie in the span of the electric frame vectors; offending charge {0}")]
    SupportNotElectric(String),

    #[error("point outside the domain: {0}")]
    DomainViolation(String),

    #[error("Im(tau) must have signature (1, n); found ({pos}, {neg})")]
    WrongSignature { pos: usize, neg: usize },

    #[error("central charge vanishes on a support charge (support property violated)")]
    SupportPropertyViolation,

    #[error("instanton series did not converge within {n_max} terms")]
    SeriesDivergence { n_max: usize },

    #[error("compatibility tensor is degenerate: min singular value {sigma_min:.3e} <= {threshold:.3e}")]
    Incompatible { sigma_min: f64, threshold: f64 },

    #[error("matrix is numerically singular (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("point outside N': f = {f:.6e}, f1 = {f1:.6e}, g(X,X) = {gxx:.6e}")]
    OutsideNPrime { f: f64, f1: f64, gxx: f64 },

    #[error("slice requires Arg z^0 = 0; got {0:.3e}")]
    OffSlice(f64),

    #[error("finite-difference step underflow: {0:.3e}")]
    StepUnderflow(f64),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
