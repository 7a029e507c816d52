use thiserror::Error;

use crate::scalar::{Rational, ScalarError};

/// Engine failures. Messages name the rule whose side condition failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("free dimension is undefined on {0} (defined only on class F, free products and direct sums thereof)")]
    UndefinedFdim(String),

    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    #[error("not a factor: {0} (rescaling M_t is defined for factors only)")]
    NotAFactor(String),

    #[error("M_{n} cannot be compressed to scale t² = {sq}: t must be k/{n} for a positive integer k")]
    UnrealizableScale { n: u64, sq: Rational },

    #[error("free trade {context} needs r' ≥ 0 in (N*L(F_r')) ⋆ [s, Q_(s/t)], r' = r + t² − s²; r' = {r_prime}, deficit {deficit}")]
    PreconditionViolated { context: String, r_prime: Rational, deficit: Rational },

    #[error("L(F_∞)-absorption not licensed: {0}")]
    NotLicensed(String),

    #[error("ill-formed expression: {0}")]
    IllFormed(String),

    #[error("unknown letter {0}")]
    UnknownLetter(String),

    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),

    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

pub type Result<T> = std::result::Result<T, EngineError>;
