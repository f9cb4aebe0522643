//! Prime-field Shamir sharing with the two homomorphisms the tally needs:
//! pointwise addition (degree preserved) and local squaring (degree doubled).
//!
//! A ballot `psi` is split into `n` evaluations of a random polynomial of
//! degree `t - 1` with `f(0) = psi`. Summing every worker's shares gives shares
//! of `sum psi`; summing their squares gives shares of `sum psi^2`, but on a
//! polynomial of degree `2(t - 1)`, so `2t - 1` workers are needed to open it.

mod field;
mod outliers;
mod sharing;

pub use field::{is_prime, FieldElement, PrimeField, MAX_MODULUS, MERSENNE_31};
pub use outliers::{detect_outliers, OutlierReport};
pub use sharing::{
    add_share_vectors, add_shares, reconstruct, share_secret, square_share, Polynomial, Share,
    SharingParams, SHARE_BYTES,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SharingError {
    #[error("invalid sharing parameters: {0}")]
    InvalidParams(String),
    #[error("duplicate evaluation point {0}")]
    DuplicateEvalPoint(u64),
    #[error("insufficient shares: need {needed}, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("misaligned shares: {0}")]
    Misaligned(String),
    #[error("cannot square a share of degree {degree}; only degree {limit} shares may be squared")]
    DegreeOverflow { degree: usize, limit: usize },
    #[error("outlier detection needs {needed} shares, got {shares}")]
    CannotDetect { shares: usize, needed: usize },
    #[error("no consensus: best polynomial is supported by {support} shares, {needed} required")]
    Ambiguous { support: usize, needed: usize },
    #[error("malformed share encoding: {0}")]
    Encoding(String),
}
