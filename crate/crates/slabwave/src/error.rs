//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid slab: {0}")]
    InvalidSlab(String),
    #[error("velocity |beta| = {0} is not below c")]
    Superluminal(f64),
    #[error("singular material matrix: |1 - n^2 beta^2| = {gap:.3e} at beta = {beta}")]
    SingularMaterial { beta: f64, gap: f64 },
    #[error("no guided mode for branch {branch} at k = {k}")]
    NoMode { branch: usize, k: f64 },
    #[error("no index contrast (n = 1): slab cannot guide")]
    NoContrast,
    #[error("field sampling grid too coarse: estimated relative error {0:.3e}")]
    GridTooCoarse(f64),
    #[error("finite-difference derivative unstable: Richardson estimates differ by {0:.3e} relative")]
    DerivativeUnstable(f64),
    #[error("phase matching failed: {0}")]
    NoMatch(String),
    #[error("coupling not perturbative: exp(-gamma0 d) = {0:.3e}")]
    NotPerturbative(f64),
    #[error("degenerate coupling: |Omega1 Omega2| = {0:.3e} below resolution")]
    DegenerateCoupling(f64),
    #[error("operator not diagonalizable: eigenvector condition number {0:.3e}")]
    NonDiagonalizable(f64),
    #[error("degenerate Krein Gram matrix: smallest singular value {0:.3e}")]
    DegenerateGram(f64),
    #[error("incomplete basis: reconstruction residual {0:.3e}")]
    IncompleteBasis(f64),
    #[error("truncation leak: interior commutator residual {0:.3e}")]
    TruncationLeak(f64),
    #[error("tail overflow: {0}")]
    TailOverflow(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
