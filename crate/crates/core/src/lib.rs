//! Permutation-sum processes and their Gaussian approximations.
//!
//! Given an `n x n` score matrix, the centered partial-sum process over a
//! uniform random permutation is a step path on `[0,1]`. This crate builds
//! that path, the jointly Gaussian surrogate process with the identical
//! covariance structure, and the limit Gaussian processes reached as the
//! matrix family grows, together with the machinery needed to verify the
//! closed-form claims about them: exact enumeration over all permutations
//! at small `n`, seeded and mergeable Monte Carlo ensembles, smooth
//! ball-indicator test functionals, and the weak-exceedance / permutation
//! tableau application (boundary shape, area, and row-count laws).

pub mod error;
pub mod family;
pub mod functionals;
pub mod gaussian;
pub mod matrix;
pub mod mc;
pub mod path;
pub mod perm;
pub mod quad;
pub mod report;
pub mod sum;
pub mod tableaux;
pub mod verify;

pub use error::Error;
pub use matrix::{Normalization, NormalizationMode, ScoreMatrix, SigmaMatrix};
pub use path::StepPath;
pub use perm::Permutation;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
