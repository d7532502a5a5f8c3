//! Exact joint law of the two sample covariances `(sum A_j C_j, sum B_j C_j)`
//! of `n` iid draws from a trivariate normal with unit variances, with a
//! numerical engine (quadrature, characteristic-function inversion, Monte
//! Carlo) for checking it.

// Rule and series constants are kept at the precision they were published
// with; negated comparisons are how NaN inputs get rejected.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod error;
pub mod inference;
mod linalg;
pub mod numerics;
pub mod params;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
pub use params::{derive_constants, ConstraintBound, CovarianceStructure, DerivedConstants};
