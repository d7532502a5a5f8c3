//! Covariance structure of the trivariate normal `(A, B, C)` and the derived
//! constants that every density and characteristic function is written in.
//!
//! The covariance matrix has unit diagonal, `Cov(A, B) = sigma` and
//! `Cov(A, C) = Cov(B, C) = rho`:
//!
//! ```text
//!     | 1      sigma  rho |
//!     | sigma  1      rho |
//!     | rho    rho    1   |
//! ```
//!
//! It is positive definite exactly when `1 - sigma^2 > 0` and
//! `1 - 2 rho^2 + sigma > 0`.

use std::fmt;

use crate::error::{Error, Result};

/// Which admissibility inequality a parameter pair failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintBound {
    /// `1 - sigma^2 > 0`
    SigmaBound,
    /// `1 - 2 rho^2 + sigma > 0`
    XiBound,
}

impl fmt::Display for ConstraintBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintBound::SigmaBound => f.write_str("1 - sigma^2 > 0"),
            ConstraintBound::XiBound => f.write_str("1 - 2*rho^2 + sigma > 0"),
        }
    }
}

/// A validated `(rho, sigma)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceStructure {
    rho: f64,
    sigma: f64,
}

impl CovarianceStructure {
    /// Validates the pair against the strict admissibility inequalities.
    ///
    /// No epsilon margin is applied: a pair on the boundary is rejected, a
    /// pair one ulp inside is accepted.
    pub fn new(rho: f64, sigma: f64) -> Result<Self> {
        if !rho.is_finite() || !sigma.is_finite() {
            return Err(Error::Domain(format!("covariance parameters must be finite (rho = {rho}, sigma = {sigma})")));
        }
        if !(1.0 - sigma * sigma > 0.0) {
            return Err(Error::ConstraintViolation { which: ConstraintBound::SigmaBound, rho, sigma });
        }
        if !(1.0 - 2.0 * rho * rho + sigma > 0.0) {
            return Err(Error::ConstraintViolation { which: ConstraintBound::XiBound, rho, sigma });
        }
        Ok(Self { rho, sigma })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The 3x3 covariance matrix of `(A, B, C)`, row major.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (r, s) = (self.rho, self.sigma);
        [[1.0, s, r], [s, 1.0, r], [r, r, 1.0]]
    }

    pub fn constants(&self) -> DerivedConstants {
        derive_constants(self)
    }
}

/// Reparameterization of `(rho, sigma)` that diagonalizes the quadratic form
/// `a x^2 - 2 b x y + a y^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `1 - 2 rho^2 + sigma`
    pub xi: f64,
    /// `(1 + sigma) / (1 - sigma)`
    pub eta: f64,
    /// `1 / sqrt(1 - sigma)`
    pub lambda: f64,
    /// `1 / sqrt(xi)`
    pub kappa: f64,
    /// `2 rho / xi`
    pub delta: f64,
    /// `sqrt(2 eta) / xi`
    pub alpha: f64,
    /// `1 - rho^2`
    pub a: f64,
    /// `sigma - rho^2`
    pub b: f64,
}

impl DerivedConstants {
    /// Coefficient `alpha / (2 lambda kappa)` multiplying `sqrt(Q)` in the
    /// Bessel argument of the densities.
    pub fn radial_rate(&self) -> f64 {
        self.alpha / (2.0 * self.lambda * self.kappa)
    }
}

pub fn derive_constants(s: &CovarianceStructure) -> DerivedConstants {
    let (rho, sigma) = (s.rho, s.sigma);
    let xi = 1.0 - 2.0 * rho * rho + sigma;
    let eta = (1.0 + sigma) / (1.0 - sigma);
    DerivedConstants {
        xi,
        eta,
        lambda: 1.0 / (1.0 - sigma).sqrt(),
        kappa: 1.0 / xi.sqrt(),
        delta: 2.0 * rho / xi,
        alpha: (2.0 * eta).sqrt() / xi,
        a: 1.0 - rho * rho,
        b: sigma - rho * rho,
    }
}
