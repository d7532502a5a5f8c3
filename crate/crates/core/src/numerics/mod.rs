//! Quadrature, truncation, quadrant probabilities and numerical inversion of
//! the characteristic function.

mod inversion;
mod probability;
mod quad1d;
mod quad2d;
mod rules;
mod truncation;

pub use inversion::invert_cf;
pub use probability::{marginalize, normalization, quadrant_probability, ProbabilityResult};
pub use quad1d::{integrate_1d, integrate_1d_semi_infinite};
pub use quad2d::{integrate_2d, Rect, Region};
pub use truncation::{tail_mass_bound, truncation_radius};

use crate::error::{Error, Result};

/// An integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    /// Number of panel bisections performed.
    pub subdivisions: usize,
}

/// How far out an unbounded region is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationPolicy {
    /// Integrate over the centered square of this half-width.
    Fixed(f64),
    /// Choose the half-width so the density mass outside it is provably below
    /// this bound.
    Auto(f64),
}

/// Tolerances and limits shared by every integral in the crate.
///
/// Defaults: `abs_tol = 1e-9`, `rel_tol = 1e-8`, `max_subdivisions = 20000`,
/// `Auto(1e-10)` truncation and a singularity exclusion radius of `1e-3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub truncation: TruncationPolicy,
    /// Side of the square around each declared singular point that is
    /// integrated in collapsed polar (Duffy) coordinates. Zero means the whole
    /// cell touching the point is.
    pub singularity_exclusion_radius: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            max_subdivisions: 20_000,
            truncation: TruncationPolicy::Auto(1e-10),
            singularity_exclusion_radius: 1e-3,
        }
    }
}

impl QuadratureConfig {
    /// Defaults with the looser `Auto(1e-8)` truncation used for whole-plane
    /// normalization checks.
    pub fn for_normalization() -> Self {
        Self { truncation: TruncationPolicy::Auto(1e-8), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.abs_tol > 0.0) {
            return bad("abs_tol must be positive");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if self.max_subdivisions == 0 {
            return bad("max_subdivisions must be at least 1");
        }
        if !(self.singularity_exclusion_radius >= 0.0) {
            return bad("singularity_exclusion_radius must be non-negative");
        }
        match self.truncation {
            TruncationPolicy::Fixed(r) if !(r > 0.0 && r.is_finite()) => {
                bad("fixed truncation radius must be positive and finite")
            }
            TruncationPolicy::Auto(eps) if !(eps > 0.0 && eps < 1.0) => {
                bad("auto truncation epsilon must lie in (0, 1)")
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Compensated (Neumaier) sum.
pub(crate) fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
