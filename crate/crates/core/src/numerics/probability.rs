//! Quadrant probabilities, total mass and marginals of the joint density.

use super::quad1d::integrate_1d;
use super::quad2d::{integrate_2d, Rect, Region};
use super::truncation::{line_truncation_radius, tail_mass_bound, truncation_radius};
use super::{Estimate, QuadratureConfig, TruncationPolicy};
use crate::analytic::JointDensity;
use crate::error::{Error, Result};
use crate::params::CovarianceStructure;

/// A probability with its integration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityResult {
    /// `raw_value` clamped to `[0, 1]`.
    pub value: f64,
    pub raw_value: f64,
    /// Quadrature error plus the truncated tail mass.
    pub error_estimate: f64,
    pub subdivisions_used: usize,
}

/// Half-width of the integration square and a bound on the mass beyond it.
fn resolve_radius(structure: &CovarianceStructure, n: u32, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    match cfg.truncation {
        TruncationPolicy::Auto(eps) => Ok((truncation_radius(structure, n, eps)?, eps)),
        TruncationPolicy::Fixed(r) => Ok((r, tail_mass_bound(structure, n, r)?)),
    }
}

fn with_tail(result: Result<Estimate>, tail: f64) -> Result<Estimate> {
    let add = |e: Estimate| Estimate { error: e.error + tail, ..e };
    match result {
        Ok(e) => Ok(add(e)),
        Err(Error::MaxSubdivisions { best }) => Err(Error::MaxSubdivisions { best: add(best) }),
        Err(e) => Err(e),
    }
}

/// `P(X > x0, Y > y0)` for the covariance pair at sample size `n`.
///
/// The origin is always declared singular: it is an infinite spike for
/// `n <= 2` and a cone point (continuous, not differentiable) above that.
pub fn quadrant_probability(
    structure: &CovarianceStructure,
    n: u32,
    x0: f64,
    y0: f64,
    cfg: &QuadratureConfig,
) -> Result<ProbabilityResult> {
    cfg.validate()?;
    if !(x0.is_finite() && y0.is_finite()) {
        return Err(Error::Domain("quadrant corner must be finite".into()));
    }
    let density = JointDensity::new(structure, n)?;
    let (radius, tail) = resolve_radius(structure, n, cfg)?;
    let rect = Rect { x0: x0.max(-radius), x1: radius, y0: y0.max(-radius), y1: radius };
    let estimate = with_tail(integrate_2d(|x, y| density.eval(x, y), Region::Rect(rect), &[(0.0, 0.0)], cfg), tail)?;
    Ok(ProbabilityResult {
        value: estimate.value.clamp(0.0, 1.0),
        raw_value: estimate.value,
        error_estimate: estimate.error,
        subdivisions_used: estimate.subdivisions,
    })
}

/// Total mass of the density over the plane; should be 1.
pub fn normalization(structure: &CovarianceStructure, n: u32, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    let density = JointDensity::new(structure, n)?;
    let (radius, tail) = resolve_radius(structure, n, cfg)?;
    let rect = Rect { x0: -radius, x1: radius, y0: -radius, y1: radius };
    with_tail(integrate_2d(|x, y| density.eval(x, y), Region::Rect(rect), &[(0.0, 0.0)], cfg), tail)
}

/// `int f(x, y) dy`, which should reproduce the closed-form marginal.
///
/// For `n = 1` at `x = 0` the line runs through the non-integrable spike and
/// the result is `f64::INFINITY`.
pub fn marginalize(structure: &CovarianceStructure, n: u32, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    if !x.is_finite() {
        return Err(Error::Domain("x must be finite".into()));
    }
    let density = JointDensity::new(structure, n)?;
    if n == 1 && x == 0.0 {
        return Ok(Estimate { value: f64::INFINITY, error: 0.0, subdivisions: 0 });
    }
    let (radius, tail) = match cfg.truncation {
        TruncationPolicy::Auto(eps) => (line_truncation_radius(structure, n, eps)?, eps),
        TruncationPolicy::Fixed(r) => (r, 0.0),
    };
    // the density peaks where the line passes nearest the origin
    with_tail(integrate_1d(|y| density.eval(x, y), -radius, radius, &[0.0, x, -x], cfg), tail)
}
