//! Provable bounds on the density mass outside a centered square.
//!
//! With `r = sqrt(Q)` the density is `C exp(delta p / 2) r^v K_v(c r)`.
//! Since `kappa |p| <= r`, the exponential factor is at most
//! `exp(|delta| r / (2 kappa))`, and `K_v` is dominated by the next
//! half-integer order, which has the closed form
//! `sqrt(pi/(2z)) e^{-z} sum_k (m+k)!/(k!(m-k)!) (2z)^{-k}`.
//! The net decay rate `beta = c - |delta|/(2 kappa)` is positive on the whole
//! parameter region. Outside the square of half-width `R`,
//! `r >= sqrt(2) min(kappa, lambda) R`, and the remaining radial integrals are
//! upper incomplete gamma functions.

use std::f64::consts::{PI, SQRT_2};

use crate::analytic::JointDensity;
use crate::error::{Error, Result};
use crate::params::CovarianceStructure;

/// `B(r) = sum_k coef_k r^{power_k} exp(-beta r)` dominates the density.
struct RadialMajorant {
    terms: Vec<(f64, f64)>,
    beta: f64,
    /// `r >= radius_scale * R` outside the square of half-width `R`.
    radius_scale: f64,
    /// `dx dy = r dr dphi / area_scale`
    area_scale: f64,
}

impl RadialMajorant {
    fn new(structure: &CovarianceStructure, n: u32) -> Result<Self> {
        let density = JointDensity::new(structure, n)?;
        let c = *density.constants();
        let rate = c.radial_rate();
        let beta = rate - c.delta.abs() / (2.0 * c.kappa);
        debug_assert!(beta > 0.0);
        let nu = density.order().nu();
        let m = density.order().magnitude().twice_nu() / 2;
        let base = density.log_norm().exp() * (PI / (2.0 * rate)).sqrt();
        let mut terms = Vec::new();
        for k in 0..=m {
            // (m+k)! / (k! (m-k)!)
            let mut coef = 1.0;
            for j in (m - k + 1)..=(m + k) {
                coef *= f64::from(j);
            }
            for j in 1..=k {
                coef /= f64::from(j);
            }
            coef *= (2.0 * rate).powi(-k);
            terms.push((base * coef, nu - 0.5 - f64::from(k)));
        }
        Ok(Self { terms, beta, radius_scale: SQRT_2 * c.kappa.min(c.lambda), area_scale: 2.0 * c.kappa * c.lambda })
    }

    /// Upper bound on `int_{r0}^inf r^extra B(r) dr`.
    fn radial_integral(&self, r0: f64, extra: f64) -> f64 {
        let x = self.beta * r0;
        self.terms
            .iter()
            .map(|&(coef, power)| {
                let s = power + extra + 1.0;
                coef * self.beta.powf(-s) * upper_gamma_bound(s, x)
            })
            .sum()
    }

    fn plane_tail(&self, radius: f64) -> f64 {
        2.0 * PI / self.area_scale * self.radial_integral(self.radius_scale * radius, 1.0)
    }

    /// Bound on `int_{|y| > R} f(x, y) dy`, uniform in `x`. Needs the
    /// majorant to be decreasing beyond the cut, otherwise infinite.
    fn line_tail(&self, radius: f64) -> f64 {
        let r0 = self.radius_scale * radius;
        let turning = self.terms.iter().map(|&(_, p)| p.max(0.0)).fold(0.0, f64::max) / self.beta;
        if r0 <= turning {
            return f64::INFINITY;
        }
        2.0 / self.radius_scale * self.radial_integral(r0, 0.0)
    }
}

/// `Gamma(s, x) <= x^{s-1} e^{-x} / (1 - max(s-1, 0)/x)`; infinite where the
/// bound does not apply.
fn upper_gamma_bound(s: f64, x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::INFINITY;
    }
    let excess = (s - 1.0).max(0.0);
    if x <= excess {
        return f64::INFINITY;
    }
    ((s - 1.0) * x.ln() - x).exp() / (1.0 - excess / x)
}

/// Upper bound on the density mass outside `[-R, R]^2`.
pub fn tail_mass_bound(structure: &CovarianceStructure, n: u32, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain("truncation radius must be positive".into()));
    }
    Ok(RadialMajorant::new(structure, n)?.plane_tail(radius).min(1.0))
}

/// Smallest half-width (to bisection accuracy) whose outside mass is
/// provably below `epsilon`.
pub fn truncation_radius(structure: &CovarianceStructure, n: u32, epsilon: f64) -> Result<f64> {
    let majorant = RadialMajorant::new(structure, n)?;
    solve_radius(|r| majorant.plane_tail(r), epsilon)
}

/// Half-width in `y` beyond which every vertical line carries less than
/// `epsilon` of density.
pub(crate) fn line_truncation_radius(structure: &CovarianceStructure, n: u32, epsilon: f64) -> Result<f64> {
    let majorant = RadialMajorant::new(structure, n)?;
    solve_radius(|r| majorant.line_tail(r), epsilon)
}

fn solve_radius<B: Fn(f64) -> f64>(bound: B, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("truncation epsilon {epsilon} must lie in (0, 1)")));
    }
    let mut hi = 1.0;
    while !(bound(hi) < epsilon) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain("no finite truncation radius found".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) < epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
