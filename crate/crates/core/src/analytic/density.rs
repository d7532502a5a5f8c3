//! Closed-form densities of `(sum A_j C_j, sum B_j C_j)`, their marginals
//! and the null density of the difference statistic.
//!
//! Integrable singularities (the origin for `n <= 2`, `x = 0` for one-sample
//! marginals) are reported as `f64::INFINITY` rather than as errors.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::params::{CovarianceStructure, DerivedConstants};
use crate::special::{k_scaled_unchecked, log_gamma, BesselOrder};

/// Evaluation point of the joint density for a given sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityQuery {
    pub structure: CovarianceStructure,
    pub n: u32,
    pub x: f64,
    pub y: f64,
}

impl DensityQuery {
    pub fn new(structure: CovarianceStructure, n: u32, x: f64, y: f64) -> Result<Self> {
        check_sample_size(n)?;
        Ok(Self { structure, n, x, y })
    }
}

pub(crate) fn check_sample_size(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("sample size n must be at least 1".into()));
    }
    Ok(())
}

/// The joint density for one `(structure, n)` pair with its normalizing
/// constant precomputed. Cheap to copy and `Sync`, so integrators can share it.
#[derive(Debug, Clone, Copy)]
pub struct JointDensity {
    n: u32,
    consts: DerivedConstants,
    order: BesselOrder,
    log_norm: f64,
    rate: f64,
}

impl JointDensity {
    pub fn new(structure: &CovarianceStructure, n: u32) -> Result<Self> {
        check_sample_size(n)?;
        let c = structure.constants();
        let half_n = f64::from(n) / 2.0;
        // (lambda kappa)^{n/2} / (Gamma(n/2) 2^{n/2} pi alpha^{(n-2)/2})
        let log_norm = half_n * (c.lambda * c.kappa).ln()
            - log_gamma(half_n)?
            - half_n * 2f64.ln()
            - PI.ln()
            - (half_n - 1.0) * c.alpha.ln();
        Ok(Self { n, consts: c, order: BesselOrder::from_twice(n as i32 - 2), log_norm, rate: c.radial_rate() })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    /// Log of the factor multiplying `exp(delta p / 2) Q^{v/2} K_v(c sqrt Q)`.
    pub(crate) fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub(crate) fn order(&self) -> BesselOrder {
        self.order
    }

    /// `kappa^2 (x+y)^2 + lambda^2 (x-y)^2`
    pub fn quadratic_form(&self, x: f64, y: f64) -> f64 {
        let (p, m) = (x + y, x - y);
        let c = &self.consts;
        c.kappa * c.kappa * p * p + c.lambda * c.lambda * m * m
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let q = self.quadratic_form(x, y);
        let nu = self.order.nu();
        if q == 0.0 {
            if self.n <= 2 {
                return f64::INFINITY;
            }
            // Q^{v/2} K_v(c sqrt Q) -> c^{-v} 2^{v-1} Gamma(v)
            let ln_limit = -nu * self.rate.ln() + (nu - 1.0) * 2f64.ln() + log_gamma(nu).unwrap_or(0.0);
            return (self.log_norm + ln_limit).exp();
        }
        let r = q.sqrt();
        let z = self.rate * r;
        let scaled = k_scaled_unchecked(self.order, z);
        let exponent = self.log_norm + 0.5 * self.consts.delta * (x + y) - z + nu * r.ln() + scaled.ln();
        exponent.exp()
    }
}

/// General-`n` density.
pub fn density_general(q: &DensityQuery) -> f64 {
    JointDensity::new(&q.structure, q.n).expect("DensityQuery carries n >= 1").eval(q.x, q.y)
}

/// `(1 - rho^2) x^2 - 2 (sigma - rho^2) x y + (1 - rho^2) y^2`
fn miller_form(c: &DerivedConstants, x: f64, y: f64) -> f64 {
    c.a * (x * x + y * y) - 2.0 * c.b * (x * y)
}

/// The single-observation density, written in `(rho, sigma, xi, eta)`.
pub fn density_n1(q: &DensityQuery) -> f64 {
    let s = &q.structure;
    let c = s.constants();
    let form = miller_form(&c, q.x, q.y);
    if form <= 0.0 {
        return f64::INFINITY;
    }
    let root = form.sqrt();
    let exponent = (s.rho() * (q.x + q.y) - c.eta.sqrt() * root) / c.xi;
    exponent.exp() / (2.0 * PI * root)
}

pub fn density_n2(q: &DensityQuery) -> f64 {
    let c = q.structure.constants();
    let r = radial(&c, q.x, q.y);
    if r == 0.0 {
        return f64::INFINITY;
    }
    let z = c.radial_rate() * r;
    let k0 = k_scaled_unchecked(BesselOrder::integer(0), z);
    c.lambda * c.kappa / (2.0 * PI) * (0.5 * c.delta * (q.x + q.y) - z).exp() * k0
}

/// `n = 3` in the `(lambda, kappa, alpha)` parameterization.
pub fn density_n3_reduced(q: &DensityQuery) -> f64 {
    let c = q.structure.constants();
    let r = radial(&c, q.x, q.y);
    let norm = c.lambda * c.lambda * c.kappa * c.kappa / (SQRT_2 * PI * c.alpha);
    norm * (0.5 * c.delta * (q.x + q.y) - c.radial_rate() * r).exp()
}

/// `n = 3` in the `(rho, sigma)` parameterization; the canonical form.
pub fn density_n3(q: &DensityQuery) -> f64 {
    let s = &q.structure;
    let c = s.constants();
    let root = miller_form(&c, q.x, q.y).max(0.0).sqrt();
    let exponent = (s.rho() * (q.x + q.y) - c.eta.sqrt() * root) / c.xi;
    exponent.exp() / (2.0 * PI * (1.0 - s.sigma() * s.sigma()).sqrt())
}

pub fn density_n4(q: &DensityQuery) -> f64 {
    let c = q.structure.constants();
    let norm = c.lambda * c.lambda * c.kappa * c.kappa / (4.0 * PI * c.alpha);
    let rate = c.radial_rate();
    let r = radial(&c, q.x, q.y);
    if r == 0.0 {
        // sqrt(Q) K_1(c sqrt(Q)) -> 1 / c
        return norm / rate;
    }
    let z = rate * r;
    let k1 = k_scaled_unchecked(BesselOrder::integer(1), z);
    norm * (0.5 * c.delta * (q.x + q.y) - z).exp() * r * k1
}

fn radial(c: &DerivedConstants, x: f64, y: f64) -> f64 {
    let (p, m) = (x + y, x - y);
    (c.kappa * c.kappa * p * p + c.lambda * c.lambda * m * m).sqrt()
}

/// Density of `sum_j U_j V_j` for `n` iid pairs with `Var V = 1`,
/// `Var U = scale^2` and correlation `corr`.
fn inner_product_density(n: u32, x: f64, corr: f64, scale: f64) -> f64 {
    let mu2 = n as i32 - 1; // twice the Bessel order
    let mu = f64::from(mu2) / 2.0;
    let one_minus = 1.0 - corr * corr;
    let arg_scale = scale * one_minus;
    let half_n = f64::from(n) / 2.0;
    let ln_norm =
        -0.5 * PI.ln() - (half_n + 0.5) * scale.ln() - 0.5 * one_minus.ln() - log_gamma(half_n).unwrap_or(0.0);
    if x == 0.0 {
        if n == 1 {
            return f64::INFINITY;
        }
        // |x/2|^mu K_mu(|x|/s) -> s^mu Gamma(mu) / 2
        let ln_limit = mu * arg_scale.ln() + log_gamma(mu).unwrap_or(0.0) - 2f64.ln();
        return (ln_norm + ln_limit).exp();
    }
    let z = x.abs() / arg_scale;
    let scaled = k_scaled_unchecked(BesselOrder::from_twice(mu2), z);
    let exponent = ln_norm + mu * (0.5 * x.abs()).ln() + corr * x / arg_scale - z + scaled.ln();
    exponent.exp()
}

/// Marginal density of `sum_j A_j C_j` (depends on `rho` only).
pub fn marginal_density(structure: &CovarianceStructure, n: u32, x: f64) -> Result<f64> {
    check_sample_size(n)?;
    Ok(inner_product_density(n, x, structure.rho(), 1.0))
}

/// Null density of `sum_j (A_j - B_j) C_j` when `Cov(A, C) = Cov(B, C)`.
///
/// Only `sigma` enters: `A - B` has variance `2 - 2 sigma` and is uncorrelated
/// with `C`.
pub fn diff_density(sigma: f64, n: u32, x: f64) -> Result<f64> {
    check_sample_size(n)?;
    if !(1.0 - sigma * sigma > 0.0) {
        return Err(Error::SigmaOutOfRange(sigma));
    }
    Ok(inner_product_density(n, x, 0.0, (2.0 - 2.0 * sigma).sqrt()))
}
