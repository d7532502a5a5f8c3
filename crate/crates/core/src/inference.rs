//! Test of `H0: Cov(A, C) = Cov(B, C)` through the statistic
//! `sum_j (a_j - b_j) c_j`, whose null density depends on `sigma` only.

use crate::analytic::diff_density;
use crate::error::{Error, Result};
use crate::numerics::{integrate_1d_semi_infinite, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// `p = 2 P(X >= |s|)`
    TwoSided,
    /// `p = P(X >= s)`
    Greater,
    /// `p = P(X <= s)`
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaSource {
    Supplied,
    /// Plug-in `(1/n) sum a_j b_j`, which assumes zero means and unit
    /// variances.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestInput {
    pub observations: Vec<(f64, f64, f64)>,
    pub sigma: Option<f64>,
    pub alternative: Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub n: u32,
    pub sigma_used: f64,
    pub p_value: f64,
    pub sigma_source: SigmaSource,
    pub alternative: Alternative,
}

fn tail_config() -> QuadratureConfig {
    QuadratureConfig { abs_tol: 1e-13, rel_tol: 1e-10, ..QuadratureConfig::default() }
}

/// `P(X >= threshold)` under the null, `threshold >= 0`.
pub fn diff_tail(sigma: f64, n: u32, threshold: f64) -> Result<f64> {
    // validates sigma and n before any integration
    diff_density(sigma, n, 1.0)?;
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!("threshold {threshold} must be non-negative")));
    }
    if threshold == 0.0 {
        return Ok(0.5);
    }
    if threshold.is_infinite() {
        return Ok(0.0);
    }
    // the density decays like exp(-x / scale)
    let scale = (2.0 - 2.0 * sigma).sqrt();
    let tail = integrate_1d_semi_infinite(
        |t| scale * diff_density(sigma, n, threshold + scale * t).unwrap_or(f64::NAN),
        0.0,
        &tail_config(),
    )?;
    Ok(tail.value.clamp(0.0, 0.5))
}

fn p_value(sigma: f64, n: u32, statistic: f64, alternative: Alternative) -> Result<f64> {
    let upper = |s: f64| -> Result<f64> {
        if s >= 0.0 {
            diff_tail(sigma, n, s)
        } else {
            Ok(1.0 - diff_tail(sigma, n, -s)?)
        }
    };
    let p = match alternative {
        Alternative::TwoSided => 2.0 * diff_tail(sigma, n, statistic.abs())?,
        Alternative::Greater => upper(statistic)?,
        Alternative::Less => upper(-statistic)?,
    };
    Ok(p.clamp(0.0, 1.0))
}

pub fn equality_test(input: &TestInput) -> Result<TestResult> {
    let obs = &input.observations;
    if obs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = obs.iter().find(|(a, b, c)| !(a.is_finite() && b.is_finite() && c.is_finite())) {
        return Err(Error::Domain(format!("non-finite observation {bad:?}")));
    }
    let n = u32::try_from(obs.len()).map_err(|_| Error::Domain("too many observations".into()))?;
    let (sigma_used, sigma_source) = match input.sigma {
        Some(s) => (s, SigmaSource::Supplied),
        None => (obs.iter().map(|(a, b, _)| a * b).sum::<f64>() / f64::from(n), SigmaSource::Estimated),
    };
    if !(1.0 - sigma_used * sigma_used > 0.0) {
        return Err(Error::SigmaOutOfRange(sigma_used));
    }
    let statistic: f64 = obs.iter().map(|(a, b, c)| (a - b) * c).sum();
    Ok(TestResult {
        statistic,
        n,
        sigma_used,
        p_value: p_value(sigma_used, n, statistic, input.alternative)?,
        sigma_source,
        alternative: input.alternative,
    })
}
