//! Numerical Fourier inversion of the closed-form characteristic function.
//!
//! In rotated frequencies `s = u + v`, `t = v - u` (Jacobian 1/2) the phase is
//! `a s + b t` with `a = (x+y)/2`, `b = (y-x)/2`. Symmetry of the density in
//! `(x, y)` and reality fold the plane onto the positive quadrant:
//!
//! `f(x, y) = e^{a tau} / (2 pi^2) int_0^inf int_0^inf
//!            cos(b t) Re[e^{-i a s} F(s + i tau, t)] ds dt`
//!
//! The `s` contour is shifted by `tau = delta`, which makes the transformed CF
//! real and positive. Its branch points sit at `Im s = delta +- sqrt(kappa^2
//! t^2 + alpha^2)/lambda`, and `alpha > lambda |delta|` keeps the strip
//! between the real axis and the shifted line clear.
//!
//! The inner integral runs over the variable with the larger frequency, as a
//! series of half-period pieces accelerated by Wynn's epsilon algorithm.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::quad1d::{integrate_1d, integrate_1d_semi_infinite};
use super::{Estimate, QuadratureConfig};
use crate::analytic::{cf_closed_complex, check_sample_size};
use crate::error::{Error, Result};
use crate::params::CovarianceStructure;

/// Half-period pieces summed before giving up on the inner series.
const MAX_PIECES: usize = 400;
/// Partial sums fed to the epsilon table.
const WYNN_WINDOW: usize = 40;
/// Frequencies below this are treated as zero.
const TINY_FREQUENCY: f64 = 1e-12;

/// Density at `(x, y)` recovered from the characteristic function.
///
/// Rejects the origin for `n <= 2`, where the density is infinite.
pub fn invert_cf(structure: &CovarianceStructure, n: u32, x: f64, y: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_sample_size(n)?;
    cfg.validate()?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::Domain("inversion point must be finite".into()));
    }
    if n <= 2 && x == 0.0 && y == 0.0 {
        return Err(Error::Domain(format!("the n = {n} density is singular at the origin")));
    }
    let tau = structure.constants().delta;
    let a = 0.5 * (x + y);
    let b = 0.5 * (y - x);
    let prefactor = (a * tau).exp() / (2.0 * PI * PI);

    // Re[e^{-i a s} F(s + i tau, t)] cos(b t)
    let integrand = |s: f64, t: f64| {
        let shifted = Complex64::new(s, tau);
        let u = 0.5 * (shifted - t);
        let v = 0.5 * (shifted + t);
        let phase = Complex64::from_polar(1.0, -a * s);
        (phase * cf_closed_complex(structure, n, u, v)).re * (b * t).cos()
    };

    // the outer result is scaled by `prefactor`, so tolerances are too
    let outer_cfg = QuadratureConfig { abs_tol: cfg.abs_tol / prefactor, ..*cfg };
    let inner_tol = 1e-2 * outer_cfg.abs_tol;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner_over_s = a.abs() >= b.abs();
    let (inner_freq, outer_var_is_t) = if inner_over_s { (a.abs(), true) } else { (b.abs(), false) };

    let outer = |w: f64| {
        if failure.borrow().is_some() {
            return 0.0;
        }
        let slice = |z: f64| if outer_var_is_t { integrand(z, w) } else { integrand(w, z) };
        match oscillatory_half_line(slice, inner_freq, inner_tol, cfg.max_subdivisions) {
            Ok(e) => e.value,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let result = integrate_1d_semi_infinite(outer, 0.0, &outer_cfg);
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    let scale =
        |e: Estimate| Estimate { value: prefactor * e.value, error: prefactor * e.error, subdivisions: e.subdivisions };
    match result {
        Ok(e) => Ok(scale(e)),
        Err(Error::MaxSubdivisions { best }) => Err(Error::MaxSubdivisions { best: scale(best) }),
        Err(e) => Err(e),
    }
}

/// `int_0^inf g` for an integrand oscillating at angular frequency `omega`.
fn oscillatory_half_line<G: Fn(f64) -> f64>(g: G, omega: f64, tol: f64, max_subdivisions: usize) -> Result<Estimate> {
    let piece_cfg =
        QuadratureConfig { abs_tol: 1e-2 * tol, rel_tol: 1e-12, max_subdivisions, ..QuadratureConfig::default() };
    if omega < TINY_FREQUENCY {
        return integrate_1d_semi_infinite(g, 0.0, &QuadratureConfig { abs_tol: tol, ..piece_cfg });
    }
    let period = PI / omega;
    let mut sums: Vec<f64> = Vec::new();
    let mut running = 0.0;
    let mut estimates: Vec<f64> = Vec::new();
    let mut subdivisions = 0;
    for k in 0..MAX_PIECES {
        let lo = k as f64 * period;
        let piece = integrate_1d(&g, lo, lo + period, &[], &piece_cfg)?;
        subdivisions += piece.subdivisions;
        running += piece.value;
        sums.push(running);
        let window = &sums[sums.len().saturating_sub(WYNN_WINDOW)..];
        estimates.push(wynn_epsilon(window));
        if estimates.len() >= 4 {
            let m = estimates.len();
            let last = estimates[m - 1];
            let change = (last - estimates[m - 2]).abs().max((last - estimates[m - 3]).abs());
            if change <= tol {
                return Ok(Estimate { value: last, error: change, subdivisions });
            }
        }
    }
    let m = estimates.len();
    let best = Estimate { value: estimates[m - 1], error: (estimates[m - 1] - estimates[m - 2]).abs(), subdivisions };
    Err(Error::SlowConvergence { best })
}

/// Limit estimate of a sequence of partial sums from the highest even column
/// of the epsilon table that could be built.
fn wynn_epsilon(sums: &[f64]) -> f64 {
    let mut best = *sums.last().expect("non-empty");
    let mut prev = vec![0.0; sums.len() + 1];
    let mut cur = sums.to_vec();
    let mut column = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let d = cur[j + 1] - cur[j];
            if d == 0.0 || !d.is_finite() {
                return best;
            }
            next.push(prev[j + 1] + 1.0 / d);
        }
        column += 1;
        prev = cur;
        cur = next;
        if column % 2 == 0 {
            let candidate = *cur.last().expect("non-empty column");
            if !candidate.is_finite() {
                return best;
            }
            best = candidate;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{density_general, DensityQuery};

    fn half() -> CovarianceStructure {
        CovarianceStructure::new(0.5, 0.5).unwrap()
    }

    #[test]
    fn epsilon_accelerates_alternating_series() {
        // 1 - 1/2 + 1/3 - ... = ln 2
        let mut sums = Vec::new();
        let mut acc = 0.0;
        for k in 1..=20 {
            acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            sums.push(acc);
        }
        assert!((wynn_epsilon(&sums) - 2f64.ln()).abs() < 1e-12);
        assert!((sums[19] - 2f64.ln()).abs() > 1e-2);
    }

    #[test]
    fn dirichlet_integral() {
        // int_0^inf sin(x)/x = pi/2
        let e = oscillatory_half_line(|x: f64| if x == 0.0 { 1.0 } else { x.sin() / x }, 1.0, 1e-11, 1000).unwrap();
        assert!((e.value - PI / 2.0).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn recovers_n3_density() {
        let cfg = QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() };
        let got = invert_cf(&half(), 3, 0.5, 0.25, &cfg).unwrap();
        let want = density_general(&DensityQuery::new(half(), 3, 0.5, 0.25).unwrap());
        assert!((got.value - want).abs() < 1e-6, "{} vs {want}", got.value);
    }

    #[test]
    fn recovers_n1_density() {
        let cfg = QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() };
        let got = invert_cf(&half(), 1, 1.0, 1.0, &cfg).unwrap();
        let want = (1.0 - 3f64.sqrt()).exp() / (2.0 * PI);
        assert!((got.value - want).abs() < 1e-4, "{} vs {want}", got.value);
    }

    #[test]
    fn symmetric_in_arguments() {
        let cfg = QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() };
        let s = CovarianceStructure::new(0.6, 0.1).unwrap();
        let p = invert_cf(&s, 2, 1.2, -0.4, &cfg).unwrap();
        let q = invert_cf(&s, 2, -0.4, 1.2, &cfg).unwrap();
        assert!((p.value - q.value).abs() < 1e-7);
    }

    #[test]
    fn origin_rules() {
        let cfg = QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() };
        assert!(invert_cf(&half(), 2, 0.0, 0.0, &cfg).is_err());
        let got = invert_cf(&half(), 4, 0.0, 0.0, &cfg).unwrap();
        let want = density_general(&DensityQuery::new(half(), 4, 0.0, 0.0).unwrap());
        assert!((got.value - want).abs() < 1e-6, "{} vs {want}", got.value);
    }
}
