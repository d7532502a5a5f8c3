//! Modified Bessel function of the second kind for integer and half-integer
//! orders, and the log-gamma function.
//!
//! `K_0` and `K_1` come from the power series for `x <= 2`, Steed's
//! continued fraction for `2 < x <= 40` and the Hankel asymptotic expansion
//! beyond that. Half-integer orders start from the elementary closed forms of
//! `K_{1/2}` and `K_{3/2}`. Higher orders use the upward recurrence
//! `K_{v+1}(x) = K_{v-1}(x) + (2v/x) K_v(x)`, which is stable for `K`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_SWITCH: f64 = 2.0;
const ASYMPTOTIC_SWITCH: f64 = 40.0;

/// Order of a Bessel function, stored doubled so that integer and
/// half-integer orders are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BesselOrder {
    twice_nu: i32,
}

impl BesselOrder {
    pub const fn from_twice(twice_nu: i32) -> Self {
        Self { twice_nu }
    }

    pub const fn integer(nu: i32) -> Self {
        Self { twice_nu: 2 * nu }
    }

    pub const fn twice_nu(self) -> i32 {
        self.twice_nu
    }

    pub fn nu(self) -> f64 {
        f64::from(self.twice_nu) / 2.0
    }

    /// `K_{-v} = K_v`, so only `|v|` matters for evaluation.
    pub const fn magnitude(self) -> Self {
        Self { twice_nu: self.twice_nu.abs() }
    }

    pub const fn is_half_integer(self) -> bool {
        self.twice_nu % 2 != 0
    }
}

/// `K_v(x)` for `x > 0`.
///
/// Results below the smallest positive normal are flushed to exactly zero.
pub fn bessel_k(order: BesselOrder, x: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(order, x)?;
    let value = scaled * (-x).exp();
    if value < f64::MIN_POSITIVE {
        Ok(0.0)
    } else {
        Ok(value)
    }
}

/// `exp(x) K_v(x)` for `x > 0`; never underflows for moderate orders.
pub fn bessel_k_scaled(order: BesselOrder, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_k requires finite x > 0, got {x}")));
    }
    Ok(k_scaled_unchecked(order, x))
}

/// `ln K_v(x)`; finite for arguments where `K_v` itself would underflow.
pub fn ln_bessel_k(order: BesselOrder, x: f64) -> Result<f64> {
    Ok(bessel_k_scaled(order, x)?.ln() - x)
}

pub(crate) fn k_scaled_unchecked(order: BesselOrder, x: f64) -> f64 {
    let twice = order.magnitude().twice_nu;
    let (mut lower, mut upper, mut nu) = if twice % 2 == 0 {
        let (k0, k1) = k01_scaled(x);
        (k0, k1, 0.0)
    } else {
        let k_half = (FRAC_PI_2 / x).sqrt();
        (k_half, k_half * (1.0 + 1.0 / x), 0.5)
    };
    let target = f64::from(twice) / 2.0;
    if target == nu {
        return lower;
    }
    while nu + 1.0 < target {
        let next = lower + 2.0 * (nu + 1.0) / x * upper;
        lower = upper;
        upper = next;
        nu += 1.0;
    }
    upper
}

/// `(exp(x) K_0(x), exp(x) K_1(x))`.
fn k01_scaled(x: f64) -> (f64, f64) {
    if x <= SERIES_SWITCH {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else if x <= ASYMPTOTIC_SWITCH {
        k01_steed(x)
    } else {
        (k_asymptotic_scaled(0.0, x), k_asymptotic_scaled(1.0, x))
    }
}

fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    // I_0, I_1 and the digamma-weighted sums share the same power terms.
    let mut term0 = 1.0; // q^k / (k!)^2
    let mut term1 = 0.5 * x; // (x/2) q^k / (k! (k+1)!)
    let mut harmonic = 0.0; // H_k
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for k in 0..200 {
        let kf = k as f64;
        if k > 0 {
            harmonic += 1.0 / kf;
            term0 *= q / (kf * kf);
            term1 *= q / (kf * (kf + 1.0));
        }
        let harmonic_next = harmonic + 1.0 / (kf + 1.0);
        i0 += term0;
        i1 += term1;
        s0 += term0 * harmonic;
        // psi(k+1) + psi(k+2) = -2 gamma + H_k + H_{k+1}
        s1 += term1 * (harmonic + harmonic_next - 2.0 * EULER_GAMMA);
        if term0 < 1e-17 * i0 && term1 < 1e-17 * i1 {
            break;
        }
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + log_half * i1 - 0.5 * s1;
    (k0, k1)
}

/// Steed's method on Temme's continued fraction for order 0; returns the
/// scaled pair. Requires `x` away from zero (used for `x > 2`).
fn k01_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (FRAC_PI_2 / x).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Hankel expansion of `exp(x) K_v(x)`, summed until the terms stop
/// shrinking.
fn k_asymptotic_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (FRAC_PI_2 / x).sqrt() * sum
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires finite x > 0, got {x}")));
    }
    // exact for small integers: (x-1)! is representable up to 22!
    if x.fract() == 0.0 && x <= 23.0 {
        let mut factorial = 1.0f64;
        for k in 2..(x as u32) {
            factorial *= f64::from(k);
        }
        return Ok(factorial.ln());
    }
    if x < 0.5 {
        // keep the Lanczos sum on its accurate range
        return Ok(lanczos_ln_gamma(x + 1.0) - x.ln());
    }
    Ok(lanczos_ln_gamma(x))
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let z = x - 1.0;
    let mut series = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + series.ln()
}
