//! Characteristic functions of the covariance pair and of the full triple
//! `(sum A_j B_j, sum A_j C_j, sum B_j C_j)` for one observation, plus the
//! large-`n` normal limit.
//!
//! Three independent routes evaluate `E exp(i(u X + v Y))`: the expanded
//! quadratic, the rotated `(lambda, kappa, delta, alpha)` form and the 3x3
//! determinant. Powers `-n/2` go through the principal logarithm; the radicand
//! has positive real part on the real `(u, v)` plane so no branch tracking is
//! needed there.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{cholesky3, det3, matmul3, sym_eigenvalues3, transpose3, Mat3};
use crate::params::CovarianceStructure;

use super::density::check_sample_size;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfQuery {
    pub structure: CovarianceStructure,
    pub n: u32,
    pub u: f64,
    pub v: f64,
}

impl CfQuery {
    pub fn new(structure: CovarianceStructure, n: u32, u: f64, v: f64) -> Result<Self> {
        check_sample_size(n)?;
        Ok(Self { structure, n, u, v })
    }
}

fn neg_half_power(z: Complex64, n: u32) -> Complex64 {
    (-(f64::from(n) / 2.0) * z.ln()).exp()
}

/// `1 + a u^2 - 2 i rho u + a v^2 - 2 i rho v + 2 b u v`, for complex
/// arguments so that the inversion can run on a shifted contour.
pub(crate) fn closed_radicand(s: &CovarianceStructure, u: Complex64, v: Complex64) -> Complex64 {
    let rho = s.rho();
    let a = 1.0 - rho * rho;
    let b = s.sigma() - rho * rho;
    1.0 + a * u * u - 2.0 * I * rho * u + a * v * v - 2.0 * I * rho * v + 2.0 * b * u * v
}

pub(crate) fn cf_closed_complex(s: &CovarianceStructure, n: u32, u: Complex64, v: Complex64) -> Complex64 {
    neg_half_power(closed_radicand(s, u, v), n)
}

pub fn cf_closed(q: &CfQuery) -> Complex64 {
    cf_closed_complex(&q.structure, q.n, q.u.into(), q.v.into())
}

/// `[sqrt(2) lambda kappa / sqrt(lambda^2 (u+v-i delta)^2 + kappa^2 (v-u)^2 + alpha^2)]^n`
pub fn cf_reduced(q: &CfQuery) -> Complex64 {
    let c = q.structure.constants();
    let s = Complex64::new(q.u + q.v, -c.delta);
    let t = q.v - q.u;
    let radicand = c.lambda * c.lambda * s * s + c.kappa * c.kappa * t * t + c.alpha * c.alpha;
    let single = SQRT_2 * c.lambda * c.kappa / radicand.sqrt();
    single.powu(q.n)
}

fn wishart_determinant(sigma: &Mat3, theta: &Mat3) -> Complex64 {
    // det(I - 2i Sigma Theta)
    let prod = matmul3(sigma, theta);
    let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = Complex64::new(id, -2.0 * prod[i][j]);
        }
    }
    det3(&m)
}

pub fn cf_determinant(q: &CfQuery) -> Complex64 {
    let (hu, hv) = (q.u / 2.0, q.v / 2.0);
    let theta = [[0.0, 0.0, hu], [0.0, 0.0, hv], [hu, hv, 0.0]];
    neg_half_power(wishart_determinant(&q.structure.matrix(), &theta), q.n)
}

fn triple_theta(u: f64, v: f64, w: f64) -> Mat3 {
    let (hu, hv, hw) = (u / 2.0, v / 2.0, w / 2.0);
    [[0.0, hu, hv], [hu, 0.0, hw], [hv, hw, 0.0]]
}

/// Characteristic function of `(AB, AC, BC)` for one observation at
/// `(u, v, w)`.
///
/// `det(I - 2i Sigma Theta) = prod_k (1 - 2i m_k)` with `m_k` the (real)
/// eigenvalues of `L^T Theta L`; taking the root factor by factor keeps the
/// branch continuous from the origin, which the principal root of the
/// product does not once the phases add past `pi`.
pub fn cf_triple(structure: &CovarianceStructure, u: f64, v: f64, w: f64) -> Complex64 {
    let l = cholesky3(&structure.matrix()).expect("admissible structure is positive definite");
    let theta = triple_theta(u, v, w);
    let sym = matmul3(&transpose3(&l), &matmul3(&theta, &l));
    sym_eigenvalues3(&sym).iter().map(|&m| Complex64::new(1.0, -2.0 * m).sqrt().inv()).product()
}

/// The raw determinant `det(I - 2i Sigma Theta)` behind [`cf_triple`].
pub fn cf_triple_determinant(structure: &CovarianceStructure, u: f64, v: f64, w: f64) -> Complex64 {
    wishart_determinant(&structure.matrix(), &triple_theta(u, v, w))
}

/// Covariance of the standardized pair `((X - n rho)/sqrt n, (Y - n rho)/sqrt n)`.
pub fn clt_covariance(structure: &CovarianceStructure) -> [[f64; 2]; 2] {
    let r2 = structure.rho() * structure.rho();
    let diag = r2 + 1.0;
    let off = r2 + structure.sigma();
    [[diag, off], [off, diag]]
}

pub fn clt_limit_density(structure: &CovarianceStructure, z1: f64, z2: f64) -> f64 {
    let [[d, o], _] = clt_covariance(structure);
    let det = d * d - o * o;
    let quad = (d * z1 * z1 - 2.0 * o * z1 * z2 + d * z2 * z2) / det;
    (-0.5 * quad).exp() / (2.0 * PI * det.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn half() -> CovarianceStructure {
        CovarianceStructure::new(0.5, 0.5).unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn unit_at_origin() {
        for n in 1..6 {
            let q = CfQuery::new(half(), n, 0.0, 0.0).unwrap();
            assert_eq!(cf_closed(&q), Complex64::new(1.0, 0.0));
            assert!((cf_reduced(&q) - 1.0).norm() < 1e-14);
            assert_eq!(cf_determinant(&q), Complex64::new(1.0, 0.0));
        }
        assert!((cf_triple(&half(), 0.0, 0.0, 0.0) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn half_half_at_one_one() {
        let q = CfQuery::new(half(), 1, 1.0, 1.0).unwrap();
        let expect = Complex64::new(3.0, -2.0).sqrt().inv();
        assert!(rel(cf_closed(&q), expect) < 1e-15);
        assert!(rel(cf_reduced(&q), expect) < 1e-14);
        assert!(rel(cf_determinant(&q), expect) < 1e-14);
    }

    #[test]
    fn reduced_matches_special_case_display() {
        // 2 / sqrt(2 (u+v-i)^2 + (v-u)^2 + 6) when rho = sigma = 1/2
        for &(u, v) in &[(0.3, -1.2), (2.0, 0.5), (-4.0, -4.0)] {
            let q = CfQuery::new(half(), 1, u, v).unwrap();
            let s = Complex64::new(u + v, -1.0);
            let expect = 2.0 / (2.0 * s * s + (v - u) * (v - u) + 6.0).sqrt();
            assert!(rel(cf_reduced(&q), expect) < 1e-14);
        }
    }

    #[test]
    fn triple_against_determinant_expansion() {
        // written-out cofactor expansion of I - 2i Sigma Theta with
        // Theta = [[0, 1/2, 0], [1/2, 0, 0], [0, 0, 0]], Sigma at rho = sigma = 1/2
        let s = half();
        let m = [
            [Complex64::new(1.0, -0.5), Complex64::new(0.0, -1.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, -1.0), Complex64::new(1.0, -0.5), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, -0.5), Complex64::new(0.0, -0.5), Complex64::new(1.0, 0.0)],
        ];
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * m[2][2];
        let expect = det.sqrt().inv();
        assert!(rel(cf_triple(&s, 1.0, 0.0, 0.0), expect) < 1e-14);
        assert!(rel(cf_triple_determinant(&s, 1.0, 0.0, 0.0), det) < 1e-15);
    }

    #[test]
    fn triple_branch_is_continuous() {
        // follow a ray outward; the value must not jump sign
        let s = CovarianceStructure::new(0.3, -0.4).unwrap();
        let mut prev = cf_triple(&s, 0.0, 0.0, 0.0);
        for k in 1..4000 {
            let t = k as f64 * 0.01;
            let cur = cf_triple(&s, 3.0 * t, -2.0 * t, 2.5 * t);
            assert!((cur - prev).norm() < 0.05, "jump at t = {t}");
            assert!(cur.norm() <= 1.0 + 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn clt_limit() {
        assert_eq!(clt_covariance(&half()), [[1.25, 0.75], [0.75, 1.25]]);
        let id = CovarianceStructure::new(0.0, 0.0).unwrap();
        assert_eq!(clt_covariance(&id), [[1.0, 0.0], [0.0, 1.0]]);
        assert_relative_eq!(clt_limit_density(&id, 0.0, 0.0), 1.0 / (2.0 * PI), max_relative = 1e-15);
        // midpoint sum over a wide box
        let h = 0.02;
        let mut mass = 0.0;
        for i in 0..1000 {
            for j in 0..1000 {
                let (z1, z2) = (-10.0 + (i as f64 + 0.5) * h, -10.0 + (j as f64 + 0.5) * h);
                mass += clt_limit_density(&half(), z1, z2);
            }
        }
        assert_relative_eq!(mass * h * h, 1.0, max_relative = 1e-8);
    }

    fn structure() -> impl Strategy<Value = CovarianceStructure> {
        (-0.95f64..0.95, 0.0f64..1.0).prop_filter_map("inadmissible", |(sigma, t)| {
            let bound = ((1.0 + sigma) / 2.0).sqrt();
            CovarianceStructure::new((2.0 * t - 1.0) * bound * 0.98, sigma).ok()
        })
    }

    proptest! {
        #[test]
        fn three_routes_agree(s in structure(), n in 1u32..9, u in -20.0f64..20.0, v in -20.0f64..20.0) {
            let q = CfQuery::new(s, n, u, v).unwrap();
            let closed = cf_closed(&q);
            prop_assert!(rel(cf_reduced(&q), closed) < 1e-12);
            prop_assert!(rel(cf_determinant(&q), closed) < 1e-12);
        }

        #[test]
        fn radicand_and_modulus(s in structure(), u in -50.0f64..50.0, v in -50.0f64..50.0) {
            let r = closed_radicand(&s, u.into(), v.into());
            prop_assert!(r.re >= 1.0 - 1e-9);
            let q = CfQuery::new(s, 1, u, v).unwrap();
            prop_assert!(cf_closed(&q).norm() <= 1.0 + 1e-15);
            prop_assert!(rel(cf_closed(&q), cf_closed(&CfQuery::new(s, 1, v, u).unwrap())) < 1e-13);
        }

        #[test]
        fn triple_swaps_slots(s in structure(), u in -5.0f64..5.0, v in -5.0f64..5.0, w in -5.0f64..5.0) {
            prop_assert!(rel(cf_triple(&s, u, v, w), cf_triple(&s, u, w, v)) < 1e-12);
            let direct = cf_triple_determinant(&s, u, v, w);
            let via_root = cf_triple(&s, u, v, w).powi(-2);
            prop_assert!(rel(via_root, direct) < 1e-11);
        }
    }
}
