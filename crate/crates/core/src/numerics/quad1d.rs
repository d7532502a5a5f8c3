//! Globally adaptive Gauss-Kronrod (21-point) quadrature in one dimension.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::rules::{scaled_error, GK21};
use super::{stable_sum, Estimate, QuadratureConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    id: u64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.id.cmp(&self.id))
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, id: u64) -> Result<Interval> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0; 21];
    for (slot, &t) in fv.iter_mut().zip(GK21.nodes.iter()) {
        let x = centre + half * t;
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { x, y: f64::NAN });
        }
        *slot = v;
    }
    let mut resk = 0.0;
    let mut resg = 0.0;
    let mut resabs = 0.0;
    for i in 0..21 {
        resk += GK21.kronrod[i] * fv[i];
        resg += GK21.gauss[i] * fv[i];
        resabs += GK21.kronrod[i] * fv[i].abs();
    }
    let mean = 0.5 * resk;
    let resasc: f64 = (0..21).map(|i| GK21.kronrod[i] * (fv[i] - mean).abs()).sum();
    let h = half.abs();
    Ok(Interval { a, b, value: resk * half, error: scaled_error((resk - resg) * h, resasc * h, resabs * h), id })
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint that lies
/// strictly inside. Endpoint singularities are fine as long as `f` is never
/// sampled at them (GK nodes are interior).
///
/// Fails with `MaxSubdivisions` (carrying the best estimate) if the
/// tolerance is not met within the subdivision budget, or if an interval
/// becomes too narrow to split further.
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > lo && p < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![lo];
    edges.extend(cuts);
    edges.push(hi);

    let mut next_id = 0u64;
    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        heap.push(gk21(&f, w[0], w[1], next_id)?);
        next_id += 1;
    }

    let mut subdivisions = 0usize;
    let total = |heap: &BinaryHeap<Interval>| {
        let value = stable_sum(heap.iter().map(|iv| iv.value));
        let error: f64 = heap.iter().map(|iv| iv.error).sum();
        (value, error)
    };
    loop {
        let (value, error) = total(&heap);
        if error <= cfg.tolerance_for(value) {
            return Ok(Estimate { value: sign * value, error, subdivisions });
        }
        let worst = *heap.peek().expect("at least one interval");
        let mid = 0.5 * (worst.a + worst.b);
        let too_narrow = !(mid > worst.a && mid < worst.b)
            || (worst.b - worst.a) <= 64.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs());
        if subdivisions >= cfg.max_subdivisions || too_narrow {
            let best = Estimate { value: sign * value, error, subdivisions };
            return Err(Error::MaxSubdivisions { best });
        }
        heap.pop();
        heap.push(gk21(&f, worst.a, mid, next_id)?);
        heap.push(gk21(&f, mid, worst.b, next_id + 1)?);
        next_id += 2;
        subdivisions += 1;
    }
}

/// Integrates `f` over `[a, inf)` through the substitution `x = a + t/(1-t)`.
pub fn integrate_1d_semi_infinite<F: Fn(f64) -> f64>(f: F, a: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let mapped = |t: f64| {
        let s = 1.0 - t;
        let v = f(a + t / s);
        // the far tail maps onto t -> 1, where f has decayed to zero
        if v == 0.0 {
            0.0
        } else {
            v / (s * s)
        }
    };
    integrate_1d(mapped, 0.0, 1.0, &[], cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig { abs_tol: 1e-13, rel_tol: 1e-12, ..QuadratureConfig::default() }
    }

    #[test]
    fn smooth_integrals() {
        let e = integrate_1d(f64::sin, 0.0, std::f64::consts::PI, &[], &cfg()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-13);
        let e = integrate_1d(|x| x.exp(), 1.0, 0.0, &[], &cfg()).unwrap();
        assert!((e.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_and_interior_singularities() {
        // int_0^1 ln x = -1
        let e = integrate_1d(f64::ln, 0.0, 1.0, &[], &cfg()).unwrap();
        assert!((e.value + 1.0).abs() < 1e-11, "{e:?}");
        // int_{-1}^{1} |x|^{-1/2} = 4, split at the singular point
        let e = integrate_1d(|x: f64| x.abs().powf(-0.5), -1.0, 1.0, &[0.0], &cfg()).unwrap();
        assert!((e.value - 4.0).abs() < 1e-10, "{e:?}");
        assert!(e.error < 1e-10);
    }

    #[test]
    fn semi_infinite() {
        let e = integrate_1d_semi_infinite(|x: f64| (-x).exp(), 0.0, &cfg()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        let e = integrate_1d_semi_infinite(|x: f64| 1.0 / (1.0 + x * x), 0.0, &cfg()).unwrap();
        assert!((e.value - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let tight = QuadratureConfig { max_subdivisions: 3, abs_tol: 1e-15, rel_tol: 1e-15, ..cfg() };
        let err = integrate_1d(|x: f64| x.abs().powf(-0.9), 0.0, 1.0, &[], &tight).unwrap_err();
        let best = err.best_estimate().unwrap();
        assert!(best.value > 0.0 && best.error > 0.0);
        assert_eq!(best.subdivisions, 3);
    }

    #[test]
    fn non_finite_samples_are_reported() {
        let err = integrate_1d(|_| f64::NAN, 0.0, 1.0, &[], &cfg()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteSample { .. }));
    }
}
