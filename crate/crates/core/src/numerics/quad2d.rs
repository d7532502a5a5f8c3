//! Globally adaptive tensor Gauss-Kronrod (15x15) cubature on rectangles.
//!
//! Declared point singularities become panel corners. The square of side
//! `singularity_exclusion_radius` touching each one is split into two
//! triangles and mapped from the unit square by the Duffy transform
//! `(X, Y) = (h u, h u v)`, whose Jacobian `h^2 u` cancels a `1/r` blow-up and
//! turns a logarithmic one into `u ln u`.
//!
//! Panels are refined in batches; the children of a batch are evaluated in
//! parallel and the final sum is taken in panel-id order, so the result does
//! not depend on the number of worker threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::rules::{scaled_error, GK15};
use super::{stable_sum, Estimate, QuadratureConfig, TruncationPolicy};
use crate::error::{Error, Result};

/// Panels split per refinement round.
const BATCH: usize = 16;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Integration region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Rect(Rect),
    /// `(x0, inf) x (y0, inf)`. With a fixed truncation `R` this is clipped
    /// to `[x0, R] x [y0, R]`; with `Auto` both axes are mapped onto `[0, 1)`
    /// by `x = x0 + t/(1-t)`.
    Quadrant {
        x0: f64,
        y0: f64,
    },
}

#[derive(Debug, Clone, Copy)]
enum Chart {
    Plain,
    /// Triangle of the corner square at `(cx, cy)` extending in directions
    /// `(sx, sy)`; `upper` is the half above the diagonal.
    Duffy {
        cx: f64,
        cy: f64,
        sx: f64,
        sy: f64,
        h: f64,
        upper: bool,
    },
}

impl Chart {
    /// Physical point and Jacobian for chart coordinates `(u, v)`.
    #[inline]
    fn map(&self, u: f64, v: f64) -> (f64, f64, f64) {
        match *self {
            Chart::Plain => (u, v, 1.0),
            Chart::Duffy { cx, cy, sx, sy, h, upper } => {
                let (lx, ly) = if upper { (h * u * v, h * u) } else { (h * u, h * u * v) };
                (cx + sx * lx, cy + sy * ly, h * h * u)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    chart: Chart,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    id: u64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.id.cmp(&self.id))
    }
}

impl Panel {
    fn new(chart: Chart, u0: f64, u1: f64, v0: f64, v1: f64, id: u64) -> Self {
        Self { chart, u0, u1, v0, v1, id, value: 0.0, error: 0.0 }
    }

    fn evaluate<F: Fn(f64, f64) -> f64>(mut self, f: &F) -> Result<Self> {
        let (uc, uh) = (0.5 * (self.u0 + self.u1), 0.5 * (self.u1 - self.u0));
        let (vc, vh) = (0.5 * (self.v0 + self.v1), 0.5 * (self.v1 - self.v0));
        let mut fv = [[0.0; 15]; 15];
        for (i, &ti) in GK15.nodes.iter().enumerate() {
            let u = uc + uh * ti;
            for (j, &tj) in GK15.nodes.iter().enumerate() {
                let (x, y, jac) = self.chart.map(u, vc + vh * tj);
                let val = f(x, y);
                if !val.is_finite() {
                    return Err(Error::NonFiniteSample { x, y });
                }
                fv[i][j] = val * jac;
            }
        }
        let mut resk = 0.0;
        let mut resg = 0.0;
        let mut resabs = 0.0;
        for i in 0..15 {
            for j in 0..15 {
                let v = fv[i][j];
                resk += GK15.kronrod[i] * GK15.kronrod[j] * v;
                resg += GK15.gauss[i] * GK15.gauss[j] * v;
                resabs += GK15.kronrod[i] * GK15.kronrod[j] * v.abs();
            }
        }
        let mean = 0.25 * resk;
        let mut resasc = 0.0;
        for i in 0..15 {
            for j in 0..15 {
                resasc += GK15.kronrod[i] * GK15.kronrod[j] * (fv[i][j] - mean).abs();
            }
        }
        let area = (uh * vh).abs();
        self.value = resk * uh * vh;
        self.error = scaled_error((resk - resg) * area, resasc * area, resabs * area);
        Ok(self)
    }

    fn can_split(&self) -> bool {
        let ok = |a: f64, b: f64| {
            let m = 0.5 * (a + b);
            m > a && m < b && (b - a) > 64.0 * f64::EPSILON * a.abs().max(b.abs())
        };
        ok(self.u0, self.u1) || ok(self.v0, self.v1)
    }

    fn split(&self, first_id: u64) -> [Panel; 2] {
        let along_u = (self.u1 - self.u0) >= (self.v1 - self.v0);
        if along_u {
            let m = 0.5 * (self.u0 + self.u1);
            [
                Panel::new(self.chart, self.u0, m, self.v0, self.v1, first_id),
                Panel::new(self.chart, m, self.u1, self.v0, self.v1, first_id + 1),
            ]
        } else {
            let m = 0.5 * (self.v0 + self.v1);
            [
                Panel::new(self.chart, self.u0, self.u1, self.v0, m, first_id),
                Panel::new(self.chart, self.u0, self.u1, m, self.v1, first_id + 1),
            ]
        }
    }
}

/// Integrates `f` over `region`. Points in `singular` may be non-smooth or
/// carry an integrable `1/r` or logarithmic singularity; `f` is never
/// evaluated exactly at them.
pub fn integrate_2d<F>(f: F, region: Region, singular: &[(f64, f64)], cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    cfg.validate()?;
    match region {
        Region::Rect(rect) => integrate_rect(&f, rect, singular, cfg),
        Region::Quadrant { x0, y0 } => {
            if !(x0.is_finite() && y0.is_finite()) {
                return Err(Error::Domain("quadrant corner must be finite".into()));
            }
            match cfg.truncation {
                TruncationPolicy::Fixed(r) => {
                    if x0 >= r || y0 >= r {
                        return Ok(Estimate { value: 0.0, error: 0.0, subdivisions: 0 });
                    }
                    integrate_rect(&f, Rect { x0, x1: r, y0, y1: r }, singular, cfg)
                }
                TruncationPolicy::Auto(_) => {
                    let to_unit = |s: f64, o: f64| (s - o) / (1.0 + s - o);
                    let mapped_sing: Vec<(f64, f64)> = singular
                        .iter()
                        .filter(|&&(sx, sy)| sx >= x0 && sy >= y0)
                        .map(|&(sx, sy)| (to_unit(sx, x0), to_unit(sy, y0)))
                        .collect();
                    let g = |u: f64, v: f64| {
                        let (su, sv) = (1.0 - u, 1.0 - v);
                        let val = f(x0 + u / su, y0 + v / sv);
                        if val == 0.0 {
                            0.0
                        } else {
                            val / (su * su * sv * sv)
                        }
                    };
                    let unit = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
                    integrate_rect(&g, unit, &mapped_sing, cfg)
                }
            }
        }
    }
}

fn integrate_rect<F>(f: &F, rect: Rect, singular: &[(f64, f64)], cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let Rect { x0, x1, y0, y1 } = rect;
    if ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("rectangle bounds must be finite".into()));
    }
    if !(x1 > x0 && y1 > y0) {
        return Ok(Estimate { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    let inside: Vec<(f64, f64)> =
        singular.iter().copied().filter(|&(sx, sy)| sx >= x0 && sx <= x1 && sy >= y0 && sy <= y1).collect();

    let mut xs = vec![x0, x1];
    let mut ys = vec![y0, y1];
    for &(sx, sy) in &inside {
        if sx > x0 && sx < x1 {
            xs.push(sx);
        }
        if sy > y0 && sy < y1 {
            ys.push(sy);
        }
    }
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }

    let mut initial = Vec::new();
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let cell = Rect { x0: xw[0], x1: xw[1], y0: yw[0], y1: yw[1] };
            decompose(cell, &inside, cfg.singularity_exclusion_radius, &mut initial);
        }
    }
    let mut next_id = 0u64;
    for p in initial.iter_mut() {
        p.id = next_id;
        next_id += 1;
    }
    let evaluated: Result<Vec<Panel>> = initial.into_par_iter().map(|p| p.evaluate(f)).collect();
    let mut heap: BinaryHeap<Panel> = evaluated?.into_iter().collect();

    let mut subdivisions = 0usize;
    loop {
        let (value, error) = totals(&heap);
        if error <= cfg.tolerance_for(value) {
            return Ok(Estimate { value, error, subdivisions });
        }
        let budget = cfg.max_subdivisions - subdivisions;
        if budget == 0 || !heap.peek().is_some_and(Panel::can_split) {
            return Err(Error::MaxSubdivisions { best: Estimate { value, error, subdivisions } });
        }
        let mut children = Vec::with_capacity(2 * BATCH);
        let mut held = Vec::new();
        while children.len() < 2 * BATCH.min(budget) {
            let Some(worst) = heap.pop() else { break };
            if !worst.can_split() {
                held.push(worst);
                continue;
            }
            children.extend(worst.split(next_id));
            next_id += 2;
            subdivisions += 1;
        }
        heap.extend(held);
        let evaluated: Result<Vec<Panel>> = children.into_par_iter().map(|p| p.evaluate(f)).collect();
        heap.extend(evaluated?);
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by_key(|p| p.id);
    let value = stable_sum(panels.iter().map(|p| p.value));
    let error = stable_sum(panels.iter().map(|p| p.error));
    (value, error)
}

/// Splits a cell into plain and Duffy panels so that every singular corner is
/// covered by a collapsed-coordinate square.
fn decompose(cell: Rect, singular: &[(f64, f64)], exclusion: f64, out: &mut Vec<Panel>) {
    let corners = [
        (cell.x0, cell.y0, 1.0, 1.0),
        (cell.x1, cell.y0, -1.0, 1.0),
        (cell.x0, cell.y1, 1.0, -1.0),
        (cell.x1, cell.y1, -1.0, -1.0),
    ];
    let hits: Vec<_> = corners
        .iter()
        .copied()
        .filter(|&(cx, cy, _, _)| singular.iter().any(|&(sx, sy)| sx == cx && sy == cy))
        .collect();
    let (w, h) = (cell.x1 - cell.x0, cell.y1 - cell.y0);
    match hits.as_slice() {
        [] => out.push(Panel::new(Chart::Plain, cell.x0, cell.x1, cell.y0, cell.y1, 0)),
        [(cx, cy, sx, sy)] => {
            let side = if exclusion > 0.0 { exclusion.min(w).min(h) } else { w.min(h) };
            for upper in [false, true] {
                let chart = Chart::Duffy { cx: *cx, cy: *cy, sx: *sx, sy: *sy, h: side, upper };
                out.push(Panel::new(chart, 0.0, 1.0, 0.0, 1.0, 0));
            }
            // the rest of the cell: a strip beyond the square along x, and
            // the part above the square along y
            let span = |c: f64, s: f64, a: f64, b: f64| {
                let (p, q) = (c + s * a, c + s * b);
                (p.min(q), p.max(q))
            };
            if w > side {
                let (xa, xb) = span(*cx, *sx, side, w);
                let (ya, yb) = span(*cy, *sy, 0.0, h);
                out.push(Panel::new(Chart::Plain, xa, xb, ya, yb, 0));
            }
            if h > side {
                let (xa, xb) = span(*cx, *sx, 0.0, side);
                let (ya, yb) = span(*cy, *sy, side, h);
                out.push(Panel::new(Chart::Plain, xa, xb, ya, yb, 0));
            }
        }
        _ => {
            let halves = if w >= h {
                let m = 0.5 * (cell.x0 + cell.x1);
                [Rect { x1: m, ..cell }, Rect { x0: m, ..cell }]
            } else {
                let m = 0.5 * (cell.y0 + cell.y1);
                [Rect { y1: m, ..cell }, Rect { y0: m, ..cell }]
            };
            for half in halves {
                decompose(half, singular, exclusion, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tight() -> QuadratureConfig {
        QuadratureConfig { abs_tol: 1e-12, rel_tol: 1e-11, ..QuadratureConfig::default() }
    }

    const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    #[test]
    fn constant_and_polynomial() {
        let e = integrate_2d(|_, _| 1.0, Region::Rect(UNIT), &[], &tight()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-14);
        let r = Rect { x0: -1.0, x1: 2.0, y0: 0.5, y1: 1.5 };
        let e = integrate_2d(|x, y| x * x * y, Region::Rect(r), &[], &tight()).unwrap();
        assert!((e.value - 3.0).abs() < 1e-13);
    }

    #[test]
    fn independent_normal_quadrant() {
        let phi = |x: f64, y: f64| (-(x * x + y * y) / 2.0).exp() / (2.0 * PI);
        let e = integrate_2d(phi, Region::Quadrant { x0: 0.0, y0: 0.0 }, &[], &tight()).unwrap();
        assert!((e.value - 0.25).abs() < 1e-11, "{e:?}");
        let fixed = QuadratureConfig { truncation: TruncationPolicy::Fixed(12.0), ..tight() };
        let e = integrate_2d(phi, Region::Quadrant { x0: 0.0, y0: 0.0 }, &[], &fixed).unwrap();
        assert!((e.value - 0.25).abs() < 1e-11, "{e:?}");
    }

    #[test]
    fn inverse_radius_singularity() {
        // int over [0,1]^2 of 1/r = 2 asinh(1)
        let f = |x: f64, y: f64| 1.0 / x.hypot(y);
        let e = integrate_2d(f, Region::Rect(UNIT), &[(0.0, 0.0)], &tight()).unwrap();
        assert!((e.value - 2.0 * 1f64.asinh()).abs() < 1e-10, "{e:?}");
        // same singularity in the interior of a symmetric square: 4x the above
        let r = Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };
        let e = integrate_2d(f, Region::Rect(r), &[(0.0, 0.0)], &tight()).unwrap();
        assert!((e.value - 8.0 * 1f64.asinh()).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn log_singularity_on_edge() {
        // int over [-1,1]x[0,1] of ln(x^2+y^2) = 2 (ln 2 - 3 + pi/2)
        let r = Rect { x0: -1.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        let f = |x: f64, y: f64| (x * x + y * y).ln();
        let e = integrate_2d(f, Region::Rect(r), &[(0.0, 0.0)], &tight()).unwrap();
        let exact = 2.0 * (2f64.ln() - 3.0 + PI / 2.0);
        assert!((e.value - exact).abs() < 1e-10, "{e:?} vs {exact}");
    }

    #[test]
    fn exclusion_radius_zero_covers_whole_cell() {
        let cfg = QuadratureConfig { singularity_exclusion_radius: 0.0, ..tight() };
        let f = |x: f64, y: f64| 1.0 / x.hypot(y);
        let r = Rect { x0: 0.0, x1: 2.0, y0: 0.0, y1: 1.0 };
        let e = integrate_2d(f, Region::Rect(r), &[(0.0, 0.0)], &cfg).unwrap();
        // int_0^2 int_0^1 1/r = 2 asinh(1/2) + asinh(2)
        let exact = 2.0 * 0.5f64.asinh() + 2f64.asinh();
        assert!((e.value - exact).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let f = |x: f64, y: f64| (x * y).sin() / (x.hypot(y)).sqrt();
        let r = Rect { x0: -2.0, x1: 3.0, y0: -1.0, y1: 2.0 };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| integrate_2d(f, Region::Rect(r), &[(0.0, 0.0)], &tight()).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.value.to_bits(), four.value.to_bits());
        assert_eq!(one.error.to_bits(), four.error.to_bits());
        assert_eq!(one.subdivisions, four.subdivisions);
    }

    #[test]
    fn max_subdivisions_carries_estimate() {
        let cfg = QuadratureConfig { max_subdivisions: 2, abs_tol: 1e-15, rel_tol: 1e-15, ..tight() };
        let f = |x: f64, y: f64| (x.hypot(y) - 0.5).abs().sqrt();
        let err = integrate_2d(f, Region::Rect(UNIT), &[], &cfg).unwrap_err();
        let best = err.best_estimate().unwrap();
        assert!(best.subdivisions <= 2);
        assert!(best.value > 0.0);
    }

    #[test]
    fn non_finite_off_singular_set_is_an_error() {
        let f = |x: f64, _y: f64| if x > 0.5 { f64::NAN } else { 1.0 };
        let err = integrate_2d(f, Region::Rect(UNIT), &[], &tight()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteSample { .. }));
    }
}
