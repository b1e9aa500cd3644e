//! Periodic tensor-product interpolation of grid samples at arbitrary points.

use crate::grid::{PeriodicGrid, ScalarField, VectorField};

/// Interpolation scheme. `Cubic` is 4-point Lagrange per axis (fourth order
/// for smooth data); `Linear` is bilinear (second order, max-preserving).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Cubic,
    Linear,
}

impl Interpolation {
    /// Convergence order for smooth data.
    pub fn order(self) -> u32 {
        match self {
            Interpolation::Cubic => 4,
            Interpolation::Linear => 2,
        }
    }

    /// Tensor-product Lebesgue constant: `|interp f| <= lebesgue * max |f|`.
    pub fn lebesgue_constant(self) -> f64 {
        match self {
            Interpolation::Cubic => 1.25 * 1.25,
            Interpolation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Interpolation::Cubic => "cubic",
            Interpolation::Linear => "linear",
        }
    }
}

#[derive(Clone, Copy)]
struct Axis {
    idx: [usize; 4],
    w: [f64; 4],
    dw: [f64; 4],
}

#[inline]
fn axis(x: f64, h: f64, n: usize, length: f64, scheme: Interpolation) -> Axis {
    let xr = x.rem_euclid(length);
    let mut s = xr / h;
    // land exactly on nodes despite rounding in `x / h`
    let r = s.round();
    if (s - r).abs() <= 1e-12 * (1.0 + r) {
        s = r;
    }
    let fl = s.floor();
    let t = s - fl;
    let base = (fl as usize) % n;
    match scheme {
        Interpolation::Cubic => {
            let (a, b, c, d) = (t + 1.0, t, t - 1.0, t - 2.0);
            let w = [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0];
            let dw = [
                -(c * d + b * d + b * c) / 6.0,
                (c * d + a * d + a * c) / 2.0,
                -(b * d + a * d + a * b) / 2.0,
                (b * c + a * c + a * b) / 6.0,
            ];
            let idx = [(base + n - 1) % n, base, (base + 1) % n, (base + 2) % n];
            Axis { idx, w, dw: dw.map(|v| v / h) }
        }
        Interpolation::Linear => Axis {
            idx: [base, (base + 1) % n, base, base],
            w: [1.0 - t, t, 0.0, 0.0],
            dw: [-1.0 / h, 1.0 / h, 0.0, 0.0],
        },
    }
}

// Sums are formed as `f_anchor + sum w (f - f_anchor)` so constants are
// reproduced exactly.
#[inline]
fn anchor(scheme: Interpolation) -> usize {
    match scheme {
        Interpolation::Cubic => 1,
        Interpolation::Linear => 0,
    }
}

#[inline]
fn width(scheme: Interpolation) -> usize {
    match scheme {
        Interpolation::Cubic => 4,
        Interpolation::Linear => 2,
    }
}

/// Evaluate several sample planes of the same grid at the given points.
pub(crate) fn sample(
    grid: &PeriodicGrid,
    comps: &[&[f64]],
    pts: &[[f64; 2]],
    scheme: Interpolation,
) -> Vec<Vec<f64>> {
    let [h1, h2] = grid.spacing();
    let (n1, n2, len) = (grid.n1(), grid.n2(), grid.length());
    let (wd, an) = (width(scheme), anchor(scheme));
    let mut out: Vec<Vec<f64>> = comps.iter().map(|_| Vec::with_capacity(pts.len())).collect();
    for p in pts {
        let a1 = axis(p[0], h1, n1, len, scheme);
        let a2 = axis(p[1], h2, n2, len, scheme);
        for (c, o) in comps.iter().zip(out.iter_mut()) {
            let mut rows = [0.0; 4];
            for (i, r) in rows.iter_mut().enumerate().take(wd) {
                let row = a1.idx[i] * n2;
                let f0 = c[row + a2.idx[an]];
                let mut acc = 0.0;
                for j in 0..wd {
                    acc += a2.w[j] * (c[row + a2.idx[j]] - f0);
                }
                *r = f0 + acc;
            }
            let mut acc = 0.0;
            for i in 0..wd {
                acc += a1.w[i] * (rows[i] - rows[an]);
            }
            o.push(rows[an] + acc);
        }
    }
    out
}

/// Value and gradient of the interpolant of one sample plane at `p`.
pub(crate) fn sample_with_gradient(
    grid: &PeriodicGrid,
    comp: &[f64],
    p: [f64; 2],
    scheme: Interpolation,
) -> (f64, [f64; 2]) {
    let [h1, h2] = grid.spacing();
    let (n1, n2, len) = (grid.n1(), grid.n2(), grid.length());
    let a1 = axis(p[0], h1, n1, len, scheme);
    let a2 = axis(p[1], h2, n2, len, scheme);
    let wd = width(scheme);
    let (mut v, mut g1, mut g2) = (0.0, 0.0, 0.0);
    for i in 0..wd {
        let row = a1.idx[i] * n2;
        let (mut r, mut rd) = (0.0, 0.0);
        for j in 0..wd {
            let f = comp[row + a2.idx[j]];
            r += a2.w[j] * f;
            rd += a2.dw[j] * f;
        }
        v += a1.w[i] * r;
        g1 += a1.dw[i] * r;
        g2 += a1.w[i] * rd;
    }
    (v, [g1, g2])
}

pub fn interpolate(f: &ScalarField, pts: &[[f64; 2]], scheme: Interpolation) -> Vec<f64> {
    sample(f.grid(), &[f.values()], pts, scheme).pop().unwrap_or_default()
}

pub fn interpolate_vector(v: &VectorField, pts: &[[f64; 2]], scheme: Interpolation) -> [Vec<f64>; 2] {
    let mut out = sample(v.grid(), &[v.component(0), v.component(1)], pts, scheme);
    let y = out.pop().unwrap_or_default();
    let x = out.pop().unwrap_or_default();
    [x, y]
}

/// Grid points displaced by a vector field: `x + d(x)`.
pub(crate) fn displaced_points(d: &VectorField) -> Vec<[f64; 2]> {
    let g = d.grid();
    let mut pts = g.points();
    for (k, p) in pts.iter_mut().enumerate() {
        let [a, b] = d.at(k);
        p[0] += a;
        p[1] += b;
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constants_are_reproduced_exactly() {
        let g = PeriodicGrid::square(8, 2.0 * PI).unwrap();
        let f = ScalarField::constant(&g, 3.25);
        let pts = [[0.1, 7.3], [-4.0, 1e-9], [100.0, -50.0]];
        for scheme in [Interpolation::Cubic, Interpolation::Linear] {
            for v in interpolate(&f, &pts, scheme) {
                assert_eq!(v, 3.25);
            }
        }
    }

    #[test]
    fn periodic_shift_gives_identical_values() {
        let g = PeriodicGrid::square(12, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |[x, y]| (x + 2.0 * y).sin() + x.cos());
        // dyadic coordinates so that x + L is representable exactly
        let pts = [[0.5, 1.25], [3.0625, 0.015625]];
        let shifted: Vec<_> = pts.iter().map(|p| [p[0] + g.length(), p[1]]).collect();
        for scheme in [Interpolation::Cubic, Interpolation::Linear] {
            assert_eq!(interpolate(&f, &pts, scheme), interpolate(&f, &shifted, scheme));
        }
    }

    #[test]
    fn exact_at_nodes() {
        let g = PeriodicGrid::new(8, 6, 3.0).unwrap();
        let f = ScalarField::from_fn(&g, |[x, y]| (x * y).sin() + 0.1 * x);
        for scheme in [Interpolation::Cubic, Interpolation::Linear] {
            assert_eq!(interpolate(&f, &g.points(), scheme), f.values());
        }
    }

    fn refinement_slope(scheme: Interpolation) -> f64 {
        let pts: Vec<[f64; 2]> = (0..97).map(|k| [0.1 + 0.0613 * k as f64, 0.37 * k as f64]).collect();
        let mut errs = Vec::new();
        let ns = [16usize, 32, 64, 128];
        for &n in &ns {
            let g = PeriodicGrid::square(n, 2.0 * PI).unwrap();
            let f = ScalarField::from_fn(&g, |[x, _]| x.sin());
            let v = interpolate(&f, &pts, scheme);
            let e = pts.iter().zip(&v).fold(0.0f64, |m, (p, v)| m.max((p[0].sin() - v).abs()));
            errs.push(e);
        }
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        -crate::stats::fit_slope(&xs, &ys)
    }

    #[test]
    fn refinement_order_matches_scheme() {
        for scheme in [Interpolation::Cubic, Interpolation::Linear] {
            let slope = refinement_slope(scheme);
            assert!(slope >= scheme.order() as f64 - 0.3, "{scheme:?}: {slope}");
        }
    }

    #[test]
    fn gradient_of_interpolant_is_consistent() {
        let g = PeriodicGrid::square(32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |[x, y]| x.sin() * y.cos());
        let p = [1.1, 2.3];
        let (v, d) = sample_with_gradient(&g, f.values(), p, Interpolation::Cubic);
        assert!((v - p[0].sin() * p[1].cos()).abs() < 1e-4);
        assert!((d[0] - p[0].cos() * p[1].cos()).abs() < 1e-3);
        assert!((d[1] + p[0].sin() * p[1].sin()).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn linear_in_the_data(a in -3.0f64..3.0, x in -10.0f64..10.0, y in -10.0f64..10.0) {
            let g = PeriodicGrid::square(8, 2.0 * PI).unwrap();
            let f = ScalarField::from_fn(&g, |[p, q]| (p + q).sin());
            let h = ScalarField::from_fn(&g, |[p, q]| (2.0 * p).cos() * q.sin());
            let mut c = f.scaled(a);
            c.axpy(1.0, &h);
            let pts = [[x, y]];
            for scheme in [Interpolation::Cubic, Interpolation::Linear] {
                let lhs = interpolate(&c, &pts, scheme)[0];
                let rhs = a * interpolate(&f, &pts, scheme)[0] + interpolate(&h, &pts, scheme)[0];
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn periodic_in_both_axes(x in -10.0f64..10.0, y in -10.0f64..10.0) {
            let g = PeriodicGrid::square(10, 2.0 * PI).unwrap();
            let f = ScalarField::from_fn(&g, |[p, q]| (p + 2.0 * q).sin());
            let l = g.length();
            let a = interpolate(&f, &[[x, y]], Interpolation::Cubic)[0];
            let b = interpolate(&f, &[[x + l, y - 2.0 * l]], Interpolation::Cubic)[0];
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
