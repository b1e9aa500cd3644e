//! One replica's stochastic flow of diffeomorphisms.
//!
//! The forward map `X(y) = y + lambda(y)` and its spatial inverse
//! `Y(x) = x + mu(x)` are stored through their periodic displacements. The
//! noise is additive and spatially uniform, so each time step is a
//! deterministic one-step map followed by a translation. The inverse is
//! advanced by composition with the inverse of that one-step map; the
//! scattered-data inversion of the forward samples is kept as an independent
//! cross-check.

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, TensorField, VectorField};
use crate::interp::{self, displaced_points, Interpolation};
use crate::spectral;

/// Time integrator for the deterministic part of `dX = u(X) dt + sqrt(2 nu) dW`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    EulerMaruyama,
    /// Trapezoidal predictor-corrector on the (frozen) drift.
    Heun,
}

/// How `grad^T Y` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GradientRoute {
    /// Spectral derivative of `mu` on the reference mesh.
    #[default]
    SpectralInverse,
    /// Invert `grad X = I + grad lambda` on the mesh, then interpolate at `Y(x)`.
    ForwardAdjugate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    /// Convergence tolerance as a fraction of the box length.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPoint {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub integrator: Integrator,
    pub interp: Interpolation,
    pub fixed_point: FixedPoint,
    /// Upper bound on `h * max|grad u|` for a step to be accepted.
    pub contraction_limit: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::default(),
            interp: Interpolation::default(),
            fixed_point: FixedPoint::default(),
            contraction_limit: 0.5,
        }
    }
}

/// Largest pointwise operator norm of the velocity gradient.
pub fn max_velocity_gradient(u: &VectorField) -> f64 {
    spectral::jacobian(u).max_operator_norm()
}

/// Drift increment `h * u(z)` (Euler) or the Heun average, at the given points.
fn drift(u: &VectorField, pts: &[[f64; 2]], h: f64, opts: &StepOptions) -> [Vec<f64>; 2] {
    let [a, b] = interp::interpolate_vector(u, pts, opts.interp);
    match opts.integrator {
        Integrator::EulerMaruyama => [a.iter().map(|v| h * v).collect(), b.iter().map(|v| h * v).collect()],
        Integrator::Heun => {
            let pred: Vec<[f64; 2]> =
                pts.iter().enumerate().map(|(k, p)| [p[0] + h * a[k], p[1] + h * b[k]]).collect();
            let [c, d] = interp::interpolate_vector(u, &pred, opts.interp);
            [
                a.iter().zip(&c).map(|(x, y)| 0.5 * h * (x + y)).collect(),
                b.iter().zip(&d).map(|(x, y)| 0.5 * h * (x + y)).collect(),
            ]
        }
    }
}

/// Displacement `d` with `s(x + d(x)) = x`, where `s(z) = z + h u(z) + noise`
/// is the one-step map (`noise` is the position shift `sqrt(2 nu) dW`).
///
/// Solved by the fixed-point iteration `d <- -drift(x + d) - noise`, which
/// contracts when `h * max|grad u| < 1`.
pub fn one_step_inverse(u: &VectorField, h: f64, noise: [f64; 2], opts: &StepOptions) -> Result<VectorField> {
    let g = u.grid();
    let tol = opts.fixed_point.tol * g.length();
    let base = g.points();
    let mut d = VectorField::constant(g, [-noise[0], -noise[1]]);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.fixed_point.max_iter {
        let pts: Vec<[f64; 2]> = base.iter().enumerate().map(|(k, p)| {
            let [a, b] = d.at(k);
            [p[0] + a, p[1] + b]
        }).collect();
        let [sx, sy] = drift(u, &pts, h, opts);
        let nx: Vec<f64> = sx.iter().map(|v| -v - noise[0]).collect();
        let ny: Vec<f64> = sy.iter().map(|v| -v - noise[1]).collect();
        residual = (0..g.len()).fold(0.0, |m, k| {
            let [a, b] = d.at(k);
            m.max((nx[k] - a).hypot(ny[k] - b))
        });
        d = VectorField::from_raw(g, nx, ny);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(d);
        }
    }
    Err(Error::NoConvergence { iterations: opts.fixed_point.max_iter, residual })
}

/// Forward and inverse displacement of one replica, plus its accumulated
/// Brownian shift.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    /// `lambda(y) = X(y) - y`
    pub lambda: VectorField,
    /// `mu(x) = Y(x) - x`
    pub mu: VectorField,
    /// Accumulated position shift `sqrt(2 nu) W_t`.
    pub brownian: [f64; 2],
    pub t: f64,
}

impl FlowMap {
    pub fn identity(grid: &PeriodicGrid) -> Self {
        Self { lambda: VectorField::zeros(grid), mu: VectorField::zeros(grid), brownian: [0.0; 2], t: 0.0 }
    }

    /// Pure translation `X(y) = y + c`.
    pub fn translation(grid: &PeriodicGrid, c: [f64; 2]) -> Self {
        Self {
            lambda: VectorField::constant(grid, c),
            mu: VectorField::constant(grid, [-c[0], -c[1]]),
            brownian: [0.0; 2],
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.lambda.grid()
    }

    /// `X(y)` at the grid nodes (unwrapped).
    pub fn forward_points(&self) -> Vec<[f64; 2]> {
        displaced_points(&self.lambda)
    }

    /// `Y(x)` at the grid nodes (unwrapped).
    pub fn inverse_points(&self) -> Vec<[f64; 2]> {
        displaced_points(&self.mu)
    }

    /// One step of `dX = u(X) dt + noise` with the velocity frozen over the step.
    ///
    /// Rejects the step if `h * max|grad u|` exceeds the contraction limit.
    pub fn step(&self, u: &VectorField, h: f64, noise: [f64; 2], opts: &StepOptions) -> Result<FlowMap> {
        self.step_with_gradient_bound(u, max_velocity_gradient(u), h, noise, opts)
    }

    pub(crate) fn step_with_gradient_bound(
        &self,
        u: &VectorField,
        grad_bound: f64,
        h: f64,
        noise: [f64; 2],
        opts: &StepOptions,
    ) -> Result<FlowMap> {
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::Precondition(format!("time step must be positive, got {h}")));
        }
        let product = h * grad_bound;
        if product > opts.contraction_limit {
            return Err(Error::StepRejected {
                product,
                limit: opts.contraction_limit,
                max_h: opts.contraction_limit / grad_bound,
            });
        }
        let g = self.grid();

        let [fx, fy] = drift(u, &self.forward_points(), h, opts);
        let mut lambda = self.lambda.clone();
        for (k, (a, b)) in fx.iter().zip(&fy).enumerate() {
            lambda.component_mut(0)[k] += a + noise[0];
            lambda.component_mut(1)[k] += b + noise[1];
        }

        let d = one_step_inverse(u, h, noise, opts)?;
        let [mx, my] = interp::interpolate_vector(&self.mu, &displaced_points(&d), opts.interp);
        let mu = VectorField::from_raw(
            g,
            mx.iter().zip(d.component(0)).map(|(a, b)| a + b).collect(),
            my.iter().zip(d.component(1)).map(|(a, b)| a + b).collect(),
        );
        lambda.check_finite()?;
        mu.check_finite()?;
        Ok(FlowMap {
            lambda,
            mu,
            brownian: [self.brownian[0] + noise[0], self.brownian[1] + noise[1]],
            t: self.t + h,
        })
    }

    /// `f o Y` sampled on the grid.
    pub fn pullback(&self, f: &ScalarField, scheme: Interpolation) -> ScalarField {
        ScalarField::from_raw(self.grid(), interp::interpolate(f, &self.inverse_points(), scheme))
    }

    pub fn pullback_vector(&self, v: &VectorField, scheme: Interpolation) -> VectorField {
        let [a, b] = interp::interpolate_vector(v, &self.inverse_points(), scheme);
        VectorField::from_raw(self.grid(), a, b)
    }

    /// `grad^T Y = I + grad^T mu` on the grid.
    pub fn grad_transpose_inverse(&self, route: GradientRoute, scheme: Interpolation) -> TensorField {
        let g = self.grid();
        match route {
            GradientRoute::SpectralInverse => {
                let j = spectral::jacobian(&self.mu);
                let c = |a: usize, b: usize| -> Vec<f64> {
                    let d = if a == b { 1.0 } else { 0.0 };
                    j.component(b, a).iter().map(|v| d + v).collect()
                };
                TensorField::from_raw(g, [c(0, 0), c(0, 1), c(1, 0), c(1, 1)])
            }
            GradientRoute::ForwardAdjugate => {
                let j = spectral::jacobian(&self.lambda);
                let n = g.len();
                let mut inv: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
                for k in 0..n {
                    let [[a, b], [c, d]] = j.at(k);
                    let (a, d) = (a + 1.0, d + 1.0);
                    let det = a * d - b * c;
                    inv[0].push(d / det);
                    inv[1].push(-b / det);
                    inv[2].push(-c / det);
                    inv[3].push(a / det);
                }
                let refs: Vec<&[f64]> = inv.iter().map(|v| v.as_slice()).collect();
                let s = interp::sample(g, &refs, &self.inverse_points(), scheme);
                // transpose of grad Y
                TensorField::from_raw(g, [s[0].clone(), s[2].clone(), s[1].clone(), s[3].clone()])
            }
        }
    }

    /// `max_x |X(Y(x)) - x|`.
    pub fn composition_residual(&self, scheme: Interpolation) -> f64 {
        let [lx, ly] = interp::interpolate_vector(&self.lambda, &self.inverse_points(), scheme);
        (0..self.grid().len()).fold(0.0, |m, k| {
            let [a, b] = self.mu.at(k);
            m.max((a + lx[k]).hypot(b + ly[k]))
        })
    }

    /// `det grad X` on the grid, from spectral derivatives of `lambda`.
    pub fn forward_jacobian_det(&self) -> ScalarField {
        let j = spectral::jacobian(&self.lambda);
        let v = (0..self.grid().len())
            .map(|k| {
                let [[a, b], [c, d]] = j.at(k);
                (1.0 + a) * (1.0 + d) - b * c
            })
            .collect();
        ScalarField::from_raw(self.grid(), v)
    }

    /// Checks that every cell of the deformed forward mesh is positively
    /// oriented (no fold-over).
    pub fn check_forward_mesh(&self) -> Result<()> {
        let mesh = ForwardMesh::new(self);
        for i1 in 0..mesh.n1 as isize {
            for i2 in 0..mesh.n2 as isize {
                mesh.cell(i1, i2)?;
            }
        }
        Ok(())
    }

    /// Inverse displacement recovered from `lambda` alone: locate each grid
    /// node in the deformed forward mesh, invert the bilinear cell map, then
    /// polish with Newton iterations on the interpolated forward map.
    pub fn invert(&self, scheme: Interpolation) -> Result<VectorField> {
        let g = self.grid();
        let mesh = ForwardMesh::new(self);
        let (n1, n2) = (g.n1() as isize, g.n2() as isize);
        let [h1, h2] = g.spacing();
        let len = g.length();
        let dup_tol = 1e-6 * len;
        // preimage y and unwrapped target x for each node
        let mut found: Vec<Option<([f64; 2], [f64; 2])>> = vec![None; g.len()];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let cell = mesh.cell(i1, i2)?;
                let (lo, hi) = cell.bbox();
                let (a0, a1) = ((lo[0] / h1).ceil() as isize, (hi[0] / h1).floor() as isize);
                let (b0, b1) = ((lo[1] / h2).ceil() as isize, (hi[1] / h2).floor() as isize);
                for a in a0..=a1 {
                    for b in b0..=b1 {
                        let target = [a as f64 * h1, b as f64 * h2];
                        let Some([s, t]) = cell.inverse(target) else { continue };
                        let y = [(i1 as f64 + s) * h1, (i2 as f64 + t) * h2];
                        let k = g.index(a.rem_euclid(n1) as usize, b.rem_euclid(n2) as usize);
                        let mu = [y[0] - target[0], y[1] - target[1]];
                        match found[k] {
                            None => found[k] = Some((y, target)),
                            Some((y0, t0)) => {
                                let m0 = [y0[0] - t0[0], y0[1] - t0[1]];
                                if (mu[0] - m0[0]).hypot(mu[1] - m0[1]) > dup_tol {
                                    return Err(Error::MeshDegenerate(format!(
                                        "node ({}, {}) has two preimages",
                                        a.rem_euclid(n1),
                                        b.rem_euclid(n2)
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut mx = Vec::with_capacity(g.len());
        let mut my = Vec::with_capacity(g.len());
        for (k, entry) in found.into_iter().enumerate() {
            let Some((mut y, x)) = entry else {
                return Err(Error::MeshDegenerate(format!("node {k} not covered by the forward mesh")));
            };
            for _ in 0..30 {
                let (l1, d1) = interp::sample_with_gradient(g, self.lambda.component(0), y, scheme);
                let (l2, d2) = interp::sample_with_gradient(g, self.lambda.component(1), y, scheme);
                let f = [y[0] + l1 - x[0], y[1] + l2 - x[1]];
                if f[0].hypot(f[1]) <= 1e-14 * len {
                    break;
                }
                let (a, b, c, d) = (1.0 + d1[0], d1[1], d2[0], 1.0 + d2[1]);
                let det = a * d - b * c;
                if det <= 0.0 {
                    return Err(Error::MeshDegenerate(format!("non-positive Jacobian near node {k}")));
                }
                y[0] -= (d * f[0] - b * f[1]) / det;
                y[1] -= (-c * f[0] + a * f[1]) / det;
            }
            mx.push(y[0] - x[0]);
            my.push(y[1] - x[1]);
        }
        Ok(VectorField::from_raw(g, mx, my))
    }
}

struct ForwardMesh<'a> {
    map: &'a FlowMap,
    n1: usize,
    n2: usize,
    h: [f64; 2],
}

struct Cell {
    p00: [f64; 2],
    e1: [f64; 2],
    e2: [f64; 2],
    c: [f64; 2],
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl<'a> ForwardMesh<'a> {
    fn new(map: &'a FlowMap) -> Self {
        let g = map.grid();
        Self { map, n1: g.n1(), n2: g.n2(), h: g.spacing() }
    }

    /// Unwrapped image of node `(i1, i2)`; indices may run one past the grid.
    fn image(&self, i1: isize, i2: isize) -> [f64; 2] {
        let k = (i1.rem_euclid(self.n1 as isize) as usize) * self.n2 + i2.rem_euclid(self.n2 as isize) as usize;
        let [a, b] = self.map.lambda.at(k);
        [i1 as f64 * self.h[0] + a, i2 as f64 * self.h[1] + b]
    }

    fn cell(&self, i1: isize, i2: isize) -> Result<Cell> {
        let p00 = self.image(i1, i2);
        let p10 = self.image(i1 + 1, i2);
        let p01 = self.image(i1, i2 + 1);
        let p11 = self.image(i1 + 1, i2 + 1);
        let sub = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
        let corners = [
            cross(sub(p10, p00), sub(p01, p00)),
            cross(sub(p11, p10), sub(p00, p10)),
            cross(sub(p01, p11), sub(p10, p11)),
            cross(sub(p00, p01), sub(p11, p01)),
        ];
        if corners.iter().any(|&c| c <= 0.0) {
            return Err(Error::MeshDegenerate(format!("forward cell ({i1}, {i2}) is folded")));
        }
        let e1 = sub(p10, p00);
        let e2 = sub(p01, p00);
        let c = [p11[0] - p10[0] - p01[0] + p00[0], p11[1] - p10[1] - p01[1] + p00[1]];
        Ok(Cell { p00, e1, e2, c })
    }
}

impl Cell {
    fn eval(&self, s: f64, t: f64) -> [f64; 2] {
        [
            self.p00[0] + s * self.e1[0] + t * self.e2[0] + s * t * self.c[0],
            self.p00[1] + s * self.e1[1] + t * self.e2[1] + s * t * self.c[1],
        ]
    }

    fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let pts = [self.eval(0.0, 0.0), self.eval(1.0, 0.0), self.eval(0.0, 1.0), self.eval(1.0, 1.0)];
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in &pts[1..] {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Bilinear parameters of `x` if it lies in the (closed) cell.
    fn inverse(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let (mut s, mut t) = (0.5, 0.5);
        for _ in 0..30 {
            let p = self.eval(s, t);
            let f = [p[0] - x[0], p[1] - x[1]];
            let js = [self.e1[0] + t * self.c[0], self.e1[1] + t * self.c[1]];
            let jt = [self.e2[0] + s * self.c[0], self.e2[1] + s * self.c[1]];
            let det = cross(js, jt);
            let ds = (f[0] * jt[1] - f[1] * jt[0]) / det;
            let dt = (js[0] * f[1] - js[1] * f[0]) / det;
            s -= ds;
            t -= dt;
            if ds.abs() + dt.abs() < 1e-14 {
                break;
            }
        }
        let eps = 1e-9;
        ((-eps..=1.0 + eps).contains(&s) && (-eps..=1.0 + eps).contains(&t)).then_some([s, t])
    }
}
