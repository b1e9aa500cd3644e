//! Uniform periodic grid on `[0, L)^2` and the sampled fields that live on it.
//!
//! Samples are stored row-major with the first coordinate as the slow index:
//! sample `(i1, i2)` sits at `x = (i1 * h1, i2 * h2)` and has flat index
//! `i1 * n2 + i2`. Vector and tensor fields keep one plane per component.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Plans {
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

/// `n1 x n2` uniform sampling of the periodic box `[0, L)^2`.
///
/// Cheap to clone; FFT plans are shared between clones.
#[derive(Clone)]
pub struct PeriodicGrid {
    n1: usize,
    n2: usize,
    length: f64,
    plans: Arc<Plans>,
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2 && self.length == other.length
    }
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("length", &self.length)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(n1: usize, n2: usize, length: f64) -> Result<Self> {
        for n in [n1, n2] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "points per axis must be even and >= 4, got {n}"
                )));
            }
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
        };
        Ok(Self { n1, n2, length, plans: Arc::new(plans) })
    }

    pub fn square(n: usize, length: f64) -> Result<Self> {
        Self::new(n, n, length)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> [f64; 2] {
        [self.length / self.n1 as f64, self.length / self.n2 as f64]
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }

    #[inline]
    pub fn point(&self, i1: usize, i2: usize) -> [f64; 2] {
        let [h1, h2] = self.spacing();
        [i1 as f64 * h1, i2 as f64 * h2]
    }

    /// All sample points in storage order.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(self.len());
        for i1 in 0..self.n1 {
            for i2 in 0..self.n2 {
                pts.push(self.point(i1, i2));
            }
        }
        pts
    }

    /// Signed integer mode number of FFT bin `j` on an axis with `n` points.
    /// The Nyquist bin maps to `+n/2`.
    #[inline]
    pub fn mode(j: usize, n: usize) -> i64 {
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Angular wavenumber used by first derivatives; the Nyquist bin is zeroed.
    #[inline]
    pub(crate) fn deriv_wavenumber(&self, j: usize, n: usize) -> f64 {
        if j == n / 2 {
            0.0
        } else {
            2.0 * PI / self.length * Self::mode(j, n) as f64
        }
    }

    /// Angular wavenumber including the Nyquist bin (used for `-|k|^2`).
    #[inline]
    pub(crate) fn full_wavenumber(&self, j: usize, n: usize) -> f64 {
        2.0 * PI / self.length * Self::mode(j, n) as f64
    }

    pub(crate) fn k1(&self) -> Vec<f64> {
        (0..self.n1).map(|j| self.deriv_wavenumber(j, self.n1)).collect()
    }

    pub(crate) fn k2(&self) -> Vec<f64> {
        (0..self.n2).map(|j| self.deriv_wavenumber(j, self.n2)).collect()
    }

    /// Unnormalised 2D forward DFT of real samples.
    pub(crate) fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, true);
        buf
    }

    /// Inverse 2D DFT (normalised by `1/(n1 n2)`), keeping the real part.
    pub(crate) fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, false);
        let scale = 1.0 / self.len() as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let (n1, n2) = (self.n1, self.n2);
        let (p1, p2) = if forward {
            (&self.plans.fwd1, &self.plans.fwd2)
        } else {
            (&self.plans.inv1, &self.plans.inv2)
        };
        p2.process(buf);
        let mut cols = vec![Complex64::new(0.0, 0.0); buf.len()];
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                cols[i2 * n1 + i1] = buf[i1 * n2 + i2];
            }
        }
        p1.process(&mut cols);
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                buf[i1 * n2 + i2] = cols[i2 * n1 + i1];
            }
        }
    }
}

/// Common view over scalar, vector and tensor fields.
pub trait Field {
    fn grid(&self) -> &PeriodicGrid;
    fn components(&self) -> &[Vec<f64>];
}

fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_same_grid(a: &PeriodicGrid, b: &PeriodicGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{a:?} vs {b:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: [Vec<f64>; 1],
}

impl ScalarField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self { grid: grid.clone(), values: [vec![0.0; grid.len()]] }
    }

    pub fn constant(grid: &PeriodicGrid, c: f64) -> Self {
        Self { grid: grid.clone(), values: [vec![c; grid.len()]] }
    }

    pub fn from_values(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite("scalar field", &values)?;
        Ok(Self { grid: grid.clone(), values: [values] })
    }

    pub(crate) fn from_raw(grid: &PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values: [values] }
    }

    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid: grid.clone(), values: [values] }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values[0]
    }

    pub fn into_values(self) -> Vec<f64> {
        let [v] = self.values;
        v
    }

    pub fn mean(&self) -> f64 {
        self.values[0].iter().sum::<f64>() / self.grid.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values[0].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite("scalar field", &self.values[0])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_raw(&self.grid, self.values[0].iter().map(|v| v * s).collect())
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values[0].iter_mut().for_each(|v| *v += c);
    }

    /// `self + s * other`
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        for (a, b) in self.values[0].iter_mut().zip(other.values()) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        let v = self.values[0].iter().zip(other.values()).map(|(a, b)| a - b).collect();
        Self::from_raw(&self.grid, v)
    }
}

impl Field for ScalarField {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: PeriodicGrid,
    comps: [Vec<f64>; 2],
}

impl VectorField {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self { grid: grid.clone(), comps: [vec![0.0; grid.len()], vec![0.0; grid.len()]] }
    }

    pub fn constant(grid: &PeriodicGrid, c: [f64; 2]) -> Self {
        Self { grid: grid.clone(), comps: [vec![c[0]; grid.len()], vec![c[1]; grid.len()]] }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Result<Self> {
        check_same_grid(x.grid(), y.grid())?;
        let grid = x.grid.clone();
        Ok(Self { grid, comps: [x.into_values(), y.into_values()] })
    }

    pub fn from_values(grid: &PeriodicGrid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let x = ScalarField::from_values(grid, x)?;
        let y = ScalarField::from_values(grid, y)?;
        Self::from_components(x, y)
    }

    pub(crate) fn from_raw(grid: &PeriodicGrid, x: Vec<f64>, y: Vec<f64>) -> Self {
        debug_assert!(x.len() == grid.len() && y.len() == grid.len());
        Self { grid: grid.clone(), comps: [x, y] }
    }

    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut x = Vec::with_capacity(grid.len());
        let mut y = Vec::with_capacity(grid.len());
        for p in grid.points() {
            let v = f(p);
            x.push(v[0]);
            y.push(v[1]);
        }
        Self { grid: grid.clone(), comps: [x, y] }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn component(&self, a: usize) -> &[f64] {
        &self.comps[a]
    }

    pub fn component_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.comps[a]
    }

    pub fn scalar(&self, a: usize) -> ScalarField {
        ScalarField::from_raw(&self.grid, self.comps[a].clone())
    }

    pub fn into_components(self) -> [Vec<f64>; 2] {
        self.comps
    }

    #[inline]
    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.comps[0][k], self.comps[1][k]]
    }

    pub fn mean(&self) -> [f64; 2] {
        let n = self.grid.len() as f64;
        [self.comps[0].iter().sum::<f64>() / n, self.comps[1].iter().sum::<f64>() / n]
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len()).fold(0.0, |m, k| m.max(self.comps[0][k].hypot(self.comps[1][k])))
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite("vector field", &self.comps[0])?;
        check_finite("vector field", &self.comps[1])
    }

    pub fn add_constant(&mut self, c: [f64; 2]) {
        for a in 0..2 {
            self.comps[a].iter_mut().for_each(|v| *v += c[a]);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = |v: &Vec<f64>| v.iter().map(|x| x * s).collect();
        Self::from_raw(&self.grid, f(&self.comps[0]), f(&self.comps[1]))
    }

    /// `self + s * other`
    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        for a in 0..2 {
            for (x, y) in self.comps[a].iter_mut().zip(&other.comps[a]) {
                *x += s * y;
            }
        }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

impl Field for VectorField {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
}

/// 2x2 matrix field, component `(a, b)` stored at `2 * a + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: PeriodicGrid,
    comps: [Vec<f64>; 4],
}

impl TensorField {
    pub fn identity(grid: &PeriodicGrid) -> Self {
        let n = grid.len();
        Self { grid: grid.clone(), comps: [vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![1.0; n]] }
    }

    pub(crate) fn from_raw(grid: &PeriodicGrid, comps: [Vec<f64>; 4]) -> Self {
        Self { grid: grid.clone(), comps }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn component(&self, a: usize, b: usize) -> &[f64] {
        &self.comps[2 * a + b]
    }

    #[inline]
    pub fn at(&self, k: usize) -> [[f64; 2]; 2] {
        [[self.comps[0][k], self.comps[1][k]], [self.comps[2][k], self.comps[3][k]]]
    }

    pub fn determinant(&self) -> ScalarField {
        let v = (0..self.grid.len())
            .map(|k| self.comps[0][k] * self.comps[3][k] - self.comps[1][k] * self.comps[2][k])
            .collect();
        ScalarField::from_raw(&self.grid, v)
    }

    pub fn transpose(&self) -> Self {
        let [a, b, c, d] = self.comps.clone();
        Self { grid: self.grid.clone(), comps: [a, c, b, d] }
    }

    /// Pointwise matrix-vector product.
    pub fn apply(&self, v: &VectorField) -> VectorField {
        let n = self.grid.len();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for k in 0..n {
            let [v1, v2] = v.at(k);
            x.push(self.comps[0][k] * v1 + self.comps[1][k] * v2);
            y.push(self.comps[2][k] * v1 + self.comps[3][k] * v2);
        }
        VectorField::from_raw(&self.grid, x, y)
    }

    /// Largest pointwise operator 2-norm.
    pub fn max_operator_norm(&self) -> f64 {
        (0..self.grid.len()).fold(0.0, |m, k| m.max(operator_norm(self.at(k))))
    }
}

impl Field for TensorField {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
}

/// Spectral norm of a 2x2 matrix.
pub fn operator_norm(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    ((s + disc) / 2.0).sqrt()
}
