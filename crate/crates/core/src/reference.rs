//! Deterministic baselines: a pseudo-spectral vorticity solver and the exact
//! solution of the replica system for shear data.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, VectorField};
use crate::spectral;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Vorticity-form Navier-Stokes state, `d_t w + u . grad w = nu lap w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceState {
    pub omega: ScalarField,
    pub nu: f64,
    pub t: f64,
    pub dealias: bool,
}

struct Operators {
    k1: Vec<f64>,
    k2: Vec<f64>,
    /// `|k|^2` over the full wavenumber range.
    lap: Vec<f64>,
    mask: Vec<f64>,
}

impl Operators {
    fn new(g: &PeriodicGrid, dealias: bool) -> Self {
        let (n1, n2) = (g.n1(), g.n2());
        let mut lap = Vec::with_capacity(g.len());
        let mut mask = Vec::with_capacity(g.len());
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let (a, b) = (g.full_wavenumber(i1, n1), g.full_wavenumber(i2, n2));
                lap.push(a * a + b * b);
                let (m1, m2) = (PeriodicGrid::mode(i1, n1).abs(), PeriodicGrid::mode(i2, n2).abs());
                // keep |m| < n/3 on each axis
                let keep = !dealias || (3 * m1 < n1 as i64 && 3 * m2 < n2 as i64);
                mask.push(if keep { 1.0 } else { 0.0 });
            }
        }
        Self { k1: g.k1(), k2: g.k2(), lap, mask }
    }

    /// Fourier transform of `-u . grad w`, dealiased.
    fn nonlinear(&self, g: &PeriodicGrid, w: &[Complex64]) -> Vec<Complex64> {
        let n2 = g.n2();
        let len = g.len();
        let mut u1 = vec![Complex64::new(0.0, 0.0); len];
        let mut u2 = u1.clone();
        let mut w1 = u1.clone();
        let mut w2 = u1.clone();
        for k in 0..len {
            let (a, b) = (self.k1[k / n2], self.k2[k % n2]);
            let kk = a * a + b * b;
            if kk > 0.0 {
                let psi = w[k] / kk;
                u1[k] = I * b * psi;
                u2[k] = -I * a * psi;
            }
            w1[k] = I * a * w[k];
            w2[k] = I * b * w[k];
        }
        let (u1, u2) = (g.inverse_real(u1), g.inverse_real(u2));
        let (w1, w2) = (g.inverse_real(w1), g.inverse_real(w2));
        let adv: Vec<f64> = (0..len).map(|k| -(u1[k] * w1[k] + u2[k] * w2[k])).collect();
        let mut out = g.forward(&adv);
        for (o, m) in out.iter_mut().zip(&self.mask) {
            *o *= m;
        }
        out
    }
}

impl ReferenceState {
    pub fn new(omega: ScalarField, nu: f64, dealias: bool) -> Result<Self> {
        omega.check_finite()?;
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::Precondition(format!("viscosity must be non-negative, got {nu}")));
        }
        Ok(Self { omega, nu, t: 0.0, dealias })
    }

    pub fn from_velocity(u: &VectorField, nu: f64, dealias: bool) -> Result<Self> {
        Self::new(spectral::curl2d(u)?, nu, dealias)
    }

    pub fn velocity(&self) -> VectorField {
        spectral::biot_savart(&self.omega).unwrap_or_else(|_| VectorField::zeros(self.omega.grid()))
    }

    /// `h * max|u| / dx`.
    pub fn cfl(&self, h: f64) -> f64 {
        let g = self.omega.grid();
        let dx = g.spacing()[0].min(g.spacing()[1]);
        h * self.velocity().max_abs() / dx
    }

    /// One integrating-factor RK4 step of size `h`.
    pub fn ns_step(&self, h: f64) -> Result<ReferenceState> {
        let cfl = self.cfl(h);
        if cfl > 0.5 {
            return Err(Error::CflViolation { cfl, limit: 0.5 });
        }
        let g = self.omega.grid();
        let ops = Operators::new(g, self.dealias);
        let v = g.forward(self.omega.values());
        let e: Vec<f64> = ops.lap.iter().map(|l| (-self.nu * l * h).exp()).collect();
        let e2: Vec<f64> = ops.lap.iter().map(|l| (-self.nu * l * h / 2.0).exp()).collect();
        let len = g.len();

        let a = ops.nonlinear(g, &v);
        let s: Vec<Complex64> = (0..len).map(|k| e2[k] * (v[k] + 0.5 * h * a[k])).collect();
        let b = ops.nonlinear(g, &s);
        let s: Vec<Complex64> = (0..len).map(|k| e2[k] * v[k] + 0.5 * h * b[k]).collect();
        let c = ops.nonlinear(g, &s);
        let s: Vec<Complex64> = (0..len).map(|k| e[k] * v[k] + h * e2[k] * c[k]).collect();
        let d = ops.nonlinear(g, &s);
        let next: Vec<Complex64> = (0..len)
            .map(|k| e[k] * v[k] + h / 6.0 * (e[k] * a[k] + 2.0 * e2[k] * (b[k] + c[k]) + d[k]))
            .collect();
        let omega = ScalarField::from_raw(g, g.inverse_real(next));
        omega.check_finite()?;
        Ok(ReferenceState { omega, nu: self.nu, t: self.t + h, dealias: self.dealias })
    }

    /// Advances to `t_end` in steps of at most `h`.
    pub fn run_to(&self, t_end: f64, h: f64) -> Result<ReferenceState> {
        let steps = ((t_end - self.t) / h).ceil().max(0.0) as usize;
        let mut s = self.clone();
        if steps == 0 {
            return Ok(s);
        }
        let dt = (t_end - self.t) / steps as f64;
        for _ in 0..steps {
            s = s.ns_step(dt)?;
        }
        s.t = t_end;
        Ok(s)
    }
}

/// A periodic function of one variable on `[0, L)`, held by its samples and
/// evaluated by trigonometric interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicProfile {
    length: f64,
    /// Complex Fourier coefficients `c_m`, `m = 0..n`, FFT ordering.
    coeffs: Vec<Complex64>,
}

impl PeriodicProfile {
    pub fn from_samples(length: f64, samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 4 || n % 2 != 0 || !(length > 0.0) {
            return Err(Error::Precondition(format!("profile needs an even sample count >= 4, got {n}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("profile has non-finite samples".into()));
        }
        let coeffs = (0..n)
            .map(|m| {
                samples.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &v)| {
                    let th = -2.0 * PI * (m * j % n) as f64 / n as f64;
                    acc + v * Complex64::new(th.cos(), th.sin())
                }) / n as f64
            })
            .collect();
        Ok(Self { length, coeffs })
    }

    pub fn from_fn(length: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = length / n as f64;
        let s: Vec<f64> = (0..n).map(|j| f(j as f64 * h)).collect();
        Self::from_samples(length, &s)
    }

    /// `cos(2 pi x / L)`.
    pub fn cos(length: f64, n: usize) -> Result<Self> {
        Self::from_fn(length, n, |x| (2.0 * PI * x / length).cos())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn wavenumber(&self, m: usize) -> f64 {
        2.0 * PI / self.length * PeriodicGrid::mode(m, self.len()) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.len();
        self.coeffs.iter().enumerate().fold(0.0, |s, (m, c)| {
            let th = self.wavenumber(m) * x;
            if m == n / 2 {
                s + c.re * th.cos()
            } else {
                s + c.re * th.cos() - c.im * th.sin()
            }
        })
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Spectral derivative; the Nyquist coefficient is dropped.
    pub fn derivative(&self) -> Self {
        let n = self.len();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| if m == n / 2 { Complex64::new(0.0, 0.0) } else { I * self.wavenumber(m) * c })
            .collect();
        Self { length: self.length, coeffs }
    }
}

/// Heat semigroup `e^{t nu d_xx}` applied to a profile.
pub fn heat_profile(phi0: &PeriodicProfile, nu: f64, t: f64) -> PeriodicProfile {
    let coeffs = phi0
        .coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let k = phi0.wavenumber(m);
            c * (-nu * k * k * t).exp()
        })
        .collect();
    PeriodicProfile { length: phi0.length, coeffs }
}

/// Exact replica-system fields for shear data `u0 = (phi0(x2), 0)`:
/// `omega^i(x) = -phi0'(x2 - sqrt(2 nu) W^i)` averaged over copies, and
/// `u = (mean_i phi0(x2 - sqrt(2 nu) W^i), 0)`.
///
/// `w2` holds the raw second Brownian coordinates of the copies.
pub fn shear_oracle(
    phi0: &PeriodicProfile,
    nu: f64,
    w2: &[f64],
    grid: &PeriodicGrid,
) -> Result<(ScalarField, VectorField)> {
    if w2.is_empty() {
        return Err(Error::Precondition("shear oracle needs at least one copy".into()));
    }
    if (phi0.length() - grid.length()).abs() > 1e-12 * grid.length() {
        return Err(Error::GridMismatch("profile and grid have different box lengths".into()));
    }
    let dphi = phi0.derivative();
    let amp = (2.0 * nu).sqrt();
    let n = w2.len() as f64;
    let col = |f: &PeriodicProfile, y: f64| w2.iter().map(|w| f.eval(y - amp * w)).sum::<f64>() / n;
    let ys: Vec<f64> = (0..grid.n2()).map(|i2| grid.point(0, i2)[1]).collect();
    let wcol: Vec<f64> = ys.iter().map(|&y| -col(&dphi, y)).collect();
    let ucol: Vec<f64> = ys.iter().map(|&y| col(phi0, y)).collect();
    let n2 = grid.n2();
    let omega = ScalarField::from_raw(grid, (0..grid.len()).map(|k| wcol[k % n2]).collect());
    let u = VectorField::from_raw(grid, (0..grid.len()).map(|k| ucol[k % n2]).collect(), vec![0.0; grid.len()]);
    Ok((omega, u))
}
