//! Exact-periodic discrete calculus via the 2D DFT.
//!
//! First derivatives multiply by `i k` with the Nyquist bin zeroed. The
//! inverse Laplacian and Leray projector are built from the same wavenumbers,
//! so `curl . biot_savart`, `div . leray_project` and `leray_project` on
//! discrete gradients hold to rounding error.

use rustfft::num_complex::Complex64;

use crate::error::Result;
use crate::grid::{PeriodicGrid, ScalarField, TensorField, VectorField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn derivative(grid: &PeriodicGrid, spec: &[Complex64], axis: usize) -> Vec<f64> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let k = if axis == 0 { grid.k1() } else { grid.k2() };
    let mut out = spec.to_vec();
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let kk = if axis == 0 { k[i1] } else { k[i2] };
            out[i1 * n2 + i2] *= I * kk;
        }
    }
    grid.inverse_real(out)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid();
    let spec = g.forward(f.values());
    VectorField::from_raw(g, derivative(g, &spec, 0), derivative(g, &spec, 1))
}

/// Velocity gradient `J[a][b] = d v_a / d x_b`.
pub fn jacobian(v: &VectorField) -> TensorField {
    let g = v.grid();
    let s0 = g.forward(v.component(0));
    let s1 = g.forward(v.component(1));
    TensorField::from_raw(
        g,
        [derivative(g, &s0, 0), derivative(g, &s0, 1), derivative(g, &s1, 0), derivative(g, &s1, 1)],
    )
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let a = derivative(g, &g.forward(v.component(0)), 0);
    let b = derivative(g, &g.forward(v.component(1)), 1);
    ScalarField::from_raw(g, a.iter().zip(&b).map(|(x, y)| x + y).collect())
}

/// Scalar vorticity `d1 v2 - d2 v1`.
pub fn curl2d(v: &VectorField) -> Result<ScalarField> {
    v.check_finite()?;
    let g = v.grid();
    let a = derivative(g, &g.forward(v.component(1)), 0);
    let b = derivative(g, &g.forward(v.component(0)), 1);
    Ok(ScalarField::from_raw(g, a.iter().zip(&b).map(|(x, y)| x - y).collect()))
}

/// Mean-zero divergence-free velocity `u = -lap^{-1} curl omega`.
///
/// The mean of `omega` has no preimage and is dropped.
pub fn biot_savart(omega: &ScalarField) -> Result<VectorField> {
    omega.check_finite()?;
    let g = omega.grid();
    let mean = omega.mean();
    if mean.abs() > 1e-12 * omega.max_abs().max(1.0) {
        log::trace!("biot_savart: dropping vorticity mean {mean:.3e}");
    }
    Ok(velocity_from_vorticity_spec(g, &g.forward(omega.values())))
}

pub(crate) fn velocity_from_vorticity_spec(g: &PeriodicGrid, spec: &[Complex64]) -> VectorField {
    let (n1, n2) = (g.n1(), g.n2());
    let (k1, k2) = (g.k1(), g.k2());
    let mut u1 = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut u2 = u1.clone();
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let k = i1 * n2 + i2;
            let kk = k1[i1] * k1[i1] + k2[i2] * k2[i2];
            if kk == 0.0 {
                continue;
            }
            let psi = spec[k] / kk;
            u1[k] = I * k2[i2] * psi;
            u2[k] = -I * k1[i1] * psi;
        }
    }
    VectorField::from_raw(g, g.inverse_real(u1), g.inverse_real(u2))
}

/// Leray-Hodge projection onto divergence-free fields. The mean is kept.
pub fn leray_project(v: &VectorField) -> VectorField {
    let g = v.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let (k1, k2) = (g.k1(), g.k2());
    let mut a = g.forward(v.component(0));
    let mut b = g.forward(v.component(1));
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let k = i1 * n2 + i2;
            let kk = k1[i1] * k1[i1] + k2[i2] * k2[i2];
            if kk == 0.0 {
                continue;
            }
            let dot = (a[k] * k1[i1] + b[k] * k2[i2]) / kk;
            a[k] -= dot * k1[i1];
            b[k] -= dot * k2[i2];
        }
    }
    VectorField::from_raw(g, g.inverse_real(a), g.inverse_real(b))
}

/// Spectral resampling onto another grid of the same box. Modes that do not
/// fit strictly below the target Nyquist frequency are discarded.
pub fn resample(f: &ScalarField, target: &PeriodicGrid) -> Result<ScalarField> {
    let src = f.grid();
    if src.length() != target.length() {
        return Err(crate::Error::GridMismatch(format!(
            "cannot resample between box lengths {} and {}",
            src.length(),
            target.length()
        )));
    }
    let spec = src.forward(f.values());
    let (s1, s2) = (src.n1(), src.n2());
    let (t1, t2) = (target.n1(), target.n2());
    let lim1 = (s1.min(t1) / 2) as i64;
    let lim2 = (s2.min(t2) / 2) as i64;
    let scale = target.len() as f64 / src.len() as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
    for j1 in 0..s1 {
        let m1 = PeriodicGrid::mode(j1, s1);
        if m1.abs() >= lim1 {
            continue;
        }
        let d1 = m1.rem_euclid(t1 as i64) as usize;
        for j2 in 0..s2 {
            let m2 = PeriodicGrid::mode(j2, s2);
            if m2.abs() >= lim2 {
                continue;
            }
            let d2 = m2.rem_euclid(t2 as i64) as usize;
            out[d1 * t2 + d2] = spec[j1 * s2 + j2] * scale;
        }
    }
    Ok(ScalarField::from_raw(target, target.inverse_real(out)))
}

pub fn resample_vector(v: &VectorField, target: &PeriodicGrid) -> Result<VectorField> {
    VectorField::from_components(resample(&v.scalar(0), target)?, resample(&v.scalar(1), target)?)
}
