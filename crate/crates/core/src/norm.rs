//! Non-dimensional norms `||f||_p = (L^-2 \int |f|^p)^(1/p)` by grid averaging.

use crate::grid::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lp {
    L1,
    L2,
    Inf,
}

/// Pointwise magnitude is the Euclidean (Frobenius for tensors) norm over
/// components; the integral is the grid average, exact for band-limited data.
pub fn nondim_norm<F: Field + ?Sized>(f: &F, p: Lp) -> f64 {
    let comps = f.components();
    let n = f.grid().len();
    let mag = |k: usize| -> f64 { comps.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt() };
    match p {
        Lp::Inf => (0..n).fold(0.0, |m, k| m.max(mag(k))),
        Lp::L1 => (0..n).map(mag).sum::<f64>() / n as f64,
        Lp::L2 => mean_square(f).sqrt(),
    }
}

/// `||f||_2^2` without the square root round trip.
pub fn mean_square<F: Field + ?Sized>(f: &F) -> f64 {
    let n = f.grid().len() as f64;
    f.components().iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n
}
