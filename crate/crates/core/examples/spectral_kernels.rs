//! Biot-Savart velocity of a vorticity field and the Leray projection.

use nsrep::ensemble::random_bandlimited_vorticity;
use nsrep::{spectral, PeriodicGrid, ScalarField, VectorField};

fn main() -> nsrep::Result<()> {
    let g = PeriodicGrid::square(32, 2.0 * std::f64::consts::PI)?;

    let w = ScalarField::from_fn(&g, |[x, y]| (2.0 * x + y).sin());
    let u = spectral::biot_savart(&w)?;
    let back = spectral::curl2d(&u)?;
    println!("single mode: |curl(BS w) - w|_inf = {:.2e}", back.sub(&w).max_abs());

    let w = random_bandlimited_vorticity(&g, 6, 42)?;
    let u = spectral::biot_savart(&w)?;
    println!("random data: |div u|_inf = {:.2e}", spectral::divergence(&u).max_abs());

    // a gradient plus a divergence-free part; the projection keeps only the latter
    let phi = ScalarField::from_fn(&g, |[x, y]| x.cos() * (3.0 * y).sin());
    let mut v: VectorField = spectral::gradient(&phi);
    v.axpy(1.0, &u);
    let p = spectral::leray_project(&v);
    println!("leray: |P(grad phi + u) - u|_inf = {:.2e}", p.sub(&u).max_abs());
    Ok(())
}
