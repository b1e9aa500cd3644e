//! Advances a single stochastic flow map in a frozen velocity field and
//! reports how well the stored forward and inverse maps agree.

use nsrep::ensemble::random_bandlimited_vorticity;
use nsrep::flowmap::{FlowMap, GradientRoute, StepOptions};
use nsrep::{spectral, Interpolation, PeriodicGrid};

fn main() -> nsrep::Result<()> {
    let g = PeriodicGrid::square(48, 2.0 * std::f64::consts::PI)?;
    let u = spectral::biot_savart(&random_bandlimited_vorticity(&g, 4, 7)?)?.scaled(0.5);
    let opts = StepOptions::default();
    let h = 0.02;
    let noise = [0.01, -0.02];

    let mut map = FlowMap::identity(&g);
    for k in 1..=25 {
        map = map.step(&u, h, noise, &opts)?;
        if k % 5 == 0 {
            let det = map.forward_jacobian_det();
            let dev = det.values().iter().fold(0.0f64, |m, d| m.max((d - 1.0).abs()));
            println!(
                "t = {:.2}  |X(Y(x)) - x| = {:.2e}  max|det grad X - 1| = {:.2e}",
                map.t,
                map.composition_residual(Interpolation::Cubic),
                dev
            );
        }
    }

    // the inverse can also be rebuilt from the forward map alone
    let mu = map.invert(Interpolation::Cubic)?;
    println!("rebuilt inverse differs by {:.2e}", mu.sub(&map.mu).max_abs());
    let a = map.grad_transpose_inverse(GradientRoute::SpectralInverse, Interpolation::Cubic);
    let b = map.grad_transpose_inverse(GradientRoute::ForwardAdjugate, Interpolation::Cubic);
    let gap = (0..g.len()).map(|k| (a.at(k)[0][0] - b.at(k)[0][0]).abs()).fold(0.0, f64::max);
    println!("grad^T Y routes differ by {gap:.2e}");
    Ok(())
}
