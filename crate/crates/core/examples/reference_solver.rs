//! Deterministic pseudo-spectral Navier-Stokes run and its energy decay.

use nsrep::ensemble::random_bandlimited_vorticity;
use nsrep::norm::mean_square;
use nsrep::reference::ReferenceState;
use nsrep::PeriodicGrid;

fn main() -> nsrep::Result<()> {
    let g = PeriodicGrid::square(64, 2.0 * std::f64::consts::PI)?;
    let mut s = ReferenceState::new(random_bandlimited_vorticity(&g, 8, 3)?, 0.01, true)?;
    let h = 0.02;
    println!("CFL number at h = {h}: {:.3}", s.cfl(h));
    for _ in 0..10 {
        s = s.run_to(s.t + 0.5, h)?;
        println!("t = {:.1}  energy {:.5}  enstrophy {:.5}", s.t, mean_square(&s.velocity()), mean_square(&s.omega));
    }
    Ok(())
}
