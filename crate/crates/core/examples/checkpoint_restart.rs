//! Checkpoints an ensemble mid-run and shows the restarted run continues
//! bit for bit.

use nsrep::ensemble::{random_bandlimited_vorticity, EnsembleSettings, EnsembleState};
use nsrep::{spectral, PeriodicGrid};

fn main() -> nsrep::Result<()> {
    let g = PeriodicGrid::square(24, 2.0 * std::f64::consts::PI)?;
    let u0 = spectral::biot_savart(&random_bandlimited_vorticity(&g, 6, 1)?)?;
    let mut a = EnsembleState::uniform(&u0, 3, EnsembleSettings::default(), 5, 0)?;
    for _ in 0..10 {
        a.advance_adaptive(0.05)?;
    }
    let bytes = a.checkpoint();
    println!("checkpoint at t = {:.2}: {} bytes", a.t(), bytes.len());

    let mut b = EnsembleState::restart(&bytes)?;
    for _ in 0..10 {
        a.advance_adaptive(0.05)?;
        b.advance_adaptive(0.05)?;
    }
    println!("identical after 10 more steps: {}", a.checkpoint() == b.checkpoint());

    let mut corrupt = bytes.clone();
    corrupt[100] ^= 1;
    println!("corrupted checkpoint: {}", EnsembleState::restart(&corrupt).unwrap_err());
    Ok(())
}
