//! A short N-replica run from random data, printing diagnostics as it goes.
//!
//! `cargo run --release --example ensemble_run -- [N] [steps]`

use nsrep::diagnostics;
use nsrep::ensemble::{random_bandlimited_vorticity, EnsembleSettings, EnsembleState};
use nsrep::{spectral, PeriodicGrid};

fn main() -> nsrep::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    let steps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);

    let g = PeriodicGrid::square(24, 2.0 * std::f64::consts::PI)?;
    let u0 = spectral::biot_savart(&random_bandlimited_vorticity(&g, 6, 1)?)?;
    let settings = EnsembleSettings { nu: 0.1, ..Default::default() };
    let mut s = EnsembleState::uniform(&u0, n, settings, 2024, 0)?;

    let mut series = vec![diagnostics::record(&s)];
    for k in 1..=steps {
        s.advance_adaptive(0.05)?;
        if k % 10 == 0 {
            let r = diagnostics::record(&s);
            println!(
                "t = {:5.2}  energy {:.4}  enstrophy {:.4}  |w|_inf {:.3}  crosscheck {:?}",
                r.t,
                r.energy,
                r.enstrophy,
                r.omega_inf,
                s.monitors().crosscheck.map(|c| format!("{c:.1e}"))
            );
            series.push(r);
        }
    }
    diagnostics::write_csv(&series, std::io::stdout().lock())?;
    Ok(())
}
