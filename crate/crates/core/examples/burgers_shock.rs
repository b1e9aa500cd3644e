//! The one-dimensional replica system for Burgers: a deterministic shock
//! at t = 1 and the shock times of a few noisy ensembles.

use nsrep::burgers::{BurgersSettings, BurgersState};
use nsrep::reference::PeriodicProfile;

fn main() -> nsrep::Result<()> {
    let l = 2.0 * std::f64::consts::PI;
    let u0 = PeriodicProfile::from_fn(l, 64, |y| -y.sin())?;

    let det = BurgersState::new(u0.clone(), 1, 256, BurgersSettings::default(), 0, 0)?.run(2.0, 1e-3, 100)?;
    println!("nu = 0, N = 1: shock at {:?}", det.shock_time);

    let settings = BurgersSettings { nu: 0.05, ..Default::default() };
    for seed in 0..5 {
        let run = BurgersState::new(u0.clone(), 4, 128, settings, seed, 0)?.run(5.0, 5e-3, 50)?;
        let last = run.records.last().expect("at least the initial record");
        println!("nu = 0.05, N = 4, seed {seed}: shock at {:?}, energy {:.3}", run.shock_time, last.energy);
    }
    Ok(())
}
