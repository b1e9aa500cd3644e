//! Writes a velocity field to the binary snapshot format and reads it back.

use nsrep::ensemble::shear_cos_velocity;
use nsrep::{snapshot, PeriodicGrid};

fn main() -> nsrep::Result<()> {
    let g = PeriodicGrid::new(16, 24, 2.0 * std::f64::consts::PI)?;
    let u = shear_cos_velocity(&g);
    let path = std::env::temp_dir().join("nsrep_example_u.bin");
    snapshot::save(&u, &path)?;
    let back = snapshot::load(&path)?.into_vector()?;
    println!("{}: round trip exact = {}", path.display(), back == u);
    std::fs::remove_file(path)?;
    Ok(())
}
