//! Planar Levi-Civita map and the oscillator energy of the lifted orbit.
//!
//! Usage: `cargo run --example levi_civita`

use ksreg::dynamics::lc_oscillator_energy;
use ksreg::maps::{lc_map, lc_preimage, LcVariant};
use ksreg::verify::LC_ORBIT;

fn main() -> ksreg::error::Result<()> {
    for v in LcVariant::ALL {
        let (x, y) = lc_map([0.6, -0.8], [0.3, 0.2], v)?;
        println!("{v:?}: x = {x:?}, y = {y:?}");
    }
    let (x, y) = LC_ORBIT;
    let (q, p) = lc_preimage(x, y)?;
    println!("preimage of the test orbit: q = {q:?}, p = {p:?}");
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let energy = 0.5 * (y[0] * y[0] + y[1] * y[1]) - 1.0 / r;
    let h = -energy;
    println!(
        "Kepler energy {energy}, oscillator energy {}",
        lc_oscillator_energy(x, y, h)?
    );
    println!("mu / h = {}", 1.0 / h);
    Ok(())
}
