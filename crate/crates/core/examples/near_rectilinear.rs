//! Near-collision orbit: regularized flow passes the close approach while the
//! direct integrator shrinks its step to the collapse threshold.
//!
//! Usage: `cargo run --release --example near_rectilinear -- [tol]`

use ksreg::dynamics::HamiltonianSpec;
use ksreg::flow::{integrate, IntegratorConfig};
use ksreg::verify::{rectilinear_comparison, RECTILINEAR_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(RECTILINEAR_TOL);
    let cmp = rectilinear_comparison(tol)?;
    println!("{cmp:#?}");

    // an exactly radial fall reaches the singularity in finite time
    let cfg = IntegratorConfig::dopri5(tol, tol * 1e-2);
    match integrate(
        &HamiltonianSpec::kepler3(1.0),
        &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        (0.0, 2.0),
        &cfg,
    ) {
        Ok(t) => println!("radial fall completed, min step {:.1e}", t.stats.min_step),
        Err(e) => {
            let n = e.partial.as_ref().map_or(0, |p| p.samples.len());
            println!("radial fall: {} ({n} samples retained)", e.error);
        }
    }
    Ok(())
}
