//! Regularized propagation of an eccentric Kepler orbit, compared with direct
//! integration, and written to CSV.
//!
//! Usage: `cargo run --example kepler_regularized -- [out.csv]`

use std::fs::File;

use ksreg::flow::{propagate_regularized_kepler, IntegratorConfig, KeplerSpan, RegularizedKepler};
use ksreg::verify::{eccentric_comparison, eccentric_orbit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = IntegratorConfig::dopri5(1e-12, 1e-14);
    let cmp = eccentric_comparison(&cfg)?;
    println!("{cmp:#?}");

    let (x0, y0) = eccentric_orbit();
    let settings = RegularizedKepler {
        span: KeplerSpan::Revolutions(3.0),
        samples_per_rev: 200,
        ..Default::default()
    };
    let traj = propagate_regularized_kepler(x0, y0, &settings, &cfg).map_err(|e| e.error)?;
    let last = traj.last();
    println!(
        "3 revolutions: t = {:.9}, tau = {:.9}, max energy drift = {:.1e}, steps = {}",
        last.t,
        last.s,
        traj.max_energy_drift(),
        traj.stats.accepted
    );
    if let Some(path) = std::env::args().nth(1) {
        traj.write_csv(File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
