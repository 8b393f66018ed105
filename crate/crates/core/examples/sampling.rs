//! Seeded samples from each manifold, written as CSV to stdout.
//!
//! Usage: `cargo run --example sampling -- [manifold] [count] [seed]`

use ksreg::observables::{xi0, PhasePoint8};
use ksreg::sampling::{sample, write_csv, Manifold};

fn main() -> ksreg::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let manifold: Manifold = args.next().as_deref().unwrap_or("xi0-zero").parse()?;
    let count = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let rows = sample(manifold, count, seed);
    write_csv(manifold, &rows, std::io::stdout().lock())?;
    if manifold == Manifold::Xi0Zero {
        let worst = rows
            .iter()
            .map(|r| xi0(&PhasePoint8::from_array(*r)).abs())
            .fold(0.0, f64::max);
        eprintln!("max |Xi0| = {worst:.1e}");
    }
    Ok(())
}
