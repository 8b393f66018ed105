//! Poisson brackets of the bilinear observables and closure of their algebras.
//!
//! Usage: `cargo run --example brackets -- [printed|corrected]`

use ksreg::observables::{bracket, bracket_table, centralizer, Convention, ObservableId, PhasePoint8};
use ksreg::quat::Axis;

fn main() -> ksreg::error::Result<()> {
    let conventions = match std::env::args().nth(1).as_deref() {
        Some("printed") => vec![Convention::Printed],
        Some("corrected") => vec![Convention::Corrected],
        _ => vec![Convention::Printed, Convention::Corrected],
    };
    let z = PhasePoint8::from_array([0.7, -0.2, 1.1, 0.4, -0.5, 0.9, 0.3, -1.3]);
    println!("centralizer M = {:.6}", centralizer(&z));
    for conv in conventions {
        println!("\n{conv:?} convention");
        let r1 = ObservableId::rho(Axis::I);
        let r2 = ObservableId::rho(Axis::J);
        let r3 = ObservableId::rho(Axis::K);
        println!(
            "  {{rho_i, rho_j}} = {:+.6}   2 rho_k = {:+.6}",
            bracket(r1, r2, conv, &z),
            2.0 * ksreg::observables::eval_with(r3, conv, &z)
        );
        let table = bracket_table(&z, conv, 1)?;
        for alg in &table.algebras {
            println!(
                "  {:<8} closes={:<5} residual={:.1e} off_span={:.1e}",
                alg.algebra, alg.closes, alg.residual, alg.off_span
            );
            for (a, b, target, c) in &alg.structure_constants {
                println!("      {{{a}, {b}}} = {c:+.3} {target}");
            }
        }
    }
    Ok(())
}
