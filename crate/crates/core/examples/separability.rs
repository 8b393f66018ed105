//! Separation of the regularized Hamiltonian in Euler coordinates, the rotor
//! in closed form, and the cyclic angles by quadrature.
//!
//! Usage: `cargo run --release --example separability`

use ksreg::charts::EulerChart;
use ksreg::flow::IntegratorConfig;
use ksreg::verify::{quadrature_check, separability_check};

fn main() -> ksreg::error::Result<()> {
    let chart = EulerChart {
        rho: 1.0,
        phi: 0.2,
        theta: 1.4,
        psi: 0.7,
        p_rho: 0.1,
        p_phi: 0.5,
        p_theta: 0.2,
        p_psi: -0.2,
    };
    let cfg = IntegratorConfig::dopri5(1e-12, 1e-14);
    let (split, rotor, momenta) = separability_check(&chart, 3.0, &cfg)?;
    println!("split vs coupled: {split:.1e}");
    println!("rotor vs closed form: {rotor:.1e}");
    println!("cyclic momenta drift: {momenta:.1e}");
    let cfg = IntegratorConfig::dopri5(1e-13, 1e-15);
    println!("angles by quadrature: {:.1e}", quadrature_check(&chart, 1.3, &cfg)?);
    Ok(())
}
