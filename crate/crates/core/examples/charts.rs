//! Euler and Andoyer charts on the Kepler domain, and the spherical projection.
//!
//! Usage: `cargo run --example charts`

use ksreg::charts::{
    andoyer_to_phase, calibrate_andoyer, cartesian_to_spherical, euler_to_phase, phase_to_euler, project_euler,
    spherical_to_cartesian, AndoyerChart, AndoyerConvention, EulerChart,
};
use ksreg::maps::{ks_map, DefiningVector};
use ksreg::observables::centralizer;

fn main() -> ksreg::error::Result<()> {
    let c = EulerChart {
        rho: 1.3,
        phi: 0.4,
        theta: 1.1,
        psi: 2.0,
        p_rho: 0.2,
        p_phi: -0.3,
        p_theta: 0.5,
        p_psi: 0.0,
    };
    let z = euler_to_phase(&c)?;
    let back = phase_to_euler(&z)?;
    println!("euler round trip: {:?}", back.to_array());

    // with Psi = 0 the chart projects onto spherical coordinates of the KS image
    let s = project_euler(&c);
    let direct = spherical_to_cartesian(&s)?;
    let via_ks = ks_map(&z, DefiningVector::PLUS_K)?.phase();
    println!("projection vs ks image: {:.1e}", direct.max_abs_diff(&via_ks));
    println!("spherical of ks image: {:?}", cartesian_to_spherical(&via_ks)?);

    let cal = calibrate_andoyer(20_240_611, 40, 1e-10);
    for t in &cal.trials {
        println!(
            "  {:?}: kepler {:.1e} centralizer {:.1e} symplectic {:.1e}",
            t.scaling, t.kepler_identity_error, t.centralizer_error, t.symplectic_defect
        );
    }
    println!(
        "chosen Andoyer construction: {:?} (canonical: {})",
        cal.chosen, cal.canonical
    );

    let a = AndoyerChart {
        rho: 1.0,
        lambda: 0.3,
        mu_angle: 1.2,
        nu: -0.4,
        p_rho: 0.1,
        p_lambda: 0.2,
        p_mu: 0.8,
        p_nu: -0.5,
    };
    let z = andoyer_to_phase(&a, AndoyerConvention::Calibrated)?;
    println!(
        "Andoyer point: centralizer = {:+.6} vs M = {:+.6}",
        centralizer(&z),
        a.p_mu
    );
    Ok(())
}
