//! Quaternion products and the KS map: image, real defect, preimage and fibers.
//!
//! Usage: `cargo run --example ks_maps`

use ksreg::maps::{chi_action, ks_map, ks_map_permuted, ks_preimage, ChiAction, DefiningVector};
use ksreg::observables::{xi0, PhasePoint8};
use ksreg::quat::Quat;

fn main() -> ksreg::error::Result<()> {
    let i = Quat::basis(1);
    let j = Quat::basis(2);
    println!("i*j = {:?}", i.mul(j).to_array());

    let z = PhasePoint8::from_array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    let img = ks_map(&z, DefiningVector::PLUS_K)?;
    println!(
        "ks(+k): x = {:?}, y = {:?}, real defect = {}",
        img.x, img.y, img.real_defect
    );

    // a point off the constraint: the defect equals Xi0 / (2|q|^2)
    let z = PhasePoint8::from_array([0.6, -0.3, 0.8, 0.1, 0.2, 0.5, -0.4, 0.7]);
    let img = ks_map(&z, DefiningVector::PLUS_K)?;
    println!(
        "off constraint: defect = {:.6}, Xi0/(2|q|^2) = {:.6}",
        img.real_defect,
        xi0(&z) / (2.0 * z.q.norm_sqr())
    );

    for dv in DefiningVector::all() {
        let x = ks_map(&z, dv)?.x;
        println!("  dv {dv:>2}: x = [{:+.4}, {:+.4}, {:+.4}]", x[0], x[1], x[2]);
    }

    // lift a Cartesian state and walk around its fiber
    let (x, y) = ([0.3, -1.2, 0.5], [0.4, 0.1, -0.6]);
    for psi in [0.0, 1.0, 2.5] {
        let lift = ks_preimage(x, y, psi)?;
        let back = ks_map(&lift, DefiningVector::PLUS_K)?.phase();
        println!(
            "gauge {psi}: Xi0 = {:.1e}, round trip error = {:.1e}",
            xi0(&lift),
            back.max_abs_diff(&ksreg::maps::PhasePoint6::new(x, y))
        );
    }

    let lift = ks_preimage(x, y, 0.0)?;
    let moved = chi_action(ChiAction::Zero, 0.7, &lift);
    let a = ks_map(&lift, DefiningVector::PLUS_K)?.phase();
    let b = ks_map(&moved, DefiningVector::PLUS_K)?.phase();
    println!("ks constant along chi0 orbit: {:.1e}", a.max_abs_diff(&b));
    let a = ks_map_permuted(&lift)?.phase();
    let b = ks_map_permuted(&chi_action(ChiAction::One, 0.7, &lift))?.phase();
    println!("permuted ks constant along chi1 orbit: {:.1e}", a.max_abs_diff(&b));
    Ok(())
}
