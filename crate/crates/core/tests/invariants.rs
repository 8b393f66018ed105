use proptest::prelude::*;

use ksreg::charts::{euler_to_phase, phase_to_euler};
use ksreg::maps::{chi_action, ks_map, ks_preimage, lc_map, lc_preimage, ChiAction, DefiningVector, LcVariant};
use ksreg::observables::{bracket, xi0, Convention, ObservableId, PhasePoint8};

fn coord() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

fn phase_point() -> impl Strategy<Value = PhasePoint8> {
    prop::array::uniform8(coord())
        .prop_map(PhasePoint8::from_array)
        .prop_filter("q away from the origin", |z| z.q.norm() > 0.1)
}

proptest! {
    #[test]
    fn ks_image_is_fiber_invariant(z in phase_point(), alpha in -7.0..7.0f64) {
        let a = ks_map(&z, DefiningVector::PLUS_K).unwrap();
        let b = ks_map(&chi_action(ChiAction::Zero, alpha, &z), DefiningVector::PLUS_K).unwrap();
        prop_assert!(a.phase().max_abs_diff(&b.phase()) < 1e-12 * z.scale().powi(2).max(1.0));
        let r = a.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((r - z.q.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn preimage_round_trip(x in prop::array::uniform3(coord()), y in prop::array::uniform3(coord()), psi in 0.0..6.3f64) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let lift = ks_preimage(x, y, psi).unwrap();
        prop_assert!(xi0(&lift).abs() < 1e-12);
        let back = ks_map(&lift, DefiningVector::PLUS_K).unwrap();
        prop_assert!(back.phase().max_abs_diff(&ksreg::maps::PhasePoint6::new(x, y)) < 1e-11);
        prop_assert!(back.real_defect.abs() < 1e-12);
    }

    #[test]
    fn euler_chart_round_trip(z in phase_point()) {
        if let Ok(c) = phase_to_euler(&z) {
            prop_assume!(c.theta.sin() > 0.05);
            let back = euler_to_phase(&c).unwrap();
            prop_assert!(back.max_abs_diff(z) < 1e-10 * z.scale().max(1.0));
        }
    }

    #[test]
    fn brackets_are_antisymmetric(z in phase_point(), i in 0usize..10, j in 0usize..10) {
        let (a, b) = (ObservableId::BASIS[i], ObservableId::BASIS[j]);
        let ab = bracket(a, b, Convention::Corrected, &z);
        let ba = bracket(b, a, Convention::Corrected, &z);
        prop_assert!((ab + ba).abs() < 1e-12 * z.scale().powi(2).max(1.0));
    }

    #[test]
    fn lc_preimage_inverts_map(q in prop::array::uniform2(coord()), p in prop::array::uniform2(coord())) {
        prop_assume!(q[0].hypot(q[1]) > 0.1);
        let (x, y) = lc_map(q, p, LcVariant::One).unwrap();
        let (q2, p2) = lc_preimage(x, y).unwrap();
        let (x2, y2) = lc_map(q2, p2, LcVariant::One).unwrap();
        for k in 0..2 {
            prop_assert!((x[k] - x2[k]).abs() < 1e-12 && (y[k] - y2[k]).abs() < 1e-10);
        }
    }
}
