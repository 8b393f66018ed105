//! Levi-Civita and Kustaanheimo-Stiefel maps, the two `S^1` actions whose
//! orbits KS collapses, and a gauge-fixed KS preimage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::charts::{self, EulerChart};
use crate::error::{ensure_finite, Error, Result};
use crate::observables::PhasePoint8;
use crate::quat::{Axis, Quat};

/// Spatial Kepler phase point `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint6 {
    pub x: [f64; 3],
    pub y: [f64; 3],
}

impl PhasePoint6 {
    pub fn new(x: [f64; 3], y: [f64; 3]) -> Self {
        PhasePoint6 { x, y }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x[0], self.x[1], self.x[2], self.y[0], self.y[1], self.y[2]]
    }

    pub fn from_slice(a: &[f64]) -> Self {
        PhasePoint6 {
            x: [a[0], a[1], a[2]],
            y: [a[3], a[4], a[5]],
        }
    }

    pub fn radius(&self) -> f64 {
        norm3(&self.x)
    }

    pub fn max_abs_diff(&self, other: &PhasePoint6) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Unit pure quaternion `+-i`, `+-j` or `+-k` inserted in `q* (.) q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DefiningVector {
    pub negative: bool,
    pub axis: Axis,
}

impl DefiningVector {
    pub const PLUS_K: DefiningVector = DefiningVector {
        negative: false,
        axis: Axis::K,
    };

    pub fn all() -> [DefiningVector; 6] {
        let mut out = [Self::PLUS_K; 6];
        for (n, axis) in Axis::ALL.iter().enumerate() {
            for (m, negative) in [false, true].iter().enumerate() {
                out[2 * n + m] = DefiningVector {
                    negative: *negative,
                    axis: *axis,
                };
            }
        }
        out
    }

    pub fn quat(self) -> Quat {
        let u = self.axis.unit();
        if self.negative {
            -u
        } else {
            u
        }
    }
}

impl Default for DefiningVector {
    fn default() -> Self {
        Self::PLUS_K
    }
}

impl fmt::Display for DefiningVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.negative { '-' } else { '+' };
        let a = match self.axis {
            Axis::I => 'i',
            Axis::J => 'j',
            Axis::K => 'k',
        };
        write!(f, "{s}{a}")
    }
}

impl FromStr for DefiningVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (negative, rest) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let axis = match rest {
            "i" => Axis::I,
            "j" => Axis::J,
            "k" => Axis::K,
            _ => return Err(Error::Config(format!("unknown defining vector `{s}`"))),
        };
        Ok(DefiningVector { negative, axis })
    }
}

/// Which unit multiplies `q^2` in the planar map `x = q c q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum LcVariant {
    #[default]
    One,
    MinusOne,
    I,
    MinusI,
}

impl LcVariant {
    pub const ALL: [LcVariant; 4] = [LcVariant::One, LcVariant::MinusOne, LcVariant::I, LcVariant::MinusI];

    /// The multiplier as a complex number `(re, im)`.
    fn multiplier(self) -> (f64, f64) {
        match self {
            LcVariant::One => (1.0, 0.0),
            LcVariant::MinusOne => (-1.0, 0.0),
            LcVariant::I => (0.0, 1.0),
            LcVariant::MinusI => (0.0, -1.0),
        }
    }
}

impl FromStr for LcVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" => Ok(LcVariant::One),
            "-1" => Ok(LcVariant::MinusOne),
            "i" | "+i" => Ok(LcVariant::I),
            "-i" => Ok(LcVariant::MinusI),
            other => Err(Error::Config(format!("unknown Levi-Civita variant `{other}`"))),
        }
    }
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Planar Levi-Civita map `x = c q^2` with its cotangent lift
/// `y = c q p / (2 |q|^2)` (complex arithmetic), so that `p.dq = y.dx`.
pub fn lc_map(q: [f64; 2], p: [f64; 2], variant: LcVariant) -> Result<([f64; 2], [f64; 2])> {
    ensure_finite("lc point", &[q[0], q[1], p[0], p[1]])?;
    let r2 = q[0] * q[0] + q[1] * q[1];
    if r2 == 0.0 {
        return Err(Error::domain("q", 0.0, "Levi-Civita lift divides by |q|^2"));
    }
    let c = variant.multiplier();
    let qc = (q[0], q[1]);
    let x = cmul(c, cmul(qc, qc));
    let y = cmul(c, cmul(qc, (p[0], p[1])));
    let k = 1.0 / (2.0 * r2);
    Ok(([x.0, x.1], [y.0 * k, y.1 * k]))
}

/// Principal-branch inverse of the default Levi-Civita map.
pub fn lc_preimage(x: [f64; 2], y: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
    ensure_finite("lc point", &[x[0], x[1], y[0], y[1]])?;
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return Err(Error::domain("x", 0.0, "origin has no regular preimage"));
    }
    let half = 0.5 * x[1].atan2(x[0]);
    let s = r.sqrt();
    let q = [s * half.cos(), s * half.sin()];
    // p = 2 y conj(q)
    let pc = cmul((y[0], y[1]), (q[0], -q[1]));
    Ok((q, [2.0 * pc.0, 2.0 * pc.1]))
}

/// `q* dv q`, a pure quaternion of norm `|q|^2`.
pub fn ks_point(q: Quat, dv: DefiningVector) -> Result<Quat> {
    if !q.is_finite() {
        return Err(Error::NonFinite("q".into()));
    }
    if q.norm_sqr() == 0.0 {
        return Err(Error::domain("q", 0.0, "KS map is undefined at q = 0"));
    }
    Ok(q.conj() * dv.quat() * q)
}

/// Image of the KS map together with the scalar part of the momentum
/// quaternion, which vanishes exactly on the constraint manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsImage {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub real_defect: f64,
}

impl KsImage {
    pub fn phase(&self) -> PhasePoint6 {
        PhasePoint6::new(self.x, self.y)
    }
}

/// `x = Im(q* dv q)`, `y = Im(q* dv p) / (2|q|^2)`.
///
/// For `dv = +k` the real defect equals `Xi0 / (2|q|^2)`.
pub fn ks_map(z: &PhasePoint8, dv: DefiningVector) -> Result<KsImage> {
    if !z.is_finite() {
        return Err(Error::NonFinite("phase point".into()));
    }
    let x = ks_point(z.q, dv)?;
    let r2 = z.q.norm_sqr();
    let yq = (z.q.conj() * dv.quat() * z.p).scale(1.0 / (2.0 * r2));
    Ok(KsImage {
        x: x.vector(),
        y: yq.vector(),
        real_defect: yq.w,
    })
}

/// Swaps the first and fourth components of a quaternion.
fn swap_first_last(q: Quat) -> Quat {
    Quat::new(q.z, q.x, q.y, q.w)
}

/// Variant of the KS map that differs from [`ks_map`] with `+k` by
/// permuting indices 1 and 4 of `q` and `p`. Its fibers are the orbits of
/// [`ChiAction::One`] and its real defect is `-Xi1 / (2|q|^2)`.
pub fn ks_map_permuted(z: &PhasePoint8) -> Result<KsImage> {
    let swapped = PhasePoint8::new(swap_first_last(z.q), swap_first_last(z.p));
    ks_map(&swapped, DefiningVector::PLUS_K)
}

/// Analytic Jacobian of `(x, y)` from [`ks_map`] with respect to `(q, p)`.
/// Rows are `x1, x2, x3, y1, y2, y3`.
pub fn ks_jacobian(z: &PhasePoint8, dv: DefiningVector) -> Result<[[f64; 8]; 6]> {
    let image = ks_map(z, dv)?;
    let d = dv.quat();
    let (q, p) = (z.q, z.p);
    let r2 = q.norm_sqr();
    let raw_y = q.conj() * d * p;
    let qa = q.to_array();
    let mut jac = [[0.0; 8]; 6];
    for m in 0..4 {
        let e = Quat::basis(m);
        let dx = e.conj() * d * q + q.conj() * d * e;
        let dy_dq = (e.conj() * d * p).scale(1.0 / (2.0 * r2)) - raw_y.scale(qa[m] / (r2 * r2));
        let dy_dp = (q.conj() * d * e).scale(1.0 / (2.0 * r2));
        for k in 0..3 {
            jac[k][m] = dx.vector()[k];
            jac[3 + k][m] = dy_dq.vector()[k];
            jac[3 + k][4 + m] = dy_dp.vector()[k];
        }
    }
    debug_assert!(image.x.iter().all(|v| v.is_finite()));
    Ok(jac)
}

/// The two circle actions on `T*H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChiAction {
    /// Left multiplication by `cos a + k sin a`; collapsed by [`ks_map`].
    Zero,
    /// Right multiplication by `cos a + k sin a`; collapsed by [`ks_map_permuted`].
    One,
}

/// The 4x4 rotation matrix of the chosen action.
pub fn action_matrix(which: ChiAction, alpha: f64) -> [[f64; 4]; 4] {
    let (s, c) = alpha.sin_cos();
    match which {
        ChiAction::Zero => [[c, 0.0, 0.0, -s], [0.0, c, -s, 0.0], [0.0, s, c, 0.0], [s, 0.0, 0.0, c]],
        ChiAction::One => [[c, 0.0, 0.0, -s], [0.0, c, s, 0.0], [0.0, -s, c, 0.0], [s, 0.0, 0.0, c]],
    }
}

fn apply(m: &[[f64; 4]; 4], v: Quat) -> Quat {
    let a = v.to_array();
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(a).map(|(r, x)| r * x).sum();
    }
    Quat::from_array(out)
}

/// Rotates both `q` and `p` by the matrix of the chosen action.
///
/// The Hamiltonian flow of `Xi0` (resp. `Xi1`) for time `t` equals
/// `chi_action(Zero, -t, .)` (resp. `One`).
pub fn chi_action(which: ChiAction, alpha: f64, z: &PhasePoint8) -> PhasePoint8 {
    let m = action_matrix(which, alpha);
    PhasePoint8::new(apply(&m, z.q), apply(&m, z.p))
}

/// A point of the twin-bilinear manifold `Xi0 = 0` whose KS image is
/// `(x, y)`, selected on its fiber by the Euler angle `psi = gauge_psi`.
///
/// The fiber angle has period `4 pi`; `chi_action(Zero, a, .)` shifts it by
/// `-2a`.
pub fn ks_preimage(x: [f64; 3], y: [f64; 3], gauge_psi: f64) -> Result<PhasePoint8> {
    ensure_finite("kepler point", &[x[0], x[1], x[2], y[0], y[1], y[2], gauge_psi])?;
    let sph = charts::cartesian_to_spherical(&PhasePoint6::new(x, y))?;
    let chart = EulerChart {
        rho: sph.rho,
        phi: sph.phi,
        theta: sph.theta,
        psi: gauge_psi,
        p_rho: sph.p_rho,
        p_phi: sph.p_phi,
        p_theta: sph.p_theta,
        p_psi: 0.0,
    };
    charts::euler_to_phase(&chart)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{auxiliary_points, xi0, xi1};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn z(q: [f64; 4], p: [f64; 4]) -> PhasePoint8 {
        PhasePoint8::new(Quat::from_array(q), Quat::from_array(p))
    }

    #[test]
    fn lc_examples() {
        let (x, y) = lc_map([1.0, 0.0], [0.0, 0.0], LcVariant::One).unwrap();
        assert_eq!((x, y), ([1.0, 0.0], [0.0, 0.0]));
        let (x, y) = lc_map([1.0, 2.0], [2.0, 0.0], LcVariant::One).unwrap();
        assert_eq!(x, [-3.0, 4.0]);
        assert!((y[0] - 0.2).abs() < 1e-15 && (y[1] - 0.4).abs() < 1e-15);
        assert!(lc_map([0.0, 0.0], [1.0, 0.0], LcVariant::One).is_err());
    }

    #[test]
    fn lc_variants_match_component_formulas() {
        let (q1, q2) = (0.7, -1.3);
        let expect = [
            [q1 * q1 - q2 * q2, 2.0 * q1 * q2],
            [q2 * q2 - q1 * q1, -2.0 * q1 * q2],
            [-2.0 * q1 * q2, q1 * q1 - q2 * q2],
            [2.0 * q1 * q2, q2 * q2 - q1 * q1],
        ];
        for (v, e) in LcVariant::ALL.iter().zip(expect) {
            let (x, _) = lc_map([q1, q2], [0.0, 0.0], *v).unwrap();
            assert!((x[0] - e[0]).abs() < 1e-15 && (x[1] - e[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn lc_default_lift_matches_component_formulas() {
        let (q, p) = ([0.4, 1.7], [-0.3, 2.2]);
        let (_, y) = lc_map(q, p, LcVariant::One).unwrap();
        let d = 2.0 * (q[0] * q[0] + q[1] * q[1]);
        assert!((y[0] - (q[0] * p[0] - q[1] * p[1]) / d).abs() < 1e-15);
        assert!((y[1] - (q[0] * p[1] + q[1] * p[0]) / d).abs() < 1e-15);
    }

    #[test]
    fn lc_preimage_round_trip() {
        let (x, y) = ([-0.4, 1.2], [0.3, -0.8]);
        let (q, p) = lc_preimage(x, y).unwrap();
        let (x2, y2) = lc_map(q, p, LcVariant::One).unwrap();
        for k in 0..2 {
            assert!((x[k] - x2[k]).abs() < 1e-14 && (y[k] - y2[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn ks_point_examples() {
        assert_eq!(ks_point(Quat::ONE, DefiningVector::PLUS_K).unwrap(), Quat::K);
        let x = ks_point(Quat::new(1.0, 1.0, 1.0, 1.0), DefiningVector::PLUS_K).unwrap();
        assert_eq!(x, Quat::new(0.0, 0.0, 4.0, 0.0));
        assert!(ks_point(Quat::ZERO, DefiningVector::PLUS_K).is_err());
    }

    #[test]
    fn ks_matches_explicit_coordinates() {
        for w in auxiliary_points(8, 30) {
            let [q1, q2, q3, q4] = w.q.to_array();
            let [p1, p2, p3, p4] = w.p.to_array();
            let img = ks_map(&w, DefiningVector::PLUS_K).unwrap();
            let x = [
                2.0 * (q2 * q4 - q1 * q3),
                2.0 * (q1 * q2 + q3 * q4),
                q1 * q1 - q2 * q2 - q3 * q3 + q4 * q4,
            ];
            let d = 2.0 * w.q.norm_sqr();
            let y = [
                (p4 * q2 + p2 * q4 - p1 * q3 - p3 * q1) / d,
                (p2 * q1 + p1 * q2 + p4 * q3 + p3 * q4) / d,
                (p1 * q1 - p2 * q2 - p3 * q3 + p4 * q4) / d,
            ];
            for k in 0..3 {
                assert!((img.x[k] - x[k]).abs() < 1e-13);
                assert!((img.y[k] - y[k]).abs() < 1e-13);
            }
            assert!((img.real_defect - xi0(&w) / d).abs() < 1e-13);
        }
    }

    #[test]
    fn ks_map_examples() {
        let img = ks_map(&z([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.0]), DefiningVector::PLUS_K).unwrap();
        assert_eq!(img.x, [0.0, 0.0, 1.0]);
        assert_eq!(img.y, [-1.0, 0.0, 0.0]);
        assert_eq!(img.real_defect, 0.0);
        let img = ks_map(&z([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0]), DefiningVector::PLUS_K).unwrap();
        assert_eq!(img.real_defect, -1.0);
        let img = ks_map(&z([0.3, 1.0, -2.0, 0.5], [0.0; 4]), DefiningVector::PLUS_K).unwrap();
        assert_eq!(img.y, [0.0; 3]);
        assert_eq!(img.real_defect, 0.0);
        assert!(ks_map(&z([0.0; 4], [1.0; 4]), DefiningVector::PLUS_K).is_err());
    }

    #[test]
    fn hopf_norm_for_every_defining_vector() {
        for w in auxiliary_points(9, 100) {
            for dv in DefiningVector::all() {
                let x = ks_point(w.q, dv).unwrap();
                let r2 = w.q.norm_sqr();
                assert!(x.w.abs() < 1e-13 * r2.max(1.0));
                assert!((x.norm() - r2).abs() < 1e-12 * r2);
            }
        }
    }

    #[test]
    fn defining_vector_parses() {
        assert_eq!("+k".parse::<DefiningVector>().unwrap(), DefiningVector::PLUS_K);
        let dv: DefiningVector = "-i".parse().unwrap();
        assert_eq!(dv.to_string(), "-i");
        assert!("q".parse::<DefiningVector>().is_err());
    }

    #[test]
    fn chi_action_examples() {
        let w = z([1.0, 0.0, 0.0, 0.0], [0.0; 4]);
        let r = chi_action(ChiAction::Zero, FRAC_PI_2, &w);
        assert!(r.q.max_abs_diff(Quat::K) < 1e-16);
        let w = z([0.3, -1.0, 0.5, 2.0], [1.0, 0.2, -0.7, 0.1]);
        assert_eq!(chi_action(ChiAction::One, 0.0, &w), w);
        assert_eq!(chi_action(ChiAction::Zero, 0.0, &w), w);
    }

    #[test]
    fn chi_zero_is_left_multiplication() {
        let w = z([0.3, -1.0, 0.5, 2.0], [1.0, 0.2, -0.7, 0.1]);
        let a = 0.83;
        let r = chi_action(ChiAction::Zero, a, &w);
        assert!(r.q.max_abs_diff(Quat::rotor(Axis::K, a) * w.q) < 1e-15);
        let r = chi_action(ChiAction::One, a, &w);
        assert!(r.q.max_abs_diff(w.q * Quat::rotor(Axis::K, a)) < 1e-15);
    }

    #[test]
    fn actions_compose() {
        let w = z([0.3, -1.0, 0.5, 2.0], [1.0, 0.2, -0.7, 0.1]);
        for which in [ChiAction::Zero, ChiAction::One] {
            let two = chi_action(which, 0.4, &chi_action(which, 1.1, &w));
            let one = chi_action(which, 1.5, &w);
            assert!(two.max_abs_diff(one) < 1e-14);
        }
    }

    #[test]
    fn fibers_are_collapsed() {
        for (n, w) in auxiliary_points(10, 200).into_iter().enumerate() {
            let alpha = -PI + 0.031 * n as f64;
            let base = ks_map(&w, DefiningVector::PLUS_K).unwrap();
            let moved = ks_map(&chi_action(ChiAction::Zero, alpha, &w), DefiningVector::PLUS_K).unwrap();
            assert!(
                base.phase().max_abs_diff(&moved.phase())
                    < 1e-10 * w.scale().powi(2).max(1.0) / w.q.norm_sqr().min(1.0)
            );
            let base = ks_map_permuted(&w).unwrap();
            let moved = ks_map_permuted(&chi_action(ChiAction::One, alpha, &w)).unwrap();
            assert!(
                base.phase().max_abs_diff(&moved.phase())
                    < 1e-10 * w.scale().powi(2).max(1.0) / w.q.norm_sqr().min(1.0)
            );
        }
    }

    #[test]
    fn permuted_variant_defect_is_the_bilinear() {
        for w in auxiliary_points(12, 20) {
            let img = ks_map_permuted(&w).unwrap();
            assert!((img.real_defect + xi1(&w) / (2.0 * w.q.norm_sqr())).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        let w = z([0.3, -1.0, 0.5, 2.0], [1.0, 0.2, -0.7, 0.1]);
        for dv in DefiningVector::all() {
            let jac = ks_jacobian(&w, dv).unwrap();
            let h = 1e-6;
            let base = w.to_array();
            for m in 0..8 {
                let mut a = base;
                let mut b = base;
                a[m] += h;
                b[m] -= h;
                let fa = ks_map(&PhasePoint8::from_array(a), dv).unwrap().phase().to_array();
                let fb = ks_map(&PhasePoint8::from_array(b), dv).unwrap().phase().to_array();
                for k in 0..6 {
                    let fd = (fa[k] - fb[k]) / (2.0 * h);
                    assert!((fd - jac[k][m]).abs() < 1e-7, "{dv} row {k} col {m}");
                }
            }
        }
    }

    #[test]
    fn preimage_round_trip_and_gauge() {
        let (x, y) = ([0.7, -1.2, 0.4], [0.3, 0.5, -0.9]);
        let a = ks_preimage(x, y, 0.3).unwrap();
        let img = ks_map(&a, DefiningVector::PLUS_K).unwrap();
        assert!(img.phase().max_abs_diff(&PhasePoint6::new(x, y)) < 1e-12);
        assert!(xi0(&a).abs() < 1e-13);
        let b = ks_preimage(x, y, 2.1).unwrap();
        // psi moves by -2 alpha along chi_0
        let moved = chi_action(ChiAction::Zero, (0.3 - 2.1) / 2.0, &a);
        assert!(moved.max_abs_diff(b) < 1e-12);
        assert!(ks_preimage([0.0, 0.0, 1.0], y, 0.0).is_err());
    }
}
