//! Real quaternions `w + x i + y j + z k`.
//!
//! Components are stored in the order `(w, x, y, z)`, which is also the
//! `1..4` index order used everywhere else in the crate: `q1 = w`,
//! `q2 = x`, `q3 = y`, `q4 = z`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// One of the three imaginary units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    I,
    J,
    K,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::I, Axis::J, Axis::K];

    pub fn unit(self) -> Quat {
        match self {
            Axis::I => Quat::I,
            Axis::J => Quat::J,
            Axis::K => Quat::K,
        }
    }

    /// Zero-based index among `(i, j, k)`.
    pub fn index(self) -> usize {
        match self {
            Axis::I => 0,
            Axis::J => 1,
            Axis::K => 2,
        }
    }
}

impl Quat {
    pub const ZERO: Quat = Quat::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quat = Quat::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quat = Quat::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quat = Quat::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quat::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Pure quaternion with the given vector part.
    pub fn pure(v: [f64; 3]) -> Self {
        Quat::new(0.0, v[0], v[1], v[2])
    }

    /// Basis element `e_m`, `m` in `0..4`.
    pub fn basis(m: usize) -> Self {
        let mut a = [0.0; 4];
        a[m] = 1.0;
        Quat::from_array(a)
    }

    pub fn vector(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Hamilton product, written as `(a1 b1 - a.b, a1 b + b1 a + a x b)`.
    pub fn mul(self, b: Quat) -> Quat {
        let a = self;
        let dot = a.x * b.x + a.y * b.y + a.z * b.z;
        let cross = [a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x];
        Quat::new(
            a.w * b.w - dot,
            a.w * b.x + b.w * a.x + cross[0],
            a.w * b.y + b.w * a.y + cross[1],
            a.w * b.z + b.w * a.z + cross[2],
        )
    }

    pub fn conj(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Euclidean inner product of the two 4-vectors, `Re[a* b]`.
    pub fn dot(self, b: Quat) -> f64 {
        self.w * b.w + self.x * b.x + self.y * b.y + self.z * b.z
    }

    pub fn norm_sqr(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        // hypot-style scaling is unnecessary at the magnitudes used here
        self.norm_sqr().sqrt()
    }

    pub fn scale(self, s: f64) -> Quat {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// `cos(angle) + axis sin(angle)`.
    pub fn rotor(axis: Axis, angle: f64) -> Quat {
        let (s, c) = angle.sin_cos();
        Quat::ONE.scale(c) + axis.unit().scale(s)
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(self, other: Quat) -> f64 {
        (self - other).to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, rhs: Quat) -> Quat {
        Quat::mul(self, rhs)
    }
}

impl Add for Quat {
    type Output = Quat;
    fn add(self, b: Quat) -> Quat {
        Quat::new(self.w + b.w, self.x + b.x, self.y + b.y, self.z + b.z)
    }
}

impl Sub for Quat {
    type Output = Quat;
    fn sub(self, b: Quat) -> Quat {
        Quat::new(self.w - b.w, self.x - b.x, self.y - b.y, self.z - b.z)
    }
}

impl Neg for Quat {
    type Output = Quat;
    fn neg(self) -> Quat {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn arb_quat() -> impl Strategy<Value = Quat> {
        prop::array::uniform4(-10.0f64..10.0).prop_map(Quat::from_array)
    }

    #[test]
    fn unit_products() {
        assert_eq!(Quat::I * Quat::J, Quat::K);
        assert_eq!(Quat::J * Quat::I, -Quat::K);
        assert_eq!(Quat::J * Quat::K, Quat::I);
        assert_eq!(Quat::K * Quat::I, Quat::J);
        assert_eq!(Quat::I * Quat::I, -Quat::ONE);
        assert_eq!(Quat::I * Quat::J * Quat::K, -Quat::ONE);
    }

    #[test]
    fn polynomial_expansion() {
        let a = Quat::new(1.0, 1.0, 0.0, 0.0);
        let b = Quat::new(1.0, 0.0, 1.0, 0.0);
        assert_eq!(a * b, Quat::new(1.0, 1.0, 1.0, 1.0));
        let a = Quat::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(a * a.conj(), Quat::new(30.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn conjugation() {
        assert_eq!(Quat::new(1.0, 2.0, 3.0, 4.0).conj(), Quat::new(1.0, -2.0, -3.0, -4.0));
        assert_eq!(Quat::K.conj(), -Quat::K);
        let a = Quat::new(0.3, -1.0, 2.5, 7.0);
        assert_eq!(a.conj().conj(), a);
    }

    #[test]
    fn norms() {
        assert_eq!(Quat::ONE.norm(), 1.0);
        assert_eq!(Quat::new(1.0, 2.0, 3.0, 4.0).norm(), 30f64.sqrt());
    }

    #[test]
    fn rotors() {
        assert_eq!(Quat::rotor(Axis::K, 0.0), Quat::ONE);
        let r = Quat::rotor(Axis::K, FRAC_PI_2);
        assert!(r.max_abs_diff(Quat::K) < 1e-16);
        for axis in Axis::ALL {
            for alpha in [-3.0, 0.1, 1.0, 2.5, 100.0] {
                assert!((Quat::rotor(axis, alpha).norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative(a in arb_quat(), b in arb_quat()) {
            let lhs = (a * b).norm();
            let rhs = a.norm() * b.norm();
            prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn product_is_associative(a in arb_quat(), b in arb_quat(), c in arb_quat()) {
            let scale = a.norm() * b.norm() * c.norm();
            prop_assert!((a * (b * c)).max_abs_diff((a * b) * c) <= 1e-14 * scale.max(1.0));
        }

        #[test]
        fn conj_reverses_products(a in arb_quat(), b in arb_quat()) {
            let scale = a.norm() * b.norm();
            prop_assert!((a * b).conj().max_abs_diff(b.conj() * a.conj()) <= 1e-14 * scale.max(1.0));
        }

        #[test]
        fn conjugation_keeps_scalar_part(q in arb_quat(), v in arb_quat()) {
            let r = q * (v * q.conj());
            let expected = v.w * q.norm_sqr();
            let scale = v.norm() * q.norm_sqr();
            prop_assert!((r.w - expected).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn norm_vanishes_only_at_zero(a in arb_quat()) {
            prop_assert!(a.norm() >= 0.0);
            prop_assert_eq!(a.norm() == 0.0, a == Quat::ZERO);
        }
    }
}
