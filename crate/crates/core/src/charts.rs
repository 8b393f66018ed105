//! Projective Euler and Projective Andoyer charts on `T*H_0`, and the
//! classical spherical and planar polar charts they project to.
//!
//! Records serialize with the fixed column orders
//! `rho,phi,theta,psi,P,Phi,Theta,Psi` and `rho,lambda,mu,nu,P,Lambda,M,N`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::maps::PhasePoint6;
use crate::numdiff;
use crate::observables::{centralizer, PhasePoint8};
use crate::quat::{Axis, Quat};

const TWO_PI: f64 = 2.0 * PI;
const FOUR_PI: f64 = 4.0 * PI;

/// Angle below which `sin theta` counts as a chart singularity.
const SIN_FLOOR: f64 = 1e-13;

/// Projective Euler coordinates.
///
/// `psi` is the fiber angle of the `Xi0` action. Because `q` and `-q` differ
/// by `2 pi` in `psi` at fixed `phi`, the recovered range is `[0, 4 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerChart {
    pub rho: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    #[serde(rename = "P")]
    pub p_rho: f64,
    #[serde(rename = "Phi")]
    pub p_phi: f64,
    #[serde(rename = "Theta")]
    pub p_theta: f64,
    #[serde(rename = "Psi")]
    pub p_psi: f64,
}

impl EulerChart {
    pub const HEADER: [&'static str; 8] = ["rho", "phi", "theta", "psi", "P", "Phi", "Theta", "Psi"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.rho,
            self.phi,
            self.theta,
            self.psi,
            self.p_rho,
            self.p_phi,
            self.p_theta,
            self.p_psi,
        ]
    }

    pub fn from_slice(a: &[f64]) -> Self {
        EulerChart {
            rho: a[0],
            phi: a[1],
            theta: a[2],
            psi: a[3],
            p_rho: a[4],
            p_phi: a[5],
            p_theta: a[6],
            p_psi: a[7],
        }
    }
}

/// Projective Andoyer coordinates. `p_mu` is the total rotor action `M`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AndoyerChart {
    pub rho: f64,
    pub lambda: f64,
    #[serde(rename = "mu")]
    pub mu_angle: f64,
    pub nu: f64,
    #[serde(rename = "P")]
    pub p_rho: f64,
    #[serde(rename = "Lambda")]
    pub p_lambda: f64,
    #[serde(rename = "M")]
    pub p_mu: f64,
    #[serde(rename = "N")]
    pub p_nu: f64,
}

impl AndoyerChart {
    pub const HEADER: [&'static str; 8] = ["rho", "lambda", "mu", "nu", "P", "Lambda", "M", "N"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.rho,
            self.lambda,
            self.mu_angle,
            self.nu,
            self.p_rho,
            self.p_lambda,
            self.p_mu,
            self.p_nu,
        ]
    }

    pub fn from_slice(a: &[f64]) -> Self {
        AndoyerChart {
            rho: a[0],
            lambda: a[1],
            mu_angle: a[2],
            nu: a[3],
            p_rho: a[4],
            p_lambda: a[5],
            p_mu: a[6],
            p_nu: a[7],
        }
    }
}

/// Spherical coordinates of `T*R^3` with conjugate momenta.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SphericalChart {
    pub rho: f64,
    pub theta: f64,
    pub phi: f64,
    #[serde(rename = "P")]
    pub p_rho: f64,
    #[serde(rename = "Theta")]
    pub p_theta: f64,
    #[serde(rename = "Phi")]
    pub p_phi: f64,
}

/// Planar Kepler phase point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint4 {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

fn check_radius(rho: f64) -> Result<()> {
    if rho > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("rho", rho, "radial coordinate must be positive"))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.sin() > SIN_FLOOR {
        Ok(())
    } else {
        Err(Error::domain("theta", theta, "chart is singular where sin(theta) <= 0"))
    }
}

/// Position part of the Euler chart and its Jacobian; column order
/// `(rho, phi, theta, psi)`.
fn euler_position(rho: f64, phi: f64, theta: f64, psi: f64) -> (Quat, Matrix4<f64>) {
    let s = rho.sqrt();
    let (sn, c) = (0.5 * theta).sin_cos();
    let (sa, ca) = (0.5 * (phi + psi)).sin_cos();
    let (sb, cb) = (0.5 * (phi - psi)).sin_cos();
    let q = Quat::new(s * c * sa, s * sn * cb, s * sn * sb, s * c * ca);
    let h = 0.5 * s;
    let d_rho = q.scale(0.5 / rho);
    let d_phi = Quat::new(h * c * ca, -h * sn * sb, h * sn * cb, -h * c * sa);
    let d_theta = Quat::new(-h * sn * sa, h * c * cb, h * c * sb, -h * sn * ca);
    let d_psi = Quat::new(h * c * ca, h * sn * sb, -h * sn * cb, -h * c * sa);
    let cols = [d_rho, d_phi, d_theta, d_psi].map(|d| Vector4::from(d.to_array()));
    (q, Matrix4::from_columns(&cols))
}

/// Projective Euler chart to `(q, p)`; `p` is the cotangent lift, solved from
/// `(dq/d(rho, phi, theta, psi))^T p = (P, Phi, Theta, Psi)`.
pub fn euler_to_phase(c: &EulerChart) -> Result<PhasePoint8> {
    ensure_finite("euler chart", &c.to_array())?;
    check_radius(c.rho)?;
    check_theta(c.theta)?;
    let (q, jac) = euler_position(c.rho, c.phi, c.theta, c.psi);
    let rhs = Vector4::new(c.p_rho, c.p_phi, c.p_theta, c.p_psi);
    let p = jac
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::domain("theta", c.theta, "singular Euler lift"))?;
    Ok(PhasePoint8::new(q, Quat::new(p[0], p[1], p[2], p[3])))
}

/// Inverse of [`euler_to_phase`] away from `q1 = q4 = 0` and `q2 = q3 = 0`.
pub fn phase_to_euler(z: &PhasePoint8) -> Result<EulerChart> {
    ensure_finite("phase point", &z.to_array())?;
    let [q1, q2, q3, q4] = z.q.to_array();
    let [p1, p2, p3, p4] = z.p.to_array();
    let rho = z.q.norm_sqr();
    let a2 = q1 * q1 + q4 * q4;
    let b2 = q2 * q2 + q3 * q3;
    let delta = (a2 * b2).sqrt();
    if rho == 0.0 || delta < 1e-13 * rho {
        return Err(Error::domain(
            "q",
            delta,
            "point lies on an exclusion manifold q1 = q4 = 0 or q2 = q3 = 0",
        ));
    }
    let theta = (2.0 * delta / rho).atan2((a2 - b2) / rho);
    let phi = (q1 * q2 + q3 * q4).atan2(q2 * q4 - q1 * q3).rem_euclid(TWO_PI);
    let psi0 = (q1 * q2 - q3 * q4).atan2(q2 * q4 + q1 * q3);
    // choose the 4 pi branch that reproduces the sign of q
    let half_sum = q1.atan2(q4);
    let psi = if ((phi + psi0) / 2.0 - half_sum).cos() >= 0.0 {
        psi0
    } else {
        psi0 + TWO_PI
    }
    .rem_euclid(FOUR_PI);
    let p_rho = z.q.dot(z.p) / (2.0 * rho);
    let p_theta = ((q2 * p2 + q3 * p3) * a2 - (q1 * p1 + q4 * p4) * b2) / (2.0 * delta);
    let p_phi = 0.5 * crate::observables::xi1(z);
    let p_psi = 0.5 * crate::observables::xi0(z);
    Ok(EulerChart {
        rho,
        phi,
        theta,
        psi,
        p_rho,
        p_phi,
        p_theta,
        p_psi,
    })
}

/// Spherical coordinates to Cartesian, with the cotangent lift on momenta.
pub fn spherical_to_cartesian(c: &SphericalChart) -> Result<PhasePoint6> {
    ensure_finite("spherical chart", &[c.rho, c.theta, c.phi, c.p_rho, c.p_theta, c.p_phi])?;
    check_radius(c.rho)?;
    check_theta(c.theta)?;
    let (st, ct) = c.theta.sin_cos();
    let (sp, cp) = c.phi.sin_cos();
    let x = [c.rho * st * cp, c.rho * st * sp, c.rho * ct];
    let k = 1.0 / (2.0 * c.rho * st);
    let radial = c.p_theta * (2.0 * c.theta).sin() + 2.0 * c.p_rho * c.rho * st * st;
    let y = [
        k * (cp * radial - 2.0 * c.p_phi * sp),
        k * (sp * radial + 2.0 * c.p_phi * cp),
        c.p_rho * ct - c.p_theta * st / c.rho,
    ];
    Ok(PhasePoint6::new(x, y))
}

/// Inverse of [`spherical_to_cartesian`] off the polar axis.
pub fn cartesian_to_spherical(pt: &PhasePoint6) -> Result<SphericalChart> {
    ensure_finite("cartesian point", &pt.to_array())?;
    let [x1, x2, x3] = pt.x;
    let rho = pt.radius();
    let planar = x1.hypot(x2);
    if rho == 0.0 || planar < SIN_FLOOR * rho {
        return Err(Error::domain("x", planar, "point lies on the polar axis"));
    }
    let theta = planar.atan2(x3);
    let phi = x2.atan2(x1).rem_euclid(TWO_PI);
    let y = pt.y;
    let p_rho = (x1 * y[0] + x2 * y[1] + x3 * y[2]) / rho;
    let (st, ct) = (planar / rho, x3 / rho);
    let (sp, cp) = (x2 / planar, x1 / planar);
    let p_theta = rho * (ct * cp * y[0] + ct * sp * y[1] - st * y[2]);
    let p_phi = x1 * y[1] - x2 * y[0];
    Ok(SphericalChart {
        rho,
        theta,
        phi,
        p_rho,
        p_theta,
        p_phi,
    })
}

/// Forgets `(psi, Psi)`: the projection from Euler to spherical coordinates.
pub fn project_euler(c: &EulerChart) -> SphericalChart {
    SphericalChart {
        rho: c.rho,
        theta: c.theta,
        phi: c.phi,
        p_rho: c.p_rho,
        p_theta: c.p_theta,
        p_phi: c.p_phi,
    }
}

/// Standard planar polar chart.
pub fn polar_to_cartesian2(rho: f64, mu_angle: f64, p_rho: f64, m: f64) -> Result<PhasePoint4> {
    ensure_finite("polar chart", &[rho, mu_angle, p_rho, m])?;
    check_radius(rho)?;
    let (s, c) = mu_angle.sin_cos();
    Ok(PhasePoint4 {
        x: [rho * c, rho * s],
        y: [p_rho * c - m / rho * s, p_rho * s + m / rho * c],
    })
}

/// Which Andoyer construction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AndoyerConvention {
    /// Full-angle rotor product, `p = q w* / (4 rho^2)`, `w1 = rho P`.
    Printed,
    /// Canonical chart: half-angle rotor product, prefactor and `w1` from
    /// [`calibrate_andoyer`].
    #[default]
    Calibrated,
}

/// Rotor geometry underlying an Andoyer construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AndoyerGeometry {
    /// `q = sqrt(rho) R(k,nu) R(i,J) R(k,mu) R(i,I) R(k,lambda)` and
    /// `w = (w1, 2S sin nu, 2S cos nu, 2N)`.
    Printed,
    /// `q = sqrt(rho) conj(R(k,nu/2) R(i,J/2) R(k,mu/2) R(i,I/2) R(k,lambda/2))`
    /// and `w = (w1, 2S sin nu, -2S cos nu, 2N)`.
    HalfAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prefactor {
    #[serde(rename = "1/(4rho^2)")]
    QuarterInverseSquare,
    #[serde(rename = "1/(2rho)")]
    HalfInverse,
    #[serde(rename = "1/rho")]
    Inverse,
}

impl Prefactor {
    pub const ALL: [Prefactor; 3] = [
        Prefactor::QuarterInverseSquare,
        Prefactor::HalfInverse,
        Prefactor::Inverse,
    ];

    pub fn value(self, rho: f64) -> f64 {
        match self {
            Prefactor::QuarterInverseSquare => 1.0 / (4.0 * rho * rho),
            Prefactor::HalfInverse => 1.0 / (2.0 * rho),
            Prefactor::Inverse => 1.0 / rho,
        }
    }
}

/// Choice of the scalar component `w1` as a multiple of `rho P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RadialWeight {
    #[serde(rename = "rho*P")]
    Single,
    #[serde(rename = "2*rho*P")]
    Double,
}

impl RadialWeight {
    pub const ALL: [RadialWeight; 2] = [RadialWeight::Single, RadialWeight::Double];

    pub fn value(self, rho: f64, p: f64) -> f64 {
        match self {
            RadialWeight::Single => rho * p,
            RadialWeight::Double => 2.0 * rho * p,
        }
    }
}

/// A complete Andoyer construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AndoyerScaling {
    pub geometry: AndoyerGeometry,
    pub prefactor: Prefactor,
    pub w1: RadialWeight,
}

impl AndoyerScaling {
    pub const PRINTED: AndoyerScaling = AndoyerScaling {
        geometry: AndoyerGeometry::Printed,
        prefactor: Prefactor::QuarterInverseSquare,
        w1: RadialWeight::Single,
    };

    /// The combination selected by [`calibrate_andoyer`].
    pub const CALIBRATED: AndoyerScaling = AndoyerScaling {
        geometry: AndoyerGeometry::HalfAngle,
        prefactor: Prefactor::Inverse,
        w1: RadialWeight::Double,
    };
}

impl AndoyerConvention {
    pub fn scaling(self) -> AndoyerScaling {
        match self {
            AndoyerConvention::Printed => AndoyerScaling::PRINTED,
            AndoyerConvention::Calibrated => AndoyerScaling::CALIBRATED,
        }
    }
}

fn check_andoyer(c: &AndoyerChart) -> Result<()> {
    ensure_finite("andoyer chart", &c.to_array())?;
    check_radius(c.rho)?;
    if c.p_mu <= 0.0 {
        return Err(Error::domain(
            "M",
            c.p_mu,
            "chart is undefined for M <= 0 (rectilinear motion)",
        ));
    }
    if c.p_nu.abs() > c.p_mu {
        return Err(Error::domain("N", c.p_nu, "requires |N| <= M"));
    }
    if c.p_lambda.abs() > c.p_mu {
        return Err(Error::domain("Lambda", c.p_lambda, "requires |Lambda| <= M"));
    }
    Ok(())
}

/// Andoyer chart to `(q, p)` under an explicit construction.
pub fn andoyer_to_phase_with(c: &AndoyerChart, scaling: AndoyerScaling) -> Result<PhasePoint8> {
    check_andoyer(c)?;
    let inc_i = (c.p_lambda / c.p_mu).clamp(-1.0, 1.0).acos();
    let inc_j = (c.p_nu / c.p_mu).clamp(-1.0, 1.0).acos();
    let s = (c.p_mu * c.p_mu - c.p_nu * c.p_nu).max(0.0).sqrt();
    let (sn, cn) = c.nu.sin_cos();
    let w1 = scaling.w1.value(c.rho, c.p_rho);
    let (rotor, w) = match scaling.geometry {
        AndoyerGeometry::Printed => (
            Quat::rotor(Axis::K, c.nu)
                * Quat::rotor(Axis::I, inc_j)
                * Quat::rotor(Axis::K, c.mu_angle)
                * Quat::rotor(Axis::I, inc_i)
                * Quat::rotor(Axis::K, c.lambda),
            Quat::new(w1, 2.0 * s * sn, 2.0 * s * cn, 2.0 * c.p_nu),
        ),
        AndoyerGeometry::HalfAngle => (
            (Quat::rotor(Axis::K, 0.5 * c.nu)
                * Quat::rotor(Axis::I, 0.5 * inc_j)
                * Quat::rotor(Axis::K, 0.5 * c.mu_angle)
                * Quat::rotor(Axis::I, 0.5 * inc_i)
                * Quat::rotor(Axis::K, 0.5 * c.lambda))
            .conj(),
            Quat::new(w1, 2.0 * s * sn, -2.0 * s * cn, 2.0 * c.p_nu),
        ),
    };
    let q = rotor.scale(c.rho.sqrt());
    let p = (q * w.conj()).scale(scaling.prefactor.value(c.rho));
    Ok(PhasePoint8::new(q, p))
}

/// Andoyer chart to `(q, p)`.
pub fn andoyer_to_phase(c: &AndoyerChart, convention: AndoyerConvention) -> Result<PhasePoint8> {
    andoyer_to_phase_with(c, convention.scaling())
}

/// Scores of one candidate construction over the calibration sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationTrial {
    pub scaling: AndoyerScaling,
    /// Max residual of `|p|^2 / 2 = 2 rho P^2 + 2 M^2 / rho`, the zero-frequency
    /// form of the planar Kepler identity.
    pub kepler_identity_error: f64,
    pub centralizer_error: f64,
    pub symplectic_defect: f64,
}

impl CalibrationTrial {
    pub fn identities_hold(&self, tol: f64) -> bool {
        self.kepler_identity_error < tol && self.centralizer_error < tol
    }
}

/// Outcome of the Andoyer calibration sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AndoyerCalibration {
    pub trials: Vec<CalibrationTrial>,
    /// The unique half-angle construction satisfying both identities.
    pub chosen: Option<AndoyerScaling>,
    /// Whether the chosen construction is also canonical.
    pub canonical: bool,
    pub tol: f64,
}

/// Random admissible Andoyer charts, used for calibration and tests.
pub fn sample_andoyer(rng: &mut impl rand::Rng, count: usize) -> Vec<AndoyerChart> {
    (0..count)
        .map(|_| {
            let m = rng.random_range(0.2..2.0);
            AndoyerChart {
                rho: rng.random_range(0.2..2.0),
                lambda: rng.random_range(0.0..TWO_PI),
                mu_angle: rng.random_range(0.0..TWO_PI),
                nu: rng.random_range(0.0..TWO_PI),
                p_rho: rng.random_range(-2.0..2.0),
                p_lambda: m * rng.random_range(-0.9..0.9),
                p_mu: m,
                p_nu: m * rng.random_range(-0.9..0.9),
            }
        })
        .collect()
}

/// Max symplectic defect of an Andoyer construction over `charts`.
pub fn andoyer_symplectic_defect(charts: &[AndoyerChart], scaling: AndoyerScaling) -> f64 {
    charts
        .iter()
        .map(|c| {
            let f = |a: &[f64]| -> Vec<f64> {
                andoyer_to_phase_with(&AndoyerChart::from_slice(a), scaling)
                    .map(|z| z.to_array().to_vec())
                    .unwrap_or_else(|_| vec![f64::NAN; 8])
            };
            numdiff::symplectic_defect(&numdiff::jacobian_with_steps(f, &c.to_array(), &andoyer_steps(c)))
        })
        .fold(0.0, f64::max)
}

/// Difference steps proportional to each momentum's distance from the chart
/// boundary `|N| = M`, `|Lambda| = M`, where the inclinations lose smoothness.
fn andoyer_steps(c: &AndoyerChart) -> [f64; 8] {
    let h = 1e-3;
    let gap = |v: f64| c.p_mu - v.abs();
    [
        h * c.rho,
        h,
        h,
        h,
        h * c.p_rho.abs().max(1.0),
        h * gap(c.p_lambda),
        h * gap(c.p_lambda.abs().max(c.p_nu.abs())),
        h * gap(c.p_nu),
    ]
}

/// Sweeps prefactor and `w1` for both rotor geometries, scoring the planar
/// Kepler identity, the centralizer identity and canonicity.
pub fn calibrate_andoyer(seed: u64, samples: usize, tol: f64) -> AndoyerCalibration {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let charts = sample_andoyer(&mut rng, samples);
    let mut trials = Vec::new();
    for geometry in [AndoyerGeometry::Printed, AndoyerGeometry::HalfAngle] {
        for prefactor in Prefactor::ALL {
            for w1 in RadialWeight::ALL {
                let scaling = AndoyerScaling {
                    geometry,
                    prefactor,
                    w1,
                };
                let mut kepler = 0.0f64;
                let mut cent = 0.0f64;
                for c in &charts {
                    let z = andoyer_to_phase_with(c, scaling).expect("sampled charts are admissible");
                    let lhs = 0.5 * z.p.norm_sqr();
                    let rhs = 2.0 * c.rho * c.p_rho * c.p_rho + 2.0 * c.p_mu * c.p_mu / c.rho;
                    kepler = kepler.max((lhs - rhs).abs() / rhs.abs().max(1.0));
                    cent = cent.max((centralizer(&z) - c.p_mu).abs() / c.p_mu.max(1.0));
                }
                let symplectic = andoyer_symplectic_defect(&charts[..charts.len().min(10)], scaling);
                trials.push(CalibrationTrial {
                    scaling,
                    kepler_identity_error: kepler,
                    centralizer_error: cent,
                    symplectic_defect: symplectic,
                });
            }
        }
    }
    let passing: Vec<&CalibrationTrial> = trials
        .iter()
        .filter(|t| t.scaling.geometry == AndoyerGeometry::HalfAngle && t.identities_hold(tol))
        .collect();
    let (chosen, canonical) = match passing.as_slice() {
        [one] => (Some(one.scaling), one.symplectic_defect < 1e-9),
        _ => (None, false),
    };
    AndoyerCalibration {
        trials,
        chosen,
        canonical,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{eval_with, xi0, xi1, Convention, ObservableId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_euler(rng: &mut ChaCha8Rng) -> EulerChart {
        EulerChart {
            rho: rng.random_range(0.1..3.0),
            phi: rng.random_range(0.0..TWO_PI),
            theta: rng.random_range(0.05..PI - 0.05),
            psi: rng.random_range(0.0..FOUR_PI),
            p_rho: rng.random_range(-2.0..2.0),
            p_phi: rng.random_range(-2.0..2.0),
            p_theta: rng.random_range(-2.0..2.0),
            p_psi: rng.random_range(-2.0..2.0),
        }
    }

    fn angle_diff(a: f64, b: f64, period: f64) -> f64 {
        let d = (a - b).rem_euclid(period);
        d.min(period - d)
    }

    #[test]
    fn euler_example() {
        let c = EulerChart {
            rho: 1.0,
            theta: FRAC_PI_2,
            ..Default::default()
        };
        let z = euler_to_phase(&c).unwrap();
        let h = 0.5f64.sqrt();
        assert!(z.q.max_abs_diff(Quat::new(0.0, h, 0.0, h)) < 1e-15);
        assert_eq!(z.p, Quat::ZERO);
        let back = phase_to_euler(&z).unwrap();
        assert!((back.rho - 1.0).abs() < 1e-15);
        assert!((back.theta - FRAC_PI_2).abs() < 1e-15);
        assert!(back.phi.abs() < 1e-15 && back.psi.abs() < 1e-15);
    }

    #[test]
    fn euler_domain_errors() {
        let mut c = EulerChart {
            rho: 1.0,
            theta: 0.0,
            ..Default::default()
        };
        assert!(euler_to_phase(&c).is_err());
        c.theta = PI;
        assert!(euler_to_phase(&c).is_err());
        c.theta = 1.0;
        c.rho = 0.0;
        assert!(matches!(euler_to_phase(&c), Err(Error::Domain { .. })));
        let on_m1 = PhasePoint8::new(Quat::new(0.0, 1.0, 0.5, 0.0), Quat::ONE);
        let on_m2 = PhasePoint8::new(Quat::new(1.0, 0.0, 0.0, -0.3), Quat::ONE);
        assert!(phase_to_euler(&on_m1).is_err());
        assert!(phase_to_euler(&on_m2).is_err());
        let near = PhasePoint8::new(Quat::new(1e-6, 1.0, 0.5, 0.0), Quat::ONE);
        assert!(phase_to_euler(&near).is_ok());
    }

    #[test]
    fn euler_round_trip_and_momenta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let c = random_euler(&mut rng);
            let z = euler_to_phase(&c).unwrap();
            assert!((z.q.norm_sqr() - c.rho).abs() < 1e-13 * c.rho);
            assert!((xi0(&z) - 2.0 * c.p_psi).abs() < 1e-12);
            assert!((xi1(&z) - 2.0 * c.p_phi).abs() < 1e-12);
            let tau1 = eval_with(ObservableId::Tau1, Convention::Printed, &z);
            assert!((tau1 / (2.0 * c.rho) - c.p_rho).abs() < 1e-12);
            let b = phase_to_euler(&z).unwrap();
            assert!((b.rho - c.rho).abs() < 1e-12);
            assert!(angle_diff(b.phi, c.phi, TWO_PI) < 1e-10);
            assert!((b.theta - c.theta).abs() < 1e-10);
            assert!(angle_diff(b.psi, c.psi, FOUR_PI) < 1e-10);
            for (u, v) in b.to_array()[4..].iter().zip(&c.to_array()[4..]) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn euler_chart_is_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let c = random_euler(&mut rng);
            let f = |a: &[f64]| euler_to_phase(&EulerChart::from_slice(a)).unwrap().to_array().to_vec();
            let jac = numdiff::jacobian(f, &c.to_array(), 2e-4);
            assert!(numdiff::symplectic_defect(&jac) < 1e-9);
        }
    }

    #[test]
    fn spherical_examples() {
        let c = SphericalChart {
            rho: 1.0,
            theta: FRAC_PI_2,
            p_phi: 1.0,
            ..Default::default()
        };
        let pt = spherical_to_cartesian(&c).unwrap();
        assert!(pt.max_abs_diff(&PhasePoint6::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])) < 1e-16);
        let back = cartesian_to_spherical(&pt).unwrap();
        assert!((back.theta - FRAC_PI_2).abs() < 1e-15 && back.p_theta.abs() < 1e-15);
        assert!((back.p_phi - 1.0).abs() < 1e-15 && back.p_rho.abs() < 1e-15);
        let pt = spherical_to_cartesian(&SphericalChart {
            rho: 2.0,
            theta: FRAC_PI_2,
            ..Default::default()
        })
        .unwrap();
        assert!(pt.max_abs_diff(&PhasePoint6::new([2.0, 0.0, 0.0], [0.0; 3])) < 1e-15);
        assert!(cartesian_to_spherical(&PhasePoint6::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn spherical_round_trip_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let pt = PhasePoint6::new(
                [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ],
                [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ],
            );
            let c = cartesian_to_spherical(&pt).unwrap();
            let back = spherical_to_cartesian(&c).unwrap();
            assert!(back.max_abs_diff(&pt) < 1e-10 * pt.radius().max(1.0));
            let gamma = 0.7;
            let y2: f64 = pt.y.iter().map(|v| v * v).sum();
            let cart = 0.5 * y2 - gamma / pt.radius();
            let st = c.theta.sin();
            let sph = 0.5
                * (c.p_rho.powi(2) + c.p_theta.powi(2) / c.rho.powi(2) + c.p_phi.powi(2) / (c.rho * st).powi(2))
                - gamma / c.rho;
            assert!((cart - sph).abs() < 1e-11 * cart.abs().max(1.0));
        }
    }

    #[test]
    fn polar_examples() {
        let pt = polar_to_cartesian2(1.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(pt.x, [1.0, 0.0]);
        assert_eq!(pt.y, [0.0, 1.0]);
        let pt = polar_to_cartesian2(2.0, FRAC_PI_2, 0.0, 0.0).unwrap();
        assert!(pt.x[0].abs() < 1e-15 && (pt.x[1] - 2.0).abs() < 1e-15);
        assert_eq!(pt.y, [0.0, 0.0]);
        assert!(polar_to_cartesian2(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn andoyer_example() {
        let c = AndoyerChart {
            rho: 1.0,
            p_lambda: 1.0,
            p_mu: 1.0,
            p_nu: 1.0,
            ..Default::default()
        };
        let z = andoyer_to_phase(&c, AndoyerConvention::Calibrated).unwrap();
        assert!(z.q.max_abs_diff(Quat::ONE) < 1e-16);
        assert!(z.p.w == 0.0 && z.p.x == 0.0 && z.p.y.abs() < 1e-16);
        assert!((centralizer(&z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn andoyer_domain_errors() {
        let base = AndoyerChart {
            rho: 1.0,
            p_mu: 1.0,
            ..Default::default()
        };
        for bad in [
            AndoyerChart { p_mu: 0.0, ..base },
            AndoyerChart { p_nu: 1.5, ..base },
            AndoyerChart { p_lambda: -1.5, ..base },
            AndoyerChart { rho: -1.0, ..base },
        ] {
            assert!(andoyer_to_phase(&bad, AndoyerConvention::Calibrated).is_err());
        }
    }

    #[test]
    fn calibrated_andoyer_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for c in sample_andoyer(&mut rng, 500) {
            let z = andoyer_to_phase(&c, AndoyerConvention::Calibrated).unwrap();
            let conv = Convention::Corrected;
            assert!((centralizer(&z) - c.p_mu).abs() < 1e-12);
            assert!((xi1(&z) - 2.0 * c.p_nu).abs() < 1e-12);
            assert!((xi0(&z) - 2.0 * c.p_lambda).abs() < 1e-12);
            let tau1 = eval_with(ObservableId::Tau1, conv, &z);
            assert!((tau1 / (2.0 * c.rho) - c.p_rho).abs() < 1e-12);
            let s = (c.p_mu.powi(2) - c.p_nu.powi(2)).sqrt();
            let rho = [
                eval_with(ObservableId::Rho1, conv, &z),
                eval_with(ObservableId::Rho2, conv, &z),
                eval_with(ObservableId::Rho3, conv, &z),
            ];
            let w = [2.0 * s * c.nu.sin(), -2.0 * s * c.nu.cos(), 2.0 * c.p_nu];
            for k in 0..3 {
                assert!((rho[k] - w[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn calibration_selects_a_unique_canonical_choice() {
        let cal = calibrate_andoyer(11, 40, 1e-10);
        assert_eq!(cal.chosen, Some(AndoyerScaling::CALIBRATED));
        assert!(cal.canonical);
        let printed = cal
            .trials
            .iter()
            .find(|t| t.scaling == AndoyerScaling::PRINTED)
            .unwrap();
        assert!(!printed.identities_hold(1e-10));
        assert!(cal
            .trials
            .iter()
            .filter(|t| t.scaling.geometry == AndoyerGeometry::Printed)
            .all(|t| t.symplectic_defect > 1e-3));
    }
}
