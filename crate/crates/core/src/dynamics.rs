//! Hamiltonians on the quaternion, Cartesian, Euler and Andoyer layouts,
//! their canonical vector fields, and the two fictitious-time
//! regularizations of the oscillator in Euler variables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::lc_preimage;
use crate::numdiff;
use crate::observables::{xi0, xi1, PhasePoint8};

/// Guard on `sin theta` for every Euler-chart Hamiltonian.
pub const SIN_THETA_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// `|p|^2 / 2 + omega |q|^2 / 2` on `(q, p)`.
    Osc4,
    /// `|y|^2 / 2 - mu / |x|` on `(x, y)` in space.
    Kepler3,
    /// Planar Kepler.
    Kepler2,
    /// `(|x| / h)(K + 2 h^2) + mu / h` with `K` the planar Kepler Hamiltonian.
    AuxKepler2,
    /// The oscillator in Euler variables.
    EulerOsc,
    /// `omega rho^2 / 8 + rho^2 P^2 / 2 - h rho / 4`.
    EulerSeparableRho,
    /// The spherical rotor `(Theta^2 + (Phi^2 + Psi^2 - 2 Phi Psi cos theta) / sin^2 theta) / 2`.
    EulerSeparableTheta,
    /// Sum of the two separable parts, `(rho / 4)(H_omega - h)`.
    EulerSeparable,
    /// The regularized oscillator `K~` on the Euler layout.
    EulerRegularized,
    /// Spatial Kepler in spherical variables with `gamma = h / 4`, on the Euler layout.
    KeplerSpherical,
    /// Planar Kepler in polar variables on the Andoyer layout.
    AndoyerRegularized,
    /// `Xi0` as a Hamiltonian on `(q, p)`.
    TwinBilinear,
    /// `Xi1` as a Hamiltonian on `(q, p)`.
    Bilinear,
}

impl HamiltonianKind {
    pub const ALL: [HamiltonianKind; 13] = [
        HamiltonianKind::Osc4,
        HamiltonianKind::Kepler3,
        HamiltonianKind::Kepler2,
        HamiltonianKind::AuxKepler2,
        HamiltonianKind::EulerOsc,
        HamiltonianKind::EulerSeparableRho,
        HamiltonianKind::EulerSeparableTheta,
        HamiltonianKind::EulerSeparable,
        HamiltonianKind::EulerRegularized,
        HamiltonianKind::KeplerSpherical,
        HamiltonianKind::AndoyerRegularized,
        HamiltonianKind::TwinBilinear,
        HamiltonianKind::Bilinear,
    ];

    pub fn layout(self) -> Layout {
        use HamiltonianKind::*;
        match self {
            Osc4 | TwinBilinear | Bilinear => Layout::Quaternion,
            Kepler3 => Layout::Cartesian3,
            Kepler2 | AuxKepler2 => Layout::Cartesian2,
            EulerOsc | EulerSeparableRho | EulerSeparableTheta | EulerSeparable | EulerRegularized
            | KeplerSpherical => Layout::Euler,
            AndoyerRegularized => Layout::Andoyer,
        }
    }

    pub fn name(self) -> &'static str {
        use HamiltonianKind::*;
        match self {
            Osc4 => "osc4",
            Kepler3 => "kepler3",
            Kepler2 => "kepler2",
            AuxKepler2 => "aux_kepler2",
            EulerOsc => "euler_osc",
            EulerSeparableRho => "euler_separable_rho",
            EulerSeparableTheta => "euler_separable_theta",
            EulerSeparable => "euler_separable",
            EulerRegularized => "euler_regularized",
            KeplerSpherical => "kepler_spherical",
            AndoyerRegularized => "andoyer_regularized",
            TwinBilinear => "xi0",
            Bilinear => "xi1",
        }
    }
}

impl fmt::Display for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HamiltonianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HamiltonianKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown Hamiltonian kind `{s}`")))
    }
}

/// Coordinate layout of a state vector: positions, then conjugate momenta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    Quaternion,
    Cartesian3,
    Cartesian2,
    Euler,
    Andoyer,
}

impl Layout {
    pub fn dim(self) -> usize {
        match self {
            Layout::Cartesian3 => 6,
            Layout::Cartesian2 => 4,
            _ => 8,
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Layout::Quaternion => &["q1", "q2", "q3", "q4", "p1", "p2", "p3", "p4"],
            Layout::Cartesian3 => &["x1", "x2", "x3", "y1", "y2", "y3"],
            Layout::Cartesian2 => &["x1", "x2", "y1", "y2"],
            Layout::Euler => &crate::charts::EulerChart::HEADER,
            Layout::Andoyer => &crate::charts::AndoyerChart::HEADER,
        }
    }
}

/// A Hamiltonian together with its parameters. `gamma` is always `h / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "default_grav_param")]
    pub grav_param: f64,
    #[serde(default)]
    pub h: f64,
}

fn default_grav_param() -> f64 {
    1.0
}

impl HamiltonianSpec {
    pub fn new(kind: HamiltonianKind) -> Self {
        HamiltonianSpec {
            kind,
            omega: 0.0,
            grav_param: 1.0,
            h: 0.0,
        }
    }

    pub fn osc4(omega: f64) -> Self {
        Self::new(HamiltonianKind::Osc4).with_omega(omega)
    }

    pub fn kepler3(grav_param: f64) -> Self {
        Self::new(HamiltonianKind::Kepler3).with_grav_param(grav_param)
    }

    pub fn kepler2(grav_param: f64) -> Self {
        Self::new(HamiltonianKind::Kepler2).with_grav_param(grav_param)
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_grav_param(mut self, grav_param: f64) -> Self {
        self.grav_param = grav_param;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.h / 4.0
    }

    pub fn layout(&self) -> Layout {
        self.kind.layout()
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::ensure_finite("hamiltonian parameters", &[self.omega, self.grav_param, self.h])?;
        if self.omega < 0.0 {
            return Err(Error::Config(format!("omega must be >= 0, got {}", self.omega)));
        }
        if self.grav_param <= 0.0 {
            return Err(Error::Config(format!(
                "grav_param must be > 0, got {}",
                self.grav_param
            )));
        }
        if self.kind == HamiltonianKind::AuxKepler2 && self.h == 0.0 {
            return Err(Error::Config("aux_kepler2 needs h != 0".into()));
        }
        Ok(())
    }
}

/// Flat state vector with an optional accumulated physical time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub coords: Vec<f64>,
    pub time: Option<f64>,
}

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Self {
        StateVector { coords, time: None }
    }

    pub fn with_time(coords: Vec<f64>, time: f64) -> Self {
        StateVector {
            coords,
            time: Some(time),
        }
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(coords: Vec<f64>) -> Self {
        StateVector::new(coords)
    }
}

fn check_dim(spec: &HamiltonianSpec, s: &[f64]) -> Result<()> {
    let layout = spec.layout();
    if s.len() != layout.dim() {
        return Err(Error::Dimension {
            kind: spec.kind.name(),
            expected: layout.dim(),
            got: s.len(),
        });
    }
    crate::error::ensure_finite("state", s)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "must be positive"))
    }
}

/// Spherical-rotor quantity `Theta^2 + (Phi^2 + Psi^2 - 2 Phi Psi cos theta) / sin^2 theta`
/// and its partials in `(theta, Theta, Phi, Psi)`.
struct Rotor {
    value: f64,
    d_theta: f64,
    d_ptheta: f64,
    d_pphi: f64,
    d_ppsi: f64,
}

fn sin_theta(theta: f64) -> Result<(f64, f64)> {
    let (s, c) = theta.sin_cos();
    if s > SIN_THETA_MIN {
        Ok((s, c))
    } else {
        Err(Error::domain("theta", theta, "Euler chart requires sin(theta) > 1e-8"))
    }
}

fn rotor(theta: f64, pt: f64, pphi: f64, ppsi: f64) -> Result<Rotor> {
    let (s, c) = sin_theta(theta)?;
    let b = pphi * pphi + ppsi * ppsi - 2.0 * pphi * ppsi * c;
    let s2 = s * s;
    Ok(Rotor {
        value: pt * pt + b / s2,
        d_theta: 2.0 * pphi * ppsi / s - 2.0 * b * c / (s2 * s),
        d_ptheta: 2.0 * pt,
        d_pphi: 2.0 * (pphi - ppsi * c) / s2,
        d_ppsi: 2.0 * (ppsi - pphi * c) / s2,
    })
}

/// Kepler rotor part with `Psi` dropped: `Theta^2 + Phi^2 / sin^2 theta`.
fn kepler_rotor(theta: f64, pt: f64, pphi: f64) -> Result<Rotor> {
    let (s, c) = sin_theta(theta)?;
    let s2 = s * s;
    Ok(Rotor {
        value: pt * pt + pphi * pphi / s2,
        d_theta: -2.0 * pphi * pphi * c / (s2 * s),
        d_ptheta: 2.0 * pt,
        d_pphi: 2.0 * pphi / s2,
        d_ppsi: 0.0,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn norm_sqr(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Value and gradient `dH/d(coords)` in one pass.
fn evaluate(spec: &HamiltonianSpec, s: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
    check_dim(spec, s)?;
    use HamiltonianKind::*;
    let n = s.len();
    let mut g = vec![0.0; if want_grad { n } else { 0 }];
    let (w, mu, h) = (spec.omega, spec.grav_param, spec.h);
    let value = match spec.kind {
        Osc4 => {
            let (q, p) = s.split_at(4);
            if want_grad {
                for k in 0..4 {
                    g[k] = w * q[k];
                    g[4 + k] = p[k];
                }
            }
            0.5 * norm_sqr(p) + 0.5 * w * norm_sqr(q)
        }
        TwinBilinear | Bilinear => {
            let z = PhasePoint8::from_slice(s);
            let id = if spec.kind == TwinBilinear {
                crate::observables::ObservableId::Xi0
            } else {
                crate::observables::ObservableId::Xi1
            };
            if want_grad {
                g.copy_from_slice(&crate::observables::gradient(
                    id,
                    crate::observables::Convention::Printed,
                    &z,
                ));
            }
            if spec.kind == TwinBilinear {
                xi0(&z)
            } else {
                xi1(&z)
            }
        }
        Kepler3 | Kepler2 => {
            let d = n / 2;
            let (x, y) = s.split_at(d);
            let r = norm(x);
            positive("|x|", r)?;
            if want_grad {
                for k in 0..d {
                    g[k] = mu * x[k] / (r * r * r);
                    g[d + k] = y[k];
                }
            }
            0.5 * norm_sqr(y) - mu / r
        }
        AuxKepler2 => {
            let (x, y) = s.split_at(2);
            let r = norm(x);
            positive("|x|", r)?;
            let kepler = 0.5 * norm_sqr(y) - mu / r;
            if want_grad {
                // (r / h)(|y|^2 / 2 + 2 h^2) after cancelling mu / h
                let inner = 0.5 * norm_sqr(y) + 2.0 * h * h;
                for k in 0..2 {
                    g[k] = x[k] / (r * h) * inner;
                    g[2 + k] = r / h * y[k];
                }
            }
            r / h * (kepler + 2.0 * h * h) + mu / h
        }
        EulerOsc | EulerSeparableRho | EulerSeparableTheta | EulerSeparable | EulerRegularized | KeplerSpherical => {
            let rho = s[0];
            let (theta, pr, pphi, pt, ppsi) = (s[2], s[4], s[5], s[6], s[7]);
            if spec.kind != EulerSeparableRho {
                positive("rho", rho)?;
            }
            let rot = match spec.kind {
                EulerSeparableRho => None,
                KeplerSpherical => Some(kepler_rotor(theta, pt, pphi)?),
                _ => Some(rotor(theta, pt, pphi, ppsi)?),
            };
            // H = a(rho, P) + c(rho) R, with R the rotor quantity
            let (a, da_rho, da_p, c, dc_rho) = match spec.kind {
                EulerOsc => (
                    rho * w / 2.0 + 2.0 * rho * pr * pr,
                    w / 2.0 + 2.0 * pr * pr,
                    4.0 * rho * pr,
                    2.0 / rho,
                    -2.0 / (rho * rho),
                ),
                EulerSeparableRho => (
                    w * rho * rho / 8.0 + rho * rho * pr * pr / 2.0 - h * rho / 4.0,
                    w * rho / 4.0 + rho * pr * pr - h / 4.0,
                    rho * rho * pr,
                    0.0,
                    0.0,
                ),
                EulerSeparableTheta => (0.0, 0.0, 0.0, 0.5, 0.0),
                EulerSeparable => (
                    w * rho * rho / 8.0 + rho * rho * pr * pr / 2.0 - h * rho / 4.0,
                    w * rho / 4.0 + rho * pr * pr - h / 4.0,
                    rho * rho * pr,
                    0.5,
                    0.0,
                ),
                EulerRegularized | KeplerSpherical => {
                    let gamma = spec.gamma();
                    (
                        0.5 * pr * pr - gamma / rho,
                        gamma / (rho * rho),
                        pr,
                        0.5 / (rho * rho),
                        -1.0 / (rho * rho * rho),
                    )
                }
                _ => unreachable!(),
            };
            let r = rot.as_ref().map_or(0.0, |r| r.value);
            if want_grad {
                g[0] = da_rho + dc_rho * r;
                g[4] = da_p;
                if let Some(rot) = &rot {
                    g[2] = c * rot.d_theta;
                    g[5] = c * rot.d_pphi;
                    g[6] = c * rot.d_ptheta;
                    g[7] = c * rot.d_ppsi;
                }
            }
            a + c * r
        }
        AndoyerRegularized => {
            let (rho, pr, m) = (s[0], s[4], s[6]);
            positive("rho", rho)?;
            let gamma = spec.gamma();
            if want_grad {
                g[0] = -m * m / (rho * rho * rho) + gamma / (rho * rho);
                g[4] = pr;
                g[6] = m / (rho * rho);
            }
            0.5 * (pr * pr + m * m / (rho * rho)) - gamma / rho
        }
    };
    Ok((value, g))
}

/// Value of the Hamiltonian at a state.
pub fn ham_value(spec: &HamiltonianSpec, s: &[f64]) -> Result<f64> {
    evaluate(spec, s, false).map(|(v, _)| v)
}

/// Analytic gradient with respect to the state coordinates.
pub fn ham_gradient(spec: &HamiltonianSpec, s: &[f64]) -> Result<Vec<f64>> {
    evaluate(spec, s, true).map(|(_, g)| g)
}

/// Five-point central-difference gradient, for cross-checking.
pub fn fd_gradient(spec: &HamiltonianSpec, s: &[f64], step: f64) -> Result<Vec<f64>> {
    ham_value(spec, s)?;
    let f = |a: &[f64]| vec![ham_value(spec, a).unwrap_or(f64::NAN)];
    Ok(numdiff::jacobian(f, s, step).remove(0))
}

/// Canonical equations `dq = dH/dp`, `dp = -dH/dq` from a gradient.
pub fn symplectic_field(grad: &[f64]) -> Vec<f64> {
    let d = grad.len() / 2;
    let mut out = vec![0.0; grad.len()];
    for k in 0..d {
        out[k] = grad[d + k];
        out[d + k] = -grad[k];
    }
    out
}

/// Hamiltonian vector field at a state.
pub fn ham_field(spec: &HamiltonianSpec, s: &StateVector) -> Result<StateVector> {
    Ok(StateVector::new(symplectic_field(&ham_gradient(spec, &s.coords)?)))
}

/// The two fictitious-time regularizations of the Euler oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationMode {
    /// `K = (rho / 4)(H_omega - h)`, separable, with `d tau = (rho / 4) ds`.
    PoincareRhoOver4,
    /// `K~ = (1 / (4 rho))(H_omega - h) - omega / 8`, with `d tau = ds / (4 rho)`.
    PoincareInv4Rho,
}

impl FromStr for RegularizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "poincare_rho_over_4" => Ok(RegularizationMode::PoincareRhoOver4),
            "poincare_inv_4rho" => Ok(RegularizationMode::PoincareInv4Rho),
            other => Err(Error::Config(format!("unknown regularization mode `{other}`"))),
        }
    }
}

/// Rate of physical time with respect to the integration variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeFactor {
    #[serde(rename = "4rho")]
    FourRho,
    #[serde(rename = "rho_over_4")]
    RhoOver4,
    #[serde(rename = "abs_x_over_h")]
    AbsXOverH,
}

impl TimeFactor {
    /// `dt/ds` at a state. `rho` is the first coordinate on radial layouts and
    /// `|q|^2` on the quaternion layout.
    pub fn rate(self, spec: &HamiltonianSpec, s: &[f64]) -> Result<f64> {
        let rho = || -> Result<f64> {
            match spec.layout() {
                Layout::Quaternion => Ok(norm_sqr(&s[..4])),
                Layout::Euler | Layout::Andoyer => Ok(s[0]),
                _ => Err(Error::Unsupported(format!(
                    "time factor needs rho, layout of {}",
                    spec.kind
                ))),
            }
        };
        match self {
            TimeFactor::FourRho => Ok(4.0 * rho()?),
            TimeFactor::RhoOver4 => Ok(rho()? / 4.0),
            TimeFactor::AbsXOverH => {
                let d = match spec.layout() {
                    Layout::Cartesian2 => 2,
                    Layout::Cartesian3 => 3,
                    _ => return Err(Error::Unsupported("abs_x_over_h needs a Cartesian layout".into())),
                };
                if spec.h == 0.0 {
                    return Err(Error::Config("abs_x_over_h needs h != 0".into()));
                }
                Ok(norm(&s[..d]) / spec.h)
            }
        }
    }
}

/// A regularized Euler oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularized {
    pub mode: RegularizationMode,
    /// The full regularized Hamiltonian.
    pub spec: HamiltonianSpec,
    /// `(K_rho, K_theta)` for the separable mode.
    pub parts: Option<(HamiltonianSpec, HamiltonianSpec)>,
    /// Value of `spec` on the level `H_omega = h`.
    pub manifold_value: f64,
    /// Rate of oscillator time with respect to the new time.
    pub time_factor: TimeFactor,
}

/// Fixes the level `H_omega = h` and changes time as described by `mode`.
pub fn regularize(spec: &HamiltonianSpec, mode: RegularizationMode, h: f64) -> Result<Regularized> {
    if spec.kind != HamiltonianKind::EulerOsc {
        return Err(Error::Unsupported(format!(
            "regularization applies to euler_osc, not {}",
            spec.kind
        )));
    }
    let base = HamiltonianSpec { h, ..*spec };
    Ok(match mode {
        RegularizationMode::PoincareRhoOver4 => Regularized {
            mode,
            spec: HamiltonianSpec {
                kind: HamiltonianKind::EulerSeparable,
                ..base
            },
            parts: Some((
                HamiltonianSpec {
                    kind: HamiltonianKind::EulerSeparableRho,
                    ..base
                },
                HamiltonianSpec {
                    kind: HamiltonianKind::EulerSeparableTheta,
                    ..base
                },
            )),
            manifold_value: 0.0,
            time_factor: TimeFactor::RhoOver4,
        },
        RegularizationMode::PoincareInv4Rho => Regularized {
            mode,
            spec: HamiltonianSpec {
                kind: HamiltonianKind::EulerRegularized,
                ..base
            },
            parts: None,
            manifold_value: -spec.omega / 8.0,
            time_factor: TimeFactor::FourRho,
        },
    })
}

/// The Euler angles `phi` and `psi` recovered by quadrature along a
/// trajectory on the Euler layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratures {
    pub s: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Largest drift of `Phi` or `Psi` accepted by [`quadratures`].
pub const QUADRATURE_DRIFT_TOL: f64 = 1e-8;

/// Cumulative trapezoidal integrals of `dH/dPhi` and `dH/dPsi`, started from
/// the initial `phi` and `psi`.
pub fn quadratures(spec: &HamiltonianSpec, traj: &crate::flow::Trajectory) -> Result<Quadratures> {
    if spec.layout() != Layout::Euler {
        return Err(Error::Unsupported(format!(
            "quadratures need an Euler layout, not {}",
            spec.kind
        )));
    }
    let first = traj
        .samples
        .first()
        .ok_or_else(|| Error::Unsupported("empty trajectory".into()))?;
    for smp in &traj.samples {
        for k in [5, 7] {
            let drift = (smp.state[k] - first.state[k]).abs();
            if drift > QUADRATURE_DRIFT_TOL {
                return Err(Error::domain(
                    if k == 5 { "Phi" } else { "Psi" },
                    drift,
                    "cyclic momentum drifted beyond 1e-8",
                ));
            }
        }
    }
    let mut out = Quadratures {
        s: vec![first.s],
        phi: vec![first.state[1]],
        psi: vec![first.state[3]],
    };
    let mut prev = ham_gradient(spec, &first.state)?;
    for w in traj.samples.windows(2) {
        let g = ham_gradient(spec, &w[1].state)?;
        let ds = w[1].s - w[0].s;
        let phi = out.phi.last().unwrap() + 0.5 * ds * (prev[5] + g[5]);
        let psi = out.psi.last().unwrap() + 0.5 * ds * (prev[7] + g[7]);
        out.s.push(w[1].s);
        out.phi.push(phi);
        out.psi.push(psi);
        prev = g;
    }
    Ok(out)
}

/// Scaled Levi-Civita oscillator energy `(|q'|^2 + |p'|^2) / 2` of a planar
/// Kepler point, with `q' = 2 sqrt(h) q`, `p' = p / (2 sqrt(h))` and `(q, p)`
/// the principal Levi-Civita preimage. On the level `K = -2 h^2` it equals
/// `mu / h`.
pub fn lc_oscillator_energy(x: [f64; 2], y: [f64; 2], h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::domain("h", h, "scaling needs h > 0"));
    }
    let (q, p) = lc_preimage(x, y)?;
    let a = 4.0 * h * (q[0] * q[0] + q[1] * q[1]);
    let b = (p[0] * p[0] + p[1] * p[1]) / (4.0 * h);
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{euler_to_phase, EulerChart};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_state(kind: HamiltonianKind, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut s: Vec<f64> = (0..kind.layout().dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        match kind.layout() {
            Layout::Euler => {
                s[0] = rng.random_range(0.2..2.0);
                s[2] = rng.random_range(0.1..PI - 0.1);
            }
            Layout::Andoyer => {
                s[0] = rng.random_range(0.2..2.0);
                s[6] = rng.random_range(0.2..2.0);
            }
            Layout::Cartesian2 | Layout::Cartesian3 => s[0] += 3.0,
            Layout::Quaternion => {}
        }
        s
    }

    fn spec(kind: HamiltonianKind) -> HamiltonianSpec {
        HamiltonianSpec::new(kind)
            .with_omega(1.3)
            .with_grav_param(0.8)
            .with_h(2.1)
    }

    #[test]
    fn examples() {
        let h = 0.5f64.sqrt();
        let osc = HamiltonianSpec::osc4(1.0);
        assert!((ham_value(&osc, &[0.0, h, 0.0, h, 0.0, 0.0, 0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let e = EulerChart {
            rho: 1.0,
            theta: FRAC_PI_2,
            ..Default::default()
        };
        let euler = HamiltonianSpec::new(HamiltonianKind::EulerOsc).with_omega(1.0);
        assert!((ham_value(&euler, &e.to_array()).unwrap() - 0.5).abs() < 1e-15);
        let ks = HamiltonianSpec::new(HamiltonianKind::KeplerSpherical).with_h(4.0);
        let c = EulerChart {
            rho: 1.0,
            theta: FRAC_PI_2,
            p_phi: 1.0,
            ..Default::default()
        };
        assert!((ham_value(&ks, &c.to_array()).unwrap() + 0.5).abs() < 1e-15);
        let and = HamiltonianSpec::new(HamiltonianKind::AndoyerRegularized).with_h(4.0);
        let a = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert!((ham_value(&and, &a).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn field_examples() {
        let f = ham_field(
            &HamiltonianSpec::osc4(1.0),
            &vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0].into(),
        )
        .unwrap();
        assert_eq!(f.coords, vec![0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        let f = ham_field(
            &HamiltonianSpec::kepler3(1.0),
            &vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0].into(),
        )
        .unwrap();
        assert_eq!(f.coords, vec![0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn domain_and_dimension_errors() {
        let e = HamiltonianSpec::new(HamiltonianKind::EulerOsc);
        let mut s = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        match ham_value(&e, &s) {
            Err(Error::Domain { coordinate, .. }) => assert_eq!(coordinate, "theta"),
            other => panic!("{other:?}"),
        }
        s[2] = 1.0;
        s[0] = -1.0;
        assert!(ham_value(&e, &s).is_err());
        assert!(matches!(ham_value(&e, &s[..6]), Err(Error::Dimension { .. })));
        assert!(ham_value(&HamiltonianSpec::kepler3(1.0), &[0.0; 6]).is_err());
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in HamiltonianKind::ALL {
            let sp = spec(kind);
            for _ in 0..200 {
                let s = random_state(kind, &mut rng);
                let g = ham_gradient(&sp, &s).unwrap();
                let fd = fd_gradient(&sp, &s, 1e-4).unwrap();
                let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() < 1e-7 * scale, "{kind}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn euler_pullback_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let osc = HamiltonianSpec::osc4(1.7);
        let eul = HamiltonianSpec::new(HamiltonianKind::EulerOsc).with_omega(1.7);
        for _ in 0..300 {
            let s = random_state(HamiltonianKind::EulerOsc, &mut rng);
            let z = euler_to_phase(&EulerChart::from_slice(&s)).unwrap();
            let a = ham_value(&osc, &z.to_array()).unwrap();
            let b = ham_value(&eul, &s).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn separable_split_and_regularized_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = HamiltonianSpec::new(HamiltonianKind::EulerOsc).with_omega(0.9);
        let h = 1.6;
        let sep = regularize(&base, RegularizationMode::PoincareRhoOver4, h).unwrap();
        let reg = regularize(&base, RegularizationMode::PoincareInv4Rho, h).unwrap();
        let (kr, kt) = sep.parts.unwrap();
        for _ in 0..300 {
            let s = random_state(HamiltonianKind::EulerOsc, &mut rng);
            let hw = ham_value(&base, &s).unwrap();
            let k = ham_value(&sep.spec, &s).unwrap();
            let split = ham_value(&kr, &s).unwrap() + ham_value(&kt, &s).unwrap();
            assert!((s[0] / 4.0 * (hw - h) - k).abs() < 1e-12 * k.abs().max(1.0));
            assert!((k - split).abs() < 1e-12 * k.abs().max(1.0));
            let kt_val = ham_value(&reg.spec, &s).unwrap();
            let shifted = (hw - h) / (4.0 * s[0]) + reg.manifold_value;
            assert!((kt_val - shifted).abs() < 1e-12 * kt_val.abs().max(1.0));
            let field = ham_gradient(&kt, &s).unwrap();
            assert_eq!((field[0], field[4]), (0.0, 0.0));
        }
        assert!(regularize(&HamiltonianSpec::osc4(1.0), RegularizationMode::PoincareInv4Rho, h).is_err());
    }

    #[test]
    fn separable_rho_matches_closed_form() {
        let sp = spec(HamiltonianKind::EulerSeparableRho);
        let (rho, p) = (0.7, -0.4);
        let v = ham_value(&sp, &[rho, 0.0, 1.0, 0.0, p, 0.0, 0.0, 0.0]).unwrap();
        let expect = sp.omega * rho * rho / 8.0 + rho * rho * p * p / 2.0 - sp.h * rho / 4.0;
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn coulomb_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reg = spec(HamiltonianKind::EulerRegularized);
        let kep = spec(HamiltonianKind::KeplerSpherical);
        for _ in 0..300 {
            let s = random_state(HamiltonianKind::EulerOsc, &mut rng);
            let (rho, theta, pphi, ppsi) = (s[0], s[2], s[5], s[7]);
            let extra = (ppsi * ppsi - 2.0 * pphi * ppsi * theta.cos()) / (2.0 * rho * rho * theta.sin().powi(2));
            let d = ham_value(&reg, &s).unwrap() - ham_value(&kep, &s).unwrap();
            assert!((d - extra).abs() < 1e-11 * extra.abs().max(1.0));
        }
    }

    #[test]
    fn regularized_field_matches_closed_form_on_psi_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reg = spec(HamiltonianKind::EulerRegularized);
        let kep = spec(HamiltonianKind::KeplerSpherical);
        for _ in 0..200 {
            let mut s = random_state(HamiltonianKind::EulerOsc, &mut rng);
            let general = s.clone();
            s[7] = 0.0;
            let a = ham_field(&reg, &s.clone().into()).unwrap().coords;
            let b = ham_field(&kep, &s.into()).unwrap().coords;
            for k in [0, 2, 4, 6] {
                assert!((a[k] - b[k]).abs() < 1e-12 * b[k].abs().max(1.0));
            }
            // extra terms for Psi != 0, with the sign of the theta term such
            // that it is minus the theta-derivative of the decomposition term
            let (rho, th, pphi, ppsi) = (general[0], general[2], general[5], general[7]);
            let (st, ct) = th.sin_cos();
            let a = ham_field(&reg, &general.clone().into()).unwrap().coords;
            let b = ham_field(&kep, &general.into()).unwrap().coords;
            let dp = ppsi * (ppsi - 2.0 * pphi * ct) / (rho.powi(3) * st * st);
            let dtheta = ppsi * (ppsi * ct - pphi * (1.0 + ct * ct)) / (rho * rho * st.powi(3));
            assert!((a[4] - b[4] - dp).abs() < 1e-10 * dp.abs().max(1.0));
            assert!((a[6] - b[6] - dtheta).abs() < 1e-10 * dtheta.abs().max(1.0));
        }
    }

    #[test]
    fn aux_kepler_reduces_to_scaled_oscillator() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 0.6;
        let sp = HamiltonianSpec::new(HamiltonianKind::AuxKepler2)
            .with_h(h)
            .with_grav_param(1.4);
        for _ in 0..200 {
            let s = random_state(HamiltonianKind::AuxKepler2, &mut rng);
            let r = norm(&s[..2]);
            let reduced = r / h * (0.5 * norm_sqr(&s[2..]) + 2.0 * h * h);
            assert!((ham_value(&sp, &s).unwrap() - reduced).abs() < 1e-12 * reduced.max(1.0));
            let osc = lc_oscillator_energy([s[0], s[1]], [s[2], s[3]], h).unwrap();
            assert!((osc - reduced).abs() < 1e-12 * reduced.max(1.0));
        }
    }

    #[test]
    fn time_factors() {
        let osc = HamiltonianSpec::osc4(1.0);
        let s = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(TimeFactor::FourRho.rate(&osc, &s).unwrap(), 8.0);
        let e = HamiltonianSpec::new(HamiltonianKind::EulerSeparable);
        assert_eq!(
            TimeFactor::RhoOver4
                .rate(&e, &[2.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
                .unwrap(),
            0.5
        );
        let aux = HamiltonianSpec::new(HamiltonianKind::AuxKepler2).with_h(2.0);
        assert_eq!(TimeFactor::AbsXOverH.rate(&aux, &[3.0, 4.0, 0.0, 0.0]).unwrap(), 2.5);
        assert!(TimeFactor::AbsXOverH.rate(&osc, &s).is_err());
    }

    #[test]
    fn kinds_round_trip_names() {
        for k in HamiltonianKind::ALL {
            assert_eq!(k.name().parse::<HamiltonianKind>().unwrap(), k);
        }
        let spec: HamiltonianSpec = toml::from_str("kind = \"kepler3\"\ngrav_param = 2.0").unwrap();
        assert_eq!(spec, HamiltonianSpec::kepler3(2.0));
    }
}
