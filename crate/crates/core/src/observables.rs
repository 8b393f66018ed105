//! Quadratic phase-space functions on `T*H`, the centralizer `M`, and a
//! Poisson-bracket engine with least-squares closure fitting.
//!
//! Two conventions are provided for the `rho`/`sigma` triples:
//!
//! * [`Convention::Printed`] evaluates the sign tables exactly as they are
//!   usually quoted. With these signs `rho1` and `rho2` Poisson-commute, so
//!   the triple does not close onto an `so(3)` algebra.
//! * [`Convention::Corrected`] uses the momentum maps of quaternion
//!   multiplication: `rho_a = -<p, q a>` (right action) and
//!   `sigma_a = -<p, a q>` (left action). `rho3` and `sigma3` still equal
//!   the bilinear `Xi1` and twin-bilinear `Xi0`.
//!
//! `tau1..3`, `Xi0`, `Xi1` and `M` do not depend on the convention.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Result};
use crate::quat::{Axis, Quat};

/// Cotangent point `(q, p)` of `T*H`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint8 {
    pub q: Quat,
    pub p: Quat,
}

impl PhasePoint8 {
    pub const fn new(q: Quat, p: Quat) -> Self {
        PhasePoint8 { q, p }
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        PhasePoint8 {
            q: Quat::new(a[0], a[1], a[2], a[3]),
            p: Quat::new(a[4], a[5], a[6], a[7]),
        }
    }

    pub fn from_slice(a: &[f64]) -> Self {
        let mut buf = [0.0; 8];
        buf.copy_from_slice(&a[..8]);
        Self::from_array(buf)
    }

    pub fn to_array(self) -> [f64; 8] {
        let (q, p) = (self.q, self.p);
        [q.w, q.x, q.y, q.z, p.w, p.x, p.y, p.z]
    }

    pub fn is_finite(self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    pub fn max_abs_diff(self, other: PhasePoint8) -> f64 {
        self.q.max_abs_diff(other.q).max(self.p.max_abs_diff(other.p))
    }

    /// Largest absolute coordinate, used for scale-relative tolerances.
    pub fn scale(self) -> f64 {
        self.to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Printed,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ObservableId {
    Tau1,
    Tau2,
    Tau3,
    Rho1,
    Rho2,
    Rho3,
    Sigma1,
    Sigma2,
    Sigma3,
    Xi0,
    Xi1,
    CentralizerM,
}

impl ObservableId {
    /// The ten observables spanning `tau`, `rho`, `sigma` and `M`.
    pub const BASIS: [ObservableId; 10] = [
        ObservableId::Tau1,
        ObservableId::Tau2,
        ObservableId::Tau3,
        ObservableId::Rho1,
        ObservableId::Rho2,
        ObservableId::Rho3,
        ObservableId::Sigma1,
        ObservableId::Sigma2,
        ObservableId::Sigma3,
        ObservableId::CentralizerM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObservableId::Tau1 => "tau1",
            ObservableId::Tau2 => "tau2",
            ObservableId::Tau3 => "tau3",
            ObservableId::Rho1 => "rho1",
            ObservableId::Rho2 => "rho2",
            ObservableId::Rho3 => "rho3",
            ObservableId::Sigma1 => "sigma1",
            ObservableId::Sigma2 => "sigma2",
            ObservableId::Sigma3 => "sigma3",
            ObservableId::Xi0 => "xi0",
            ObservableId::Xi1 => "xi1",
            ObservableId::CentralizerM => "M",
        }
    }

    pub fn rho(a: Axis) -> Self {
        [ObservableId::Rho1, ObservableId::Rho2, ObservableId::Rho3][a.index()]
    }

    pub fn sigma(a: Axis) -> Self {
        [ObservableId::Sigma1, ObservableId::Sigma2, ObservableId::Sigma3][a.index()]
    }
}

/// `(coefficient, p index, q index)` terms of a bilinear form `sum c p_i q_j`.
type Bilinear = [(f64, usize, usize); 4];

const PRINTED_RHO1: Bilinear = [(1.0, 1, 0), (-1.0, 0, 1), (1.0, 3, 2), (-1.0, 2, 3)];
const PRINTED_RHO2: Bilinear = [(1.0, 2, 0), (-1.0, 0, 2), (1.0, 3, 1), (-1.0, 1, 3)];
const PRINTED_SIGMA1: Bilinear = [(1.0, 0, 1), (-1.0, 1, 0), (1.0, 2, 3), (-1.0, 3, 2)];
const PRINTED_SIGMA2: Bilinear = [(1.0, 0, 2), (-1.0, 2, 0), (1.0, 3, 1), (-1.0, 1, 3)];
/// `Xi1 = p1 q4 - p4 q1 + p3 q2 - p2 q3`
const XI1: Bilinear = [(1.0, 0, 3), (-1.0, 3, 0), (1.0, 2, 1), (-1.0, 1, 2)];
/// `Xi0 = p1 q4 - p4 q1 + p2 q3 - p3 q2`
const XI0: Bilinear = [(1.0, 0, 3), (-1.0, 3, 0), (1.0, 1, 2), (-1.0, 2, 1)];

fn bilinear_value(form: &Bilinear, z: &PhasePoint8) -> f64 {
    let q = z.q.to_array();
    let p = z.p.to_array();
    form.iter().map(|&(c, i, j)| c * p[i] * q[j]).sum()
}

fn bilinear_gradient(form: &Bilinear, z: &PhasePoint8) -> [f64; 8] {
    let q = z.q.to_array();
    let p = z.p.to_array();
    let mut g = [0.0; 8];
    for &(c, i, j) in form {
        g[j] += c * p[i];
        g[4 + i] += c * q[j];
    }
    g
}

fn split(dq: Quat, dp: Quat) -> [f64; 8] {
    PhasePoint8::new(dq, dp).to_array()
}

/// Twin-bilinear function `Xi0`.
pub fn xi0(z: &PhasePoint8) -> f64 {
    bilinear_value(&XI0, z)
}

/// Bilinear function `Xi1`.
pub fn xi1(z: &PhasePoint8) -> f64 {
    bilinear_value(&XI1, z)
}

/// Centralizer `M = 1/2 sqrt(|q|^2 |p|^2 - <q,p>^2)`.
pub fn centralizer(z: &PhasePoint8) -> f64 {
    0.5 * centralizer_radicand(z).sqrt()
}

fn centralizer_radicand(z: &PhasePoint8) -> f64 {
    let qq = z.q.norm_sqr();
    let pp = z.p.norm_sqr();
    let qp = z.q.dot(z.p);
    // Cauchy-Schwarz makes this non-negative up to rounding
    (qq * pp - qp * qp).max(0.0)
}

/// Evaluates an observable under the printed convention.
pub fn eval(id: ObservableId, z: &PhasePoint8) -> f64 {
    eval_with(id, Convention::Printed, z)
}

pub fn eval_with(id: ObservableId, conv: Convention, z: &PhasePoint8) -> f64 {
    use ObservableId::*;
    let (q, p) = (z.q, z.p);
    match (id, conv) {
        (Tau1, _) => q.dot(p),
        (Tau2, _) => 0.5 * (q.norm_sqr() - p.norm_sqr()),
        (Tau3, _) => 0.5 * (q.norm_sqr() + p.norm_sqr()),
        (Xi0, _) | (Sigma3, Convention::Printed) => xi0(z),
        (Xi1, _) | (Rho3, Convention::Printed) => xi1(z),
        (CentralizerM, _) => centralizer(z),
        (Rho1, Convention::Printed) => bilinear_value(&PRINTED_RHO1, z),
        (Rho2, Convention::Printed) => bilinear_value(&PRINTED_RHO2, z),
        (Sigma1, Convention::Printed) => bilinear_value(&PRINTED_SIGMA1, z),
        (Sigma2, Convention::Printed) => bilinear_value(&PRINTED_SIGMA2, z),
        (Rho1, Convention::Corrected) => -p.dot(q * Quat::I),
        (Rho2, Convention::Corrected) => -p.dot(q * Quat::J),
        (Rho3, Convention::Corrected) => -p.dot(q * Quat::K),
        (Sigma1, Convention::Corrected) => -p.dot(Quat::I * q),
        (Sigma2, Convention::Corrected) => -p.dot(Quat::J * q),
        (Sigma3, Convention::Corrected) => -p.dot(Quat::K * q),
    }
}

/// Analytic gradient `(d/dq, d/dp)` packed as eight components.
///
/// The centralizer is not differentiable where `M = 0`; its gradient is
/// reported as zero there.
pub fn gradient(id: ObservableId, conv: Convention, z: &PhasePoint8) -> [f64; 8] {
    use ObservableId::*;
    let (q, p) = (z.q, z.p);
    match (id, conv) {
        (Tau1, _) => split(p, q),
        (Tau2, _) => split(q, -p),
        (Tau3, _) => split(q, p),
        (Xi0, _) | (Sigma3, Convention::Printed) => bilinear_gradient(&XI0, z),
        (Xi1, _) | (Rho3, Convention::Printed) => bilinear_gradient(&XI1, z),
        (Rho1, Convention::Printed) => bilinear_gradient(&PRINTED_RHO1, z),
        (Rho2, Convention::Printed) => bilinear_gradient(&PRINTED_RHO2, z),
        (Sigma1, Convention::Printed) => bilinear_gradient(&PRINTED_SIGMA1, z),
        (Sigma2, Convention::Printed) => bilinear_gradient(&PRINTED_SIGMA2, z),
        // -<p, q a> = -<p a*, q>, and a* = -a for a unit imaginary
        (Rho1 | Rho2 | Rho3, Convention::Corrected) => {
            let a = corrected_axis(id).unit();
            split(p * a, -(q * a))
        }
        (Sigma1 | Sigma2 | Sigma3, Convention::Corrected) => {
            let a = corrected_axis(id).unit();
            split(a * p, -(a * q))
        }
        (CentralizerM, _) => {
            let d = centralizer_radicand(z);
            if d <= 0.0 {
                return [0.0; 8];
            }
            let qq = q.norm_sqr();
            let pp = p.norm_sqr();
            let qp = q.dot(p);
            let k = 1.0 / (4.0 * d.sqrt());
            let dq = (q.scale(pp) - p.scale(qp)).scale(2.0 * k);
            let dp = (p.scale(qq) - q.scale(qp)).scale(2.0 * k);
            split(dq, dp)
        }
    }
}

fn corrected_axis(id: ObservableId) -> Axis {
    use ObservableId::*;
    match id {
        Rho1 | Sigma1 => Axis::I,
        Rho2 | Sigma2 => Axis::J,
        _ => Axis::K,
    }
}

/// A scalar field on `T*H`: either a built-in observable or an arbitrary
/// function differentiated numerically.
pub enum Field<'a> {
    Builtin(ObservableId, Convention),
    Custom(&'a dyn Fn(&PhasePoint8) -> f64),
}

impl Field<'_> {
    pub fn value(&self, z: &PhasePoint8) -> f64 {
        match self {
            Field::Builtin(id, conv) => eval_with(*id, *conv, z),
            Field::Custom(f) => f(z),
        }
    }

    pub fn gradient(&self, z: &PhasePoint8) -> [f64; 8] {
        match self {
            Field::Builtin(id, conv) => gradient(*id, *conv, z),
            Field::Custom(f) => central_gradient(*f, z),
        }
    }
}

/// Central-difference gradient with step `eps^(1/3) max(1, |z_i|)`.
pub fn central_gradient(f: &dyn Fn(&PhasePoint8) -> f64, z: &PhasePoint8) -> [f64; 8] {
    let x = z.to_array();
    let base = f64::EPSILON.cbrt();
    let mut g = [0.0; 8];
    for i in 0..8 {
        let h = base * x[i].abs().max(1.0);
        let mut plus = x;
        let mut minus = x;
        plus[i] += h;
        minus[i] -= h;
        // use the representable step
        let step = plus[i] - minus[i];
        g[i] = (f(&PhasePoint8::from_array(plus)) - f(&PhasePoint8::from_array(minus))) / step;
    }
    g
}

/// Canonical bracket of two gradients: `sum df/dq dg/dp - df/dp dg/dq`.
pub fn bracket_of_gradients(gf: &[f64; 8], gg: &[f64; 8]) -> f64 {
    (0..4).map(|i| gf[i] * gg[4 + i] - gf[4 + i] * gg[i]).sum()
}

pub fn poisson_bracket(f: &Field, g: &Field, z: &PhasePoint8) -> Result<f64> {
    ensure_finite("phase point", &z.to_array())?;
    Ok(bracket_of_gradients(&f.gradient(z), &g.gradient(z)))
}

/// Bracket of two built-in observables under one convention.
pub fn bracket(a: ObservableId, b: ObservableId, conv: Convention, z: &PhasePoint8) -> f64 {
    bracket_of_gradients(&gradient(a, conv, z), &gradient(b, conv, z))
}

/// Number of auxiliary points used by the closure fits.
pub const CLOSURE_POINTS: usize = 24;

/// Names of the fitting basis: the ten observables plus the constant `1`.
pub fn basis_names() -> Vec<String> {
    ObservableId::BASIS
        .iter()
        .map(|id| id.name().to_string())
        .chain(std::iter::once("one".to_string()))
        .collect()
}

fn basis_values(conv: Convention, z: &PhasePoint8) -> [f64; 11] {
    let mut v = [1.0; 11];
    for (slot, id) in v.iter_mut().zip(ObservableId::BASIS) {
        *slot = eval_with(id, conv, z);
    }
    v
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosureFit {
    pub left: String,
    pub right: String,
    /// One coefficient per basis element, in [`basis_names`] order.
    pub coefficients: Vec<f64>,
    /// Max fit misfit over the auxiliary points, divided by `max(1, |bracket|)`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraClosure {
    pub algebra: String,
    /// `(left, right, target, fitted coefficient on target)`.
    pub structure_constants: Vec<(String, String, String, f64)>,
    /// Largest fitted coefficient outside the algebra's own span.
    pub off_span: f64,
    pub residual: f64,
    /// All structure constants equal `+-2` and nothing leaks out of the span.
    pub closes: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketTable {
    pub convention: Convention,
    pub basis: Vec<String>,
    pub point: [f64; 8],
    pub matrix: Vec<Vec<f64>>,
    pub fits: Vec<ClosureFit>,
    pub algebras: Vec<AlgebraClosure>,
}

impl BracketTable {
    pub fn entry(&self, a: ObservableId, b: ObservableId) -> f64 {
        let ia = index_of(a);
        let ib = index_of(b);
        self.matrix[ia][ib]
    }

    pub fn fit(&self, a: ObservableId, b: ObservableId) -> &ClosureFit {
        self.fits
            .iter()
            .find(|f| f.left == a.name() && f.right == b.name())
            .expect("every ordered basis pair is fitted")
    }

    /// Largest `|entries[i][j] + entries[j][i]|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.matrix.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[i][j] + self.matrix[j][i]).abs());
            }
        }
        worst
    }

    pub fn algebra(&self, name: &str) -> Option<&AlgebraClosure> {
        self.algebras.iter().find(|a| a.algebra == name)
    }
}

fn index_of(id: ObservableId) -> usize {
    ObservableId::BASIS
        .iter()
        .position(|b| *b == id)
        .unwrap_or_else(|| panic!("{} is not in the bracket basis", id.name()))
}

/// Uniform sample of `[-2, 2]^8` points for closure fitting.
pub fn auxiliary_points(seed: u64, count: usize) -> Vec<PhasePoint8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut a = [0.0; 8];
            for v in &mut a {
                *v = rng.random_range(-2.0..2.0);
            }
            PhasePoint8::from_array(a)
        })
        .collect()
}

/// Evaluates all pairwise brackets among the basis at `z` and fits each
/// bracket, as a function, onto the basis by least squares over
/// [`CLOSURE_POINTS`] auxiliary points drawn from `seed`.
pub fn bracket_table(z: &PhasePoint8, conv: Convention, seed: u64) -> Result<BracketTable> {
    ensure_finite("phase point", &z.to_array())?;
    let n = ObservableId::BASIS.len() + 1;
    let mut matrix = vec![vec![0.0; n]; n];
    for (i, a) in ObservableId::BASIS.iter().enumerate() {
        for (j, b) in ObservableId::BASIS.iter().enumerate() {
            matrix[i][j] = bracket(*a, *b, conv, z);
        }
    }

    let aux = auxiliary_points(seed, CLOSURE_POINTS);
    let design = DMatrix::from_fn(aux.len(), n, |r, c| basis_values(conv, &aux[r])[c]);
    let svd = design.clone().svd(true, true);

    let mut fits = Vec::with_capacity(n * n);
    for a in ObservableId::BASIS {
        for b in ObservableId::BASIS {
            let rhs = DVector::from_iterator(aux.len(), aux.iter().map(|w| bracket(a, b, conv, w)));
            let coef = svd.solve(&rhs, 1e-12).expect("SVD was computed with both factors");
            let misfit = (&design * &coef - &rhs).amax();
            let scale = rhs.amax().max(1.0);
            fits.push(ClosureFit {
                left: a.name().into(),
                right: b.name().into(),
                coefficients: coef.iter().copied().collect(),
                residual: misfit / scale,
            });
        }
    }

    let mut table = BracketTable {
        convention: conv,
        basis: basis_names(),
        point: z.to_array(),
        matrix,
        fits,
        algebras: Vec::new(),
    };
    table.algebras = ["tau", "rho", "sigma"]
        .iter()
        .map(|name| algebra_closure(&table, name))
        .collect();
    Ok(table)
}

/// Tolerance on fitted coefficients when deciding closure.
const COEFFICIENT_TOL: f64 = 1e-8;
const CLOSURE_RESIDUAL_TOL: f64 = 1e-10;

fn algebra_closure(table: &BracketTable, name: &str) -> AlgebraClosure {
    use ObservableId::*;
    let members = match name {
        "tau" => [Tau1, Tau2, Tau3],
        "rho" => [Rho1, Rho2, Rho3],
        _ => [Sigma1, Sigma2, Sigma3],
    };
    let mut constants = Vec::new();
    let mut off_span = 0.0f64;
    let mut residual = 0.0f64;
    for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let fit = table.fit(members[a], members[b]);
        residual = residual.max(fit.residual);
        let target = index_of(members[c]);
        for (k, coef) in fit.coefficients.iter().enumerate() {
            if k != target {
                off_span = off_span.max(coef.abs());
            }
        }
        constants.push((
            members[a].name().to_string(),
            members[b].name().to_string(),
            members[c].name().to_string(),
            fit.coefficients[target],
        ));
    }
    let closes = residual < CLOSURE_RESIDUAL_TOL
        && off_span < COEFFICIENT_TOL
        && constants
            .iter()
            .all(|(_, _, _, k)| (k.abs() - 2.0).abs() < COEFFICIENT_TOL);
    AlgebraClosure {
        algebra: name.to_string(),
        structure_constants: constants,
        off_span,
        residual,
        closes,
    }
}
