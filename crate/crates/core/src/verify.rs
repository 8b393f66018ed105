//! Seeded property suites with machine-readable reports.
//!
//! Every suite returns a [`SuiteReport`] listing each property with its
//! largest observed error and tolerance. Properties marked
//! [`Expect::Report`] are informational and never fail a suite.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::charts::{
    andoyer_symplectic_defect, andoyer_to_phase_with, calibrate_andoyer, euler_to_phase, phase_to_euler, project_euler,
    spherical_to_cartesian, AndoyerChart, AndoyerScaling, EulerChart,
};
use crate::dynamics::{ham_gradient, ham_value, symplectic_field, HamiltonianKind, HamiltonianSpec, TimeFactor};
use crate::error::{Error, Result};
use crate::flow::{
    integrate, integrate_at, integrate_with_time_map, kepler_period, oscillator_parameters,
    propagate_regularized_kepler, IntegratorConfig, KeplerSpan, Output, RegularizedKepler, COLLAPSE_FRACTION,
};
use crate::maps::{
    chi_action, ks_jacobian, ks_map, ks_map_permuted, ks_point, ks_preimage, lc_map, ChiAction, DefiningVector,
    LcVariant,
};
use crate::numdiff;
use crate::observables::{
    bracket, bracket_table, centralizer, eval_with, xi0, xi1, Convention, ObservableId, PhasePoint8,
};
use crate::sampling::Sampler;

pub const REPORT_VERSION: u32 = 1;

/// Seed of the Andoyer calibration behind the certificate.
pub const CALIBRATION_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    /// Passes when `max_error < tol`.
    Below,
    /// Passes when `max_error > tol`; used to show that a property breaks.
    Above,
    /// Recorded only.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub name: String,
    pub max_error: f64,
    pub tol: f64,
    pub pass: bool,
    pub expect: Expect,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl Property {
    fn new(name: impl Into<String>, max_error: f64, tol: f64, expect: Expect) -> Self {
        let pass = match expect {
            Expect::Below => max_error < tol,
            Expect::Above => max_error > tol,
            Expect::Report => true,
        };
        Property {
            name: name.into(),
            max_error,
            tol,
            pass,
            expect,
            note: None,
        }
    }

    pub fn below(name: impl Into<String>, max_error: f64, tol: f64) -> Self {
        Property::new(name, max_error, tol, Expect::Below)
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Property::new(name, value, threshold, Expect::Above)
    }

    pub fn report(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Property::new(name, value, tol, Expect::Report)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Would this value meet its tolerance? Meaningful for report entries too.
    pub fn within_tol(&self) -> bool {
        self.max_error < self.tol
    }

    pub fn summary_line(&self, suite: &str) -> String {
        let status = match (self.expect, self.pass) {
            (Expect::Report, _) => "REPORT",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        let op = match self.expect {
            Expect::Above => ">",
            _ => "<",
        };
        format!(
            "{status:6} {suite}/{}  max_error={:.3e} {op} tol={:.1e}",
            self.name, self.max_error, self.tol
        )
    }
}

/// Conventions every suite in one run agrees on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub observable_convention: Convention,
    pub defining_vector: String,
    pub andoyer: Option<AndoyerScaling>,
    pub andoyer_canonical: bool,
    pub andoyer_calibration_seed: u64,
    /// Sign relating the fiber actions to the flows of the bilinears.
    pub action_orientation: String,
}

impl Certificate {
    /// The calibration is run once per process.
    pub fn get() -> &'static Certificate {
        static CERT: OnceLock<Certificate> = OnceLock::new();
        CERT.get_or_init(|| {
            let cal = calibrate_andoyer(CALIBRATION_SEED, 40, 1e-10);
            Certificate {
                observable_convention: Convention::Corrected,
                defining_vector: DefiningVector::PLUS_K.to_string(),
                andoyer: cal.chosen,
                andoyer_canonical: cal.canonical,
                andoyer_calibration_seed: CALIBRATION_SEED,
                action_orientation: "flow of Xi for time t equals chi(-t)".into(),
            }
        })
    }

    /// The calibrated construction, falling back to the built-in default if
    /// the sweep found no unique candidate.
    pub fn andoyer_scaling(&self) -> AndoyerScaling {
        self.andoyer.unwrap_or(AndoyerScaling::CALIBRATED)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub format_version: u32,
    pub suite: String,
    pub seed: u64,
    pub n: usize,
    pub properties: Vec<Property>,
    pub certificate: Certificate,
}

impl SuiteReport {
    fn new(suite: Suite, opts: &VerifyOptions, properties: Vec<Property>) -> Self {
        SuiteReport {
            format_version: REPORT_VERSION,
            suite: suite.name().into(),
            seed: opts.seed,
            n: opts.samples,
            properties,
            certificate: Certificate::get().clone(),
        }
    }

    /// All asserted properties pass.
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.pass)
    }

    pub fn property(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite-safe values")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Brackets,
    Diagram,
    Fibers,
    Reduction,
    Charts,
    Lc,
    Flow,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Brackets,
        Suite::Diagram,
        Suite::Fibers,
        Suite::Reduction,
        Suite::Charts,
        Suite::Lc,
        Suite::Flow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Brackets => "brackets",
            Suite::Diagram => "diagram",
            Suite::Fibers => "fibers",
            Suite::Reduction => "reduction",
            Suite::Charts => "charts",
            Suite::Lc => "lc",
            Suite::Flow => "flow",
        }
    }

    pub fn run(self, opts: &VerifyOptions) -> SuiteReport {
        match self {
            Suite::Brackets => suite_brackets(opts),
            Suite::Diagram => suite_diagram(opts),
            Suite::Fibers => suite_fibers(opts),
            Suite::Reduction => suite_reduction(opts),
            Suite::Charts => suite_charts(opts),
            Suite::Lc => suite_lc(opts),
            Suite::Flow => suite_flow(opts),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// Suites selected by name; `all` expands to every suite.
pub fn parse_suites(name: &str) -> Result<Vec<Suite>> {
    if name.trim() == "all" {
        Ok(Suite::ALL.to_vec())
    } else {
        Ok(vec![name.parse()?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub samples: usize,
    /// Restricts the bracket suite to one observable convention. The printed
    /// convention is always report-only.
    pub convention: Option<Convention>,
    pub integrator: IntegratorConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            samples: 1000,
            convention: None,
            integrator: IntegratorConfig::dopri5(1e-12, 1e-14),
        }
    }
}

impl VerifyOptions {
    pub fn new(seed: u64, samples: usize) -> Self {
        VerifyOptions {
            seed,
            samples,
            ..Default::default()
        }
    }
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.abs().max(1.0)
}

fn quad_scale(z: &PhasePoint8) -> f64 {
    z.q.norm_sqr() + z.p.norm_sqr()
}

fn points(opts: &VerifyOptions) -> Vec<PhasePoint8> {
    let mut s = Sampler::new(opts.seed);
    (0..opts.samples.max(1)).map(|_| s.phase_point()).collect()
}

fn id_by_name(name: &str) -> ObservableId {
    ObservableId::BASIS
        .into_iter()
        .find(|id| id.name() == name)
        .expect("closure tables only name basis observables")
}

// ---------------------------------------------------------------- brackets

pub fn suite_brackets(opts: &VerifyOptions) -> SuiteReport {
    use ObservableId::*;
    let pts = points(opts);
    let mut props = Vec::new();
    let conv_tau = Convention::Corrected;
    let br = |a, b, c, z: &PhasePoint8| bracket(a, b, c, z);

    let mut tau_err = 0.0f64;
    for z in &pts {
        let v = |id| eval_with(id, conv_tau, z);
        let sc = quad_scale(z);
        tau_err = tau_err
            .max(rel(br(Tau1, Tau2, conv_tau, z) + 2.0 * v(Tau3), sc))
            .max(rel(br(Tau1, Tau3, conv_tau, z) + 2.0 * v(Tau2), sc))
            .max(rel(br(Tau2, Tau3, conv_tau, z) - 2.0 * v(Tau1), sc));
    }
    props.push(Property::below("tau_closure", tau_err, 1e-10));

    let conventions = match opts.convention {
        Some(c) => vec![c],
        None => vec![Convention::Corrected, Convention::Printed],
    };
    let taus = [Tau1, Tau2, Tau3];
    let rhos = [Rho1, Rho2, Rho3];
    let sigmas = [Sigma1, Sigma2, Sigma3];
    for conv in conventions {
        let tag = match conv {
            Convention::Corrected => "corrected",
            Convention::Printed => "printed",
        };
        let make = |name: &str, err: f64, tol: f64| {
            if conv == Convention::Corrected {
                Property::below(format!("{name}_{tag}"), err, tol)
            } else {
                Property::report(format!("{name}_{tag}"), err, tol)
            }
        };
        let commute = |xs: &[ObservableId], ys: &[ObservableId]| {
            let mut e = 0.0f64;
            for z in &pts {
                for &a in xs {
                    for &b in ys {
                        e = e.max(rel(br(a, b, conv, z), quad_scale(z)));
                    }
                }
            }
            e
        };
        props.push(make("tau_rho_commute", commute(&taus, &rhos), 1e-10));
        props.push(make("tau_sigma_commute", commute(&taus, &sigmas), 1e-10));
        props.push(make("rho_sigma_commute", commute(&rhos, &sigmas), 1e-10));

        let table = bracket_table(&pts[0], conv, opts.seed).expect("sampled points are finite");
        for name in ["rho", "sigma"] {
            let alg = table.algebra(name).expect("table covers rho and sigma");
            let mut e = alg.residual.max(alg.off_span);
            for (a, b, c, k) in &alg.structure_constants {
                e = e.max((k.abs() - 2.0).abs());
                let (a, b, c) = (id_by_name(a), id_by_name(b), id_by_name(c));
                for z in &pts {
                    e = e.max(rel(br(a, b, conv, z) - k * eval_with(c, conv, z), quad_scale(z)));
                }
            }
            props.push(make(&format!("{name}_closure"), e, 1e-10));
        }
        // whether the first two generators of each triple commute
        for (name, xs) in [("rho12_bracket", &rhos), ("sigma12_bracket", &sigmas)] {
            props.push(Property::report(
                format!("{name}_{tag}"),
                commute(&xs[..1], &xs[1..2]),
                1e-10,
            ));
        }

        let mut cas = 0.0f64;
        for z in &pts {
            let m4 = 4.0 * centralizer(z).powi(2);
            let r: f64 = rhos.iter().map(|&id| eval_with(id, conv, z).powi(2)).sum();
            let s: f64 = sigmas.iter().map(|&id| eval_with(id, conv, z).powi(2)).sum();
            cas = cas.max(rel(r - m4, m4)).max(rel(s - m4, m4));
        }
        props.push(make("casimir", cas, 1e-11));

        let mut cent = 0.0f64;
        for z in &pts {
            if centralizer(z) < 1e-6 {
                continue;
            }
            for id in ObservableId::BASIS {
                cent = cent.max(rel(br(CentralizerM, id, conv, z), quad_scale(z)));
            }
        }
        props.push(Property::below(format!("centralizer_commutes_{tag}"), cent, 1e-10));
    }
    SuiteReport::new(Suite::Brackets, opts, props)
}

// ---------------------------------------------------------------- diagram

pub fn suite_diagram(opts: &VerifyOptions) -> SuiteReport {
    let mut s = Sampler::new(opts.seed);
    let dv = DefiningVector::PLUS_K;
    let mut diagram = 0.0f64;
    let mut defect_on = 0.0f64;
    let mut defect_formula = 0.0f64;
    let mut off_constraint = 0.0f64;
    for _ in 0..opts.samples.max(1) {
        let chart = s.euler_chart();
        let on = EulerChart { p_psi: 0.0, ..chart };
        let z = euler_to_phase(&on).expect("sampled charts are admissible");
        let img = ks_map(&z, dv).expect("sampled q is nonzero");
        let other = phase_to_euler(&z)
            .and_then(|c| spherical_to_cartesian(&project_euler(&c)))
            .expect("sampled charts avoid the exclusion manifolds");
        let scale = img.phase().to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        diagram = diagram.max(rel(img.phase().max_abs_diff(&other), scale));
        defect_on = defect_on.max(img.real_defect.abs());

        let z = euler_to_phase(&chart).expect("sampled charts are admissible");
        let img = ks_map(&z, dv).expect("sampled q is nonzero");
        defect_formula = defect_formula.max(rel(img.real_defect - chart.p_psi / chart.rho, chart.p_psi / chart.rho));
        let other = spherical_to_cartesian(&project_euler(&chart)).expect("admissible");
        off_constraint = off_constraint.max(img.phase().max_abs_diff(&other));
    }

    // points of both exclusion manifolds must be refused by the chart
    let mut accepted = 0usize;
    for k in 0..opts.samples.max(1) {
        let mut a = s.phase_point().to_array();
        let pair = if k % 2 == 0 { [0, 3] } else { [1, 2] };
        for i in pair {
            a[i] = 0.0;
        }
        if phase_to_euler(&PhasePoint8::from_array(a)).is_ok() {
            accepted += 1;
        }
    }

    let props = vec![
        Property::below("diagram_commutes", diagram, 1e-10),
        Property::below("real_defect_on_constraint", defect_on, 1e-12),
        Property::below("real_defect_equals_psi_over_rho", defect_formula, 1e-12),
        Property::report("diagram_gap_off_constraint", off_constraint, 1e-10)
            .with_note("the spherical projection ignores Psi, so the diagram needs Xi0 = 0"),
        Property::below("exclusion_points_accepted", accepted as f64, 0.5),
    ];
    SuiteReport::new(Suite::Diagram, opts, props)
}

// ---------------------------------------------------------------- fibers

/// Integrates the flow of a bilinear for time `t` from `z`.
fn bilinear_flow(kind: HamiltonianKind, z: &PhasePoint8, t: f64, cfg: &IntegratorConfig) -> Result<PhasePoint8> {
    let spec = HamiltonianSpec::new(kind);
    let traj = integrate_at(&spec, &z.to_array(), (0.0, t), cfg, &Output::At(vec![])).map_err(|e| e.error)?;
    Ok(PhasePoint8::from_slice(&traj.last().state))
}

pub fn suite_fibers(opts: &VerifyOptions) -> SuiteReport {
    let mut s = Sampler::new(opts.seed);
    let n = opts.samples.max(1);
    let mut hopf = 0.0f64;
    let mut collapse0 = 0.0f64;
    let mut collapse1 = 0.0f64;
    let mut xi_const = 0.0f64;
    for _ in 0..n {
        let z = s.phase_point();
        let alpha = s.uniform(0.0, std::f64::consts::TAU);
        let r2 = z.q.norm_sqr();
        for dv in DefiningVector::all() {
            let x = ks_point(z.q, dv).expect("sampled q is nonzero");
            hopf = hopf.max(rel(x.norm() - r2, r2));
        }
        let a = ks_map(&z, DefiningVector::PLUS_K).expect("sampled q is nonzero");
        let w = chi_action(ChiAction::Zero, alpha, &z);
        let b = ks_map(&w, DefiningVector::PLUS_K).expect("sampled q is nonzero");
        let scale = a.phase().to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        collapse0 = collapse0.max(rel(a.phase().max_abs_diff(&b.phase()), scale));

        let a = ks_map_permuted(&z).expect("sampled q is nonzero");
        let b = ks_map_permuted(&chi_action(ChiAction::One, alpha, &z)).expect("sampled q is nonzero");
        let scale = a.phase().to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        collapse1 = collapse1.max(rel(a.phase().max_abs_diff(&b.phase()), scale));

        xi_const = xi_const.max(rel(xi0(&w) - xi0(&z), quad_scale(&z)));
    }

    let mut flow0 = 0.0f64;
    let mut flow1 = 0.0f64;
    let flow_points: Vec<PhasePoint8> = (0..n.min(8)).map(|_| s.phase_point()).collect();
    for z in &flow_points {
        for alpha in [0.1, 1.0, std::f64::consts::PI] {
            for (kind, which, slot) in [
                (HamiltonianKind::TwinBilinear, ChiAction::Zero, &mut flow0),
                (HamiltonianKind::Bilinear, ChiAction::One, &mut flow1),
            ] {
                let err = match bilinear_flow(kind, z, alpha, &opts.integrator) {
                    Ok(f) => rel(f.max_abs_diff(chi_action(which, -alpha, z)), z.scale()),
                    Err(_) => f64::INFINITY,
                };
                *slot = slot.max(err);
            }
        }
    }

    let props = vec![
        Property::below("hopf_norm", hopf, 1e-10),
        Property::below("ks_constant_on_chi0_orbits", collapse0, 1e-10),
        Property::below("permuted_ks_constant_on_chi1_orbits", collapse1, 1e-10),
        Property::below("xi0_constant_on_chi0_orbits", xi_const, 1e-12),
        Property::below("chi0_is_xi0_flow", flow0, 1e-9)
            .with_note("flow of Xi0 for time a compared with chi0(-a), a in {0.1, 1, pi}"),
        Property::below("chi1_is_xi1_flow", flow1, 1e-9),
    ];
    SuiteReport::new(Suite::Fibers, opts, props)
}

// ---------------------------------------------------------------- reduction

/// Brackets `{f_a, f_b}` of the six KS image coordinates, from the Jacobian.
pub fn ks_brackets(z: &PhasePoint8) -> Result<[[f64; 6]; 6]> {
    let j = ks_jacobian(z, DefiningVector::PLUS_K)?;
    let mut b = [[0.0; 6]; 6];
    for a in 0..6 {
        for c in 0..6 {
            b[a][c] = (0..4).map(|i| j[a][i] * j[c][4 + i] - j[a][4 + i] * j[c][i]).sum();
        }
    }
    Ok(b)
}

/// `(xx, xy, yy)` deviations from the canonical brackets.
fn canonical_defects(b: &[[f64; 6]; 6]) -> (f64, f64, f64) {
    let (mut xx, mut xy, mut yy) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..3 {
        for k in 0..3 {
            xx = xx.max(b[i][k].abs());
            yy = yy.max(b[3 + i][3 + k].abs());
            let delta = if i == k { 1.0 } else { 0.0 };
            xy = xy.max((b[i][3 + k] - delta).abs());
        }
    }
    (xx, xy, yy)
}

pub fn suite_reduction(opts: &VerifyOptions) -> SuiteReport {
    let mut s = Sampler::new(opts.seed);
    let (mut xx, mut xy, mut yy) = (0.0f64, 0.0f64, 0.0f64);
    let (mut off_points, mut violated) = (0usize, 0usize);
    for _ in 0..opts.samples.max(1) {
        let z = s.xi0_zero();
        let b = ks_brackets(&z).expect("sampled q is nonzero");
        let (a, c, d) = canonical_defects(&b);
        xx = xx.max(a);
        xy = xy.max(c);
        yy = yy.max(d);

        let w = s.phase_point();
        if xi0(&w).abs() > 0.1 {
            let b = ks_brackets(&w).expect("sampled q is nonzero");
            let (a, c, d) = canonical_defects(&b);
            off_points += 1;
            if a.max(c).max(d) > 1e-6 {
                violated += 1;
            }
        }
    }
    let props = vec![
        Property::below("x_x_brackets", xx, 1e-9),
        Property::below("x_y_brackets", xy, 1e-9),
        Property::below("y_y_brackets", yy, 1e-9),
        Property::above(
            "violation_off_constraint",
            violated as f64 / off_points.max(1) as f64,
            0.99,
        )
        .with_note(format!(
            "fraction of {off_points} points with |Xi0| > 0.1 whose bracket defect exceeds 1e-6"
        )),
    ];
    SuiteReport::new(Suite::Reduction, opts, props)
}

// ---------------------------------------------------------------- charts

fn euler_symplectic_defect(c: &EulerChart) -> f64 {
    let f = |a: &[f64]| -> Vec<f64> {
        euler_to_phase(&EulerChart::from_slice(a))
            .map(|z| z.to_array().to_vec())
            .unwrap_or_else(|_| vec![f64::NAN; 8])
    };
    let h = 1e-3;
    let a = c.to_array();
    let mut steps = [h; 8];
    steps[0] = h * c.rho;
    steps[2] = h * c.theta.sin();
    for k in 4..8 {
        steps[k] = h * a[k].abs().max(1.0);
    }
    numdiff::symplectic_defect(&numdiff::jacobian_with_steps(f, &a, &steps))
}

pub fn suite_charts(opts: &VerifyOptions) -> SuiteReport {
    let mut s = Sampler::new(opts.seed);
    let n = opts.samples.max(1);
    let cert = Certificate::get();
    let scaling = cert.andoyer_scaling();

    let mut euler_sym = 0.0f64;
    let mut round_trip = 0.0f64;
    let mut pullback = 0.0f64;
    let mut coulomb = 0.0f64;
    let mut coulomb_general = 0.0f64;
    let omega = 1.3;
    let h = 2.2;
    let osc = HamiltonianSpec::osc4(omega);
    let euler = HamiltonianSpec::new(HamiltonianKind::EulerOsc).with_omega(omega);
    let reg = HamiltonianSpec::new(HamiltonianKind::EulerRegularized)
        .with_omega(omega)
        .with_h(h);
    let kepler = HamiltonianSpec::kepler3(h / 4.0);
    for k in 0..n {
        let c = s.euler_chart();
        if k < 200 {
            euler_sym = euler_sym.max(euler_symplectic_defect(&c));
        }
        let z = euler_to_phase(&c).expect("sampled charts are admissible");
        let back = phase_to_euler(&z).and_then(|c| euler_to_phase(&c)).expect("admissible");
        round_trip = round_trip.max(rel(back.max_abs_diff(z), z.scale()));

        let a = ham_value(&osc, &z.to_array()).expect("admissible");
        let b = ham_value(&euler, &c.to_array()).expect("admissible");
        pullback = pullback.max(rel(a - b, a));

        // on Psi = 0 the regularized oscillator is spatial Kepler in spherical variables
        let on = EulerChart { p_psi: 0.0, ..c };
        let cart = spherical_to_cartesian(&project_euler(&on)).expect("admissible");
        let kv = ham_value(&kepler, &cart.to_array()).expect("admissible");
        let rv = ham_value(&reg, &on.to_array()).expect("admissible");
        coulomb = coulomb.max(rel(rv - kv, kv));

        let (st, ct) = c.theta.sin_cos();
        let extra = (c.p_psi * c.p_psi - 2.0 * c.p_phi * c.p_psi * ct) / (2.0 * c.rho * c.rho * st * st);
        let cart = spherical_to_cartesian(&project_euler(&c)).expect("admissible");
        let kv = ham_value(&kepler, &cart.to_array()).expect("admissible");
        let rv = ham_value(&reg, &c.to_array()).expect("admissible");
        coulomb_general = coulomb_general.max(rel(rv - kv - extra, rv));
    }

    let andoyer = HamiltonianSpec::new(HamiltonianKind::AndoyerRegularized).with_h(h);
    let mut planar = 0.0f64;
    let mut momenta = 0.0f64;
    let mut cent = 0.0f64;
    let mut charts = Vec::with_capacity(200);
    for k in 0..n {
        let c = s.andoyer_chart();
        if k < 200 {
            charts.push(c);
        }
        let z = andoyer_to_phase_with(&c, scaling).expect("sampled charts are admissible");
        let hw = ham_value(&osc, &z.to_array()).expect("admissible");
        let lhs = (hw - h) / (4.0 * c.rho);
        let rhs = ham_value(&andoyer, &c.to_array()).expect("admissible") + omega / 8.0;
        planar = planar.max(rel(lhs - rhs, rhs));
        momenta = momenta
            .max(rel(xi0(&z) - 2.0 * c.p_lambda, c.p_mu))
            .max(rel(xi1(&z) - 2.0 * c.p_nu, c.p_mu));
        cent = cent.max(rel(centralizer(&z) - c.p_mu, c.p_mu));
    }
    let andoyer_sym = andoyer_symplectic_defect(&charts, scaling);

    let props = vec![
        Property::below("euler_symplectic", euler_sym, 1e-9),
        Property::below("euler_round_trip", round_trip, 1e-10),
        Property::below("andoyer_symplectic", andoyer_sym, 1e-9),
        Property::below("andoyer_bilinears", momenta, 1e-10),
        Property::below("andoyer_centralizer", cent, 1e-10),
        Property::below("euler_pullback_identity", pullback, 1e-10),
        Property::below("planar_kepler_identity", planar, 1e-10)
            .with_note("(H - h) / (4 rho) against the polar Kepler Hamiltonian plus omega / 8"),
        Property::below("coulomb_decomposition", coulomb, 1e-11),
        Property::below("coulomb_decomposition_general_psi", coulomb_general, 1e-11),
    ];
    SuiteReport::new(Suite::Charts, opts, props)
}

// ---------------------------------------------------------------- lc

/// Planar bound orbit used by the Levi-Civita checks.
pub const LC_ORBIT: ([f64; 2], [f64; 2]) = ([1.0, 0.0], [0.0, 0.8]);

pub fn suite_lc(opts: &VerifyOptions) -> SuiteReport {
    let mut s = Sampler::new(opts.seed);
    let mut sym = 0.0f64;
    for k in 0..opts.samples.max(1).min(500) {
        let variant = LcVariant::ALL[k % 4];
        let x0 = loop {
            let a: Vec<f64> = (0..4).map(|_| s.uniform(-2.0, 2.0)).collect();
            if a[0].hypot(a[1]) >= 0.1 {
                break a;
            }
        };
        let f = |a: &[f64]| -> Vec<f64> {
            match lc_map([a[0], a[1]], [a[2], a[3]], variant) {
                Ok((x, y)) => vec![x[0], x[1], y[0], y[1]],
                Err(_) => vec![f64::NAN; 4],
            }
        };
        sym = sym.max(numdiff::symplectic_defect(&numdiff::jacobian(f, &x0, 2e-4)));
    }

    let mu = 1.0;
    let (x0, y0) = LC_ORBIT;
    let spec = HamiltonianSpec::kepler2(mu);
    let state = [x0[0], x0[1], y0[0], y0[1]];
    let energy = ham_value(&spec, &state).expect("orbit avoids the origin");
    let h = (-energy / 2.0).sqrt();
    let period = 2.0 * std::f64::consts::PI * (mu / (-2.0 * energy)).powf(1.5) / mu.sqrt();
    let out = Output::At((1..400).map(|k| period * k as f64 / 400.0).collect());
    let (spread, value) = match integrate_at(&spec, &state, (0.0, period), &opts.integrator, &out) {
        Ok(traj) => {
            let vals: Vec<f64> = traj
                .samples
                .iter()
                .map(|smp| {
                    let st = &smp.state;
                    crate::dynamics::lc_oscillator_energy([st[0], st[1]], [st[2], st[3]], h).unwrap_or(f64::NAN)
                })
                .collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (hi - lo, vals[0])
        }
        Err(_) => (f64::INFINITY, f64::NAN),
    };
    let props = vec![
        Property::below("lc_symplectic", sym, 1e-9),
        Property::below("lc_energy_constant", spread, 1e-9),
        Property::report("lc_energy_value", value, mu / h)
            .with_note(format!("level energy -2h^2 with h = {h:.12}; mu / h = {:.12}", mu / h)),
        Property::below("lc_energy_equals_mu_over_h", (value - mu / h).abs(), 1e-9),
    ];
    SuiteReport::new(Suite::Lc, opts, props)
}

// ---------------------------------------------------------------- flow

/// Apocenter state of the `a = 1`, `e = 0.9` orbit with `mu = 1`, inclined by 0.4.
pub fn eccentric_orbit() -> ([f64; 3], [f64; 3]) {
    let v = (0.1f64 / 1.9).sqrt();
    let (s, c) = 0.4f64.sin_cos();
    ([1.9, 0.0, 0.0], [0.0, v * c, v * s])
}

/// Near-rectilinear state with angular momentum `1e-3`.
pub const RECTILINEAR_ORBIT: ([f64; 3], [f64; 3]) = ([1.0, 0.0, 0.0], [0.0, 1e-3, 0.0]);

/// Outcome of the eccentric-orbit comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EccentricComparison {
    pub max_position_error: f64,
    pub max_energy_drift: f64,
    pub period_error: f64,
    pub closure_error: f64,
    pub gauge_difference: f64,
    pub max_xi0: f64,
}

/// Regularized against direct propagation of the `e = 0.9` orbit over one period.
pub fn eccentric_comparison(cfg: &IntegratorConfig) -> Result<EccentricComparison> {
    let (x0, y0) = eccentric_orbit();
    let settings = RegularizedKepler {
        samples_per_rev: 200,
        ..Default::default()
    };
    let reg = propagate_regularized_kepler(x0, y0, &settings, cfg).map_err(|e| e.error)?;
    let times: Vec<f64> = reg.samples.iter().map(|s| s.t).collect();
    let t_end = *times.last().expect("nonempty");
    let inner = times[1..times.len() - 1].to_vec();
    let start: Vec<f64> = x0.iter().chain(y0.iter()).copied().collect();
    let direct = integrate_at(
        &HamiltonianSpec::kepler3(1.0),
        &start,
        (0.0, t_end),
        cfg,
        &Output::At(inner),
    )
    .map_err(|e| e.error)?;
    if direct.samples.len() != reg.samples.len() {
        return Err(Error::Unsupported("sample grids differ".into()));
    }
    let mut pos = 0.0f64;
    for (a, b) in reg.samples.iter().zip(&direct.samples) {
        for k in 0..3 {
            pos = pos.max((a.state[k] - b.state[k]).abs());
        }
    }
    let period = kepler_period(x0, y0, 1.0);
    let last = &reg.last().state;
    let closure = (0..6).map(|k| (last[k] - start[k]).abs()).fold(0.0, f64::max);

    let shifted = RegularizedKepler {
        gauge_psi: 1.3,
        ..settings
    };
    let other = propagate_regularized_kepler(x0, y0, &shifted, cfg).map_err(|e| e.error)?;
    let mut gauge = 0.0f64;
    for (a, b) in reg.samples.iter().zip(&other.samples) {
        for k in 0..6 {
            gauge = gauge.max((a.state[k] - b.state[k]).abs());
        }
        gauge = gauge.max((a.t - b.t).abs());
    }
    let xi = reg
        .samples
        .iter()
        .filter_map(|s| s.xi0)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(EccentricComparison {
        max_position_error: pos,
        max_energy_drift: reg.max_energy_drift(),
        period_error: (t_end - period).abs() / period,
        closure_error: closure,
        gauge_difference: gauge,
        max_xi0: xi,
    })
}

/// Residual of the Kepler vector field along the KS image of an oscillator
/// trajectory, and the gap between the mapped energy and `-omega / 8`.
pub fn kepler_field_residual(cfg: &IntegratorConfig) -> Result<(f64, f64)> {
    let (x0, y0) = eccentric_orbit();
    let mu = 1.0;
    let (h, omega) = oscillator_parameters(x0, y0, mu)?;
    let z0 = ks_preimage(x0, y0, 0.0)?;
    let osc = HamiltonianSpec::osc4(omega).with_h(h);
    let tau = std::f64::consts::PI / omega.sqrt();
    let out = Output::At((1..200).map(|k| tau * k as f64 / 200.0).collect());
    let traj = integrate_with_time_map(&osc, &z0.to_array(), (0.0, tau), cfg, TimeFactor::FourRho, &out)
        .map_err(|e| e.error)?;
    let kepler = HamiltonianSpec::kepler3(h / 4.0);
    let (mut field_err, mut energy_err) = (0.0f64, 0.0f64);
    for smp in &traj.samples {
        let z = PhasePoint8::from_slice(&smp.state);
        let dz = symplectic_field(&ham_gradient(&osc, &smp.state)?);
        let jac = ks_jacobian(&z, DefiningVector::PLUS_K)?;
        let rate = 4.0 * z.q.norm_sqr();
        let img = ks_map(&z, DefiningVector::PLUS_K)?.phase().to_array();
        let want = symplectic_field(&ham_gradient(&kepler, &img)?);
        let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in 0..6 {
            let got: f64 = (0..8).map(|c| jac[r][c] * dz[c]).sum::<f64>() / rate;
            field_err = field_err.max(rel(got - want[r], scale));
        }
        let e = ham_value(&kepler, &img)?;
        energy_err = energy_err.max((e + omega / 8.0).abs());
    }
    Ok((field_err, energy_err))
}

/// Outcome of the near-rectilinear comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectilinearComparison {
    pub tol: f64,
    pub regularized_drift: f64,
    pub regularized_closure: f64,
    pub min_radius: f64,
    pub direct_collapsed: bool,
    /// Smallest accepted direct step over the collapse threshold.
    pub direct_min_step_ratio: f64,
    pub direct_drift: f64,
}

/// Regularized and direct propagation of [`RECTILINEAR_ORBIT`] over one
/// period at the same tolerance.
pub fn rectilinear_comparison(tol: f64) -> Result<RectilinearComparison> {
    let (x0, y0) = RECTILINEAR_ORBIT;
    let cfg = IntegratorConfig::dopri5(tol, tol * 1e-2);
    let reg = propagate_regularized_kepler(
        x0,
        y0,
        &RegularizedKepler {
            span: KeplerSpan::Revolutions(1.0),
            ..Default::default()
        },
        &cfg,
    )
    .map_err(|e| e.error)?;
    let min_radius = reg
        .samples
        .iter()
        .map(|s| crate::maps::norm3(&[s.state[0], s.state[1], s.state[2]]))
        .fold(f64::INFINITY, f64::min);
    let last = &reg.last().state;
    let start = [x0[0], x0[1], x0[2], y0[0], y0[1], y0[2]];
    let closure = (0..6).map(|k| (last[k] - start[k]).abs()).fold(0.0, f64::max);

    let period = kepler_period(x0, y0, 1.0);
    let threshold = COLLAPSE_FRACTION * period;
    let (collapsed, ratio, drift) = match integrate(&HamiltonianSpec::kepler3(1.0), &start, (0.0, period), &cfg) {
        Ok(t) => (false, t.stats.min_step / threshold, t.max_energy_drift()),
        Err(e) => {
            let collapsed = e.is_collapse();
            let (ratio, drift) = e.partial.as_ref().map_or((0.0, f64::NAN), |p| {
                (p.stats.min_step / threshold, p.max_energy_drift())
            });
            (collapsed, if collapsed { ratio.min(1.0) } else { ratio }, drift)
        }
    };
    Ok(RectilinearComparison {
        tol,
        regularized_drift: reg.max_energy_drift(),
        regularized_closure: closure,
        min_radius,
        direct_collapsed: collapsed,
        direct_min_step_ratio: ratio,
        direct_drift: drift,
    })
}

/// Tolerance used for the near-rectilinear comparison.
pub const RECTILINEAR_TOL: f64 = 1e-13;

/// Split (`K_rho`, `K_theta` separately) against coupled integration of the
/// separable Hamiltonian, and `K_theta` alone against the closed-form rotor.
pub fn separability_check(chart: &EulerChart, span: f64, cfg: &IntegratorConfig) -> Result<(f64, f64, f64)> {
    let base = HamiltonianSpec::new(HamiltonianKind::EulerOsc).with_omega(1.1);
    let h = ham_value(&base, &chart.to_array())?;
    let sep = crate::dynamics::regularize(&base, crate::dynamics::RegularizationMode::PoincareRhoOver4, h)?;
    let (k_rho, k_theta) = sep.parts.expect("separable mode has parts");
    let grid: Vec<f64> = (1..100).map(|k| span * k as f64 / 100.0).collect();
    let out = Output::At(grid);
    let run =
        |spec: &HamiltonianSpec| integrate_at(spec, &chart.to_array(), (0.0, span), cfg, &out).map_err(|e| e.error);
    let coupled = run(&sep.spec)?;
    let radial = run(&k_rho)?;
    let angular = run(&k_theta)?;
    let mut split = 0.0f64;
    let mut rotor = 0.0f64;
    let mut momenta = 0.0f64;
    let (pphi, ppsi) = (chart.p_phi, chart.p_psi);
    let k = ham_value(&k_theta, &chart.to_array())?;
    let l = (2.0 * k).sqrt();
    let centre = pphi * ppsi / (l * l);
    let u0 = chart.theta.cos();
    let du0 = -chart.theta.sin() * chart.p_theta;
    for ((c, r), a) in coupled.samples.iter().zip(&radial.samples).zip(&angular.samples) {
        for i in [0, 4] {
            split = split.max(rel(c.state[i] - r.state[i], c.state[i]));
        }
        for i in [1, 2, 3, 5, 6, 7] {
            split = split.max(rel(c.state[i] - a.state[i], c.state[i]));
        }
        let s = a.s;
        let u = centre + (u0 - centre) * (l * s).cos() + du0 / l * (l * s).sin();
        rotor = rotor.max((a.state[2].cos() - u).abs());
        momenta = momenta.max((a.state[5] - pphi).abs()).max((a.state[7] - ppsi).abs());
    }
    Ok((split, rotor, momenta))
}

/// Andoyer chart flow of the polar Kepler Hamiltonian, mapped to `(q, p)`,
/// against the oscillator flow on the level `H = h` with `ds = 4 rho d tau`.
pub fn planar_kepler_flow_check(chart: &AndoyerChart, omega: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let scaling = Certificate::get().andoyer_scaling();
    let z0 = andoyer_to_phase_with(chart, scaling)?;
    let h = ham_value(&HamiltonianSpec::osc4(omega), &z0.to_array())?;
    let osc = HamiltonianSpec::osc4(omega).with_h(h);
    let tau = std::f64::consts::PI / omega.sqrt();
    let out = Output::At((1..100).map(|k| tau * k as f64 / 100.0).collect());
    let lifted = integrate_with_time_map(&osc, &z0.to_array(), (0.0, tau), cfg, TimeFactor::FourRho, &out)
        .map_err(|e| e.error)?;
    let s_grid: Vec<f64> = lifted.samples.iter().map(|s| s.t).collect();
    let s_end = *s_grid.last().expect("nonempty");
    let andoyer = HamiltonianSpec::new(HamiltonianKind::AndoyerRegularized)
        .with_h(h)
        .with_omega(omega);
    let chart_traj = integrate_at(
        &andoyer,
        &chart.to_array(),
        (0.0, s_end),
        cfg,
        &Output::At(s_grid[1..s_grid.len() - 1].to_vec()),
    )
    .map_err(|e| e.error)?;
    let mut err = 0.0f64;
    for (a, b) in lifted.samples.iter().zip(&chart_traj.samples) {
        let z = PhasePoint8::from_slice(&a.state);
        let w = andoyer_to_phase_with(&AndoyerChart::from_slice(&b.state), scaling)?;
        err = err.max(rel(z.max_abs_diff(w), z.scale()));
    }
    Ok(err)
}

/// Angles `phi`, `psi` by quadrature along a chart trajectory against the
/// same angles read off the oscillator trajectory.
pub fn quadrature_check(chart: &EulerChart, omega: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let spec = HamiltonianSpec::new(HamiltonianKind::EulerOsc).with_omega(omega);
    let osc = HamiltonianSpec::osc4(omega);
    let span = 2.0 * std::f64::consts::PI / omega.sqrt();
    let n = 100_000;
    let out = Output::At((1..n).map(|k| span * k as f64 / n as f64).collect());
    let traj = integrate_at(&spec, &chart.to_array(), (0.0, span), cfg, &out).map_err(|e| e.error)?;
    let quad = crate::dynamics::quadratures(&spec, &traj)?;
    let z0 = euler_to_phase(chart)?;
    let lifted = integrate_at(&osc, &z0.to_array(), (0.0, span), cfg, &out).map_err(|e| e.error)?;
    let tau = std::f64::consts::TAU;
    let mut err = 0.0f64;
    for (k, smp) in lifted.samples.iter().enumerate() {
        let c = phase_to_euler(&PhasePoint8::from_slice(&smp.state))?;
        // (phi, psi) and (phi + 2 pi, psi + 2 pi) are the same point
        let turns = ((quad.phi[k] - c.phi) / tau).round();
        let dpsi = (quad.psi[k] - c.psi - turns * tau).rem_euclid(2.0 * tau);
        err = err
            .max((quad.phi[k] - c.phi - turns * tau).abs())
            .max(dpsi.min(2.0 * tau - dpsi));
    }
    Ok(err)
}

pub fn suite_flow(opts: &VerifyOptions) -> SuiteReport {
    let cfg = &opts.integrator;
    let mut props = Vec::new();
    match eccentric_comparison(cfg) {
        Ok(c) => {
            props.push(Property::below("eccentric_position_error", c.max_position_error, 1e-6));
            props.push(Property::below("eccentric_energy_drift", c.max_energy_drift, 1e-9));
            props.push(Property::below("eccentric_period", c.period_error, 1e-6));
            props.push(Property::below("eccentric_closure", c.closure_error, 1e-6));
            props.push(Property::below("gauge_independence", c.gauge_difference, 1e-9));
            props.push(Property::below("xi0_along_lift", c.max_xi0, 1e-10));
        }
        Err(e) => props.push(Property::below("eccentric_orbit", f64::INFINITY, 1e-6).with_note(e.to_string())),
    }
    match kepler_field_residual(cfg) {
        Ok((field, energy)) => {
            props.push(Property::below("kepler_field_residual", field, 1e-7));
            props.push(
                Property::below("kepler_energy_is_minus_omega_over_8", energy, 1e-9)
                    .with_note("mu = h / 4, Kepler time dt = 4 |q|^2 d tau"),
            );
        }
        Err(e) => props.push(Property::below("kepler_field_residual", f64::INFINITY, 1e-7).with_note(e.to_string())),
    }
    match rectilinear_comparison(RECTILINEAR_TOL) {
        Ok(r) => {
            props.push(Property::below(
                "rectilinear_regularized_drift",
                r.regularized_drift,
                1e-8,
            ));
            props.push(Property::below(
                "rectilinear_regularized_closure",
                r.regularized_closure,
                1e-6,
            ));
            props.push(Property::report("rectilinear_min_radius", r.min_radius, 1e-4));
            props.push(
                Property::report("rectilinear_direct_min_step_ratio", r.direct_min_step_ratio, 1.0).with_note(format!(
                    "direct step collapse: {}; direct energy drift {:.3e}",
                    r.direct_collapsed, r.direct_drift
                )),
            );
        }
        Err(e) => props.push(Property::below("rectilinear", f64::INFINITY, 1e-8).with_note(e.to_string())),
    }

    // moderate draws: |Phi - Psi| and |Phi + Psi| stay away from zero so the
    // rotor keeps clear of the poles, and the planar orbit keeps clear of the origin
    let mut s = Sampler::new(opts.seed);
    let chart = EulerChart {
        rho: s.uniform(0.5, 1.5),
        phi: s.uniform(0.0, 6.0),
        theta: s.uniform(1.0, 2.1),
        psi: s.uniform(0.0, 12.0),
        p_rho: s.uniform(-0.3, 0.3),
        p_phi: s.uniform(0.4, 0.6),
        p_theta: s.uniform(-0.3, 0.3),
        p_psi: s.uniform(-0.3, -0.1),
    };
    match separability_check(&chart, 3.0, cfg) {
        Ok((split, rotor, momenta)) => {
            props.push(Property::below("separable_split_matches_coupled", split, 1e-8));
            props.push(Property::below("rotor_closed_form", rotor, 1e-8));
            props.push(Property::below("rotor_momenta_conserved", momenta, 1e-10));
        }
        Err(e) => props.push(Property::below("separability", f64::INFINITY, 1e-8).with_note(e.to_string())),
    }
    match quadrature_check(&chart, 1.1, cfg) {
        Ok(e) => props.push(Property::below("angle_quadratures", e, 1e-6)),
        Err(e) => props.push(Property::below("angle_quadratures", f64::INFINITY, 1e-6).with_note(e.to_string())),
    }
    let m = s.uniform(0.8, 1.2);
    let andoyer = AndoyerChart {
        rho: s.uniform(0.8, 1.2),
        lambda: s.uniform(0.0, 6.0),
        mu_angle: s.uniform(0.0, 6.0),
        nu: s.uniform(0.0, 6.0),
        p_rho: s.uniform(-0.3, 0.3),
        p_lambda: m * s.uniform(0.2, 0.8),
        p_mu: m,
        p_nu: m * s.uniform(-0.8, -0.2),
    };
    match planar_kepler_flow_check(&andoyer, 0.9, &IntegratorConfig::dopri5(1e-13, 1e-15)) {
        Ok(e) => props.push(
            Property::below("planar_kepler_flow", e, 1e-9)
                .with_note(format!("Lambda = {:.4}, N = {:.4}", andoyer.p_lambda, andoyer.p_nu)),
        ),
        Err(e) => props.push(Property::below("planar_kepler_flow", f64::INFINITY, 1e-9).with_note(e.to_string())),
    }
    SuiteReport::new(Suite::Flow, opts, props)
}

/// Runs the suites in order.
pub fn run_suites(suites: &[Suite], opts: &VerifyOptions) -> Vec<SuiteReport> {
    suites.iter().map(|s| s.run(opts)).collect()
}
