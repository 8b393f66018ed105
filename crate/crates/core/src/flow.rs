//! Integration of Hamiltonian vector fields with a physical-time column,
//! and the KS-regularized Kepler propagator.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    ham_gradient, ham_value, symplectic_field, HamiltonianKind, HamiltonianSpec, Layout, TimeFactor,
};
use crate::error::{Error, Result};
use crate::maps::{ks_map, ks_preimage, DefiningVector};
use crate::observables::{xi0, xi1, PhasePoint8};

/// Trajectory files carry this version in a header comment or record.
pub const FORMAT_VERSION: u32 = 1;

/// Adaptive steps smaller than this fraction of the span count as collapse.
pub const COLLAPSE_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed { step: f64 },
    Dopri5Adaptive { rel_tol: f64, abs_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4Fixed { step },
            max_steps: 10_000_000,
        }
    }

    pub fn dopri5(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorConfig {
            method: Method::Dopri5Adaptive { rel_tol, abs_tol },
            max_steps: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            Method::Rk4Fixed { step } => step > 0.0 && step.is_finite(),
            Method::Dopri5Adaptive { rel_tol, abs_tol } => {
                rel_tol > 0.0 && abs_tol > 0.0 && rel_tol.is_finite() && abs_tol.is_finite()
            }
        };
        if ok && self.max_steps > 0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid integrator settings {self:?}")))
        }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::dopri5(1e-10, 1e-12)
    }
}

/// Where samples are recorded.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// After every accepted step.
    Steps,
    /// Exactly at these values of the integration variable (ascending,
    /// inside the span). The span end is always recorded.
    At(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
    pub mean_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Integration (fictitious) variable.
    pub s: f64,
    /// Physical time.
    pub t: f64,
    pub state: Vec<f64>,
    /// Energy of the reported system.
    pub energy: f64,
    /// `|energy - energy at the first sample|`.
    pub energy_drift: f64,
    pub xi0: Option<f64>,
    pub xi1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Short name of the reported system.
    pub system: String,
    /// The Hamiltonian that was integrated.
    pub spec: HamiltonianSpec,
    pub layout: Layout,
    pub config: IntegratorConfig,
    pub time_factor: Option<TimeFactor>,
    pub stats: StepStats,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are never empty")
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.energy_drift))
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["s".to_string(), "t".to_string()];
        cols.extend(self.layout.columns().iter().map(|c| c.to_string()));
        cols.extend(["H", "Xi0", "Xi1"].map(String::from));
        cols
    }

    /// CSV with a `# format_version=N` comment line and a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Config(format!("write failed: {e}"));
        writeln!(w, "# format_version={FORMAT_VERSION} system={}", self.system).map_err(io)?;
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Config(format!("write failed: {e}"));
        out.write_record(self.columns()).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for smp in &self.samples {
            let mut row = vec![format!("{:e}", smp.s), format!("{:e}", smp.t)];
            row.extend(smp.state.iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", smp.energy));
            row.push(opt(smp.xi0));
            row.push(opt(smp.xi1));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush().map_err(io)
    }

    /// JSON lines: a header record, then one record per sample.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Config(format!("write failed: {e}"));
        let header = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "system": self.system,
            "spec": self.spec,
            "config": self.config,
            "time_factor": self.time_factor,
            "stats": self.stats,
            "columns": self.columns(),
        });
        writeln!(w, "{header}").map_err(io)?;
        for smp in &self.samples {
            writeln!(w, "{}", serde_json::to_string(smp).expect("samples serialize")).map_err(io)?;
        }
        Ok(())
    }
}

/// An integration failure, with the samples recorded before it.
#[derive(Debug, Clone)]
pub struct FlowError {
    pub error: Error,
    pub partial: Option<Box<Trajectory>>,
}

impl std::fmt::Display for FlowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)?;
        if let Some(p) = &self.partial {
            write!(f, " ({} samples recorded, last s = {})", p.samples.len(), p.last().s)?;
        }
        Ok(())
    }
}

impl std::error::Error for FlowError {}

impl From<Error> for FlowError {
    fn from(error: Error) -> Self {
        FlowError { error, partial: None }
    }
}

impl FlowError {
    pub fn is_collapse(&self) -> bool {
        matches!(self.error, Error::StepCollapse { .. })
    }
}

type Field<'a> = dyn Fn(&[f64], &mut [f64]) -> bool + 'a;

/// Raw solution of an autonomous ODE.
struct Solution {
    s: Vec<f64>,
    y: Vec<Vec<f64>>,
    stats: StepStats,
}

struct Failure {
    error: Error,
    partial: Solution,
}

// Dormand-Prince 5(4) tableau; the fields are autonomous so the nodes are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &[f64], h: f64, terms: &[(f64, &[f64])], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Adds `delta` to `y` with Kahan compensation carried in `comp`.
fn compensated_add(y: &mut [f64], comp: &mut [f64], delta: &[f64]) {
    for i in 0..y.len() {
        let d = delta[i] - comp[i];
        let t = y[i] + d;
        comp[i] = (t - y[i]) - d;
        y[i] = t;
    }
}

fn output_points(output: &Output, s0: f64, s1: f64) -> Vec<f64> {
    match output {
        Output::Steps => vec![],
        Output::At(points) => {
            let mut pts: Vec<f64> = points.iter().copied().filter(|p| *p > s0 && *p < s1).collect();
            pts.push(s1);
            pts
        }
    }
}

fn dopri5(
    field: &Field,
    y0: &[f64],
    span: (f64, f64),
    rtol: f64,
    atol: f64,
    max_steps: usize,
    output: &Output,
) -> std::result::Result<Solution, Failure> {
    let n = y0.len();
    let (s0, s1) = span;
    let length = s1 - s0;
    let threshold = COLLAPSE_FRACTION * length.abs();
    let mut sol = Solution {
        s: vec![s0],
        y: vec![y0.to_vec()],
        stats: StepStats {
            min_step: f64::INFINITY,
            ..Default::default()
        },
    };
    let fail = |error: Error, mut sol: Solution| {
        finish_stats(&mut sol.stats);
        Err(Failure { error, partial: sol })
    };
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y = y0.to_vec();
    let mut comp = vec![0.0; n];
    if !field(&y, &mut k[0]) {
        return fail(Error::NonFinite("vector field at the initial state".into()), sol);
    }
    let points = output_points(output, s0, s1);
    let mut next_point = 0;
    let scale = |a: f64, b: f64| atol + rtol * a.abs().max(b.abs());
    // initial step following Hairer, Norsett and Wanner
    let d0 = (y.iter().map(|v| (v / scale(*v, *v)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k[0]
        .iter()
        .zip(&y)
        .map(|(f, v)| (f / scale(*v, *v)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(length.abs());
    let mut s = s0;
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut total = 0.0;
    loop {
        if sol.stats.accepted + sol.stats.rejected >= max_steps {
            return fail(Error::MaxSteps(max_steps), sol);
        }
        let target = if points.is_empty() { s1 } else { points[next_point] };
        let mut step = h.min(target - s);
        let hits_target = step >= target - s;
        if hits_target {
            step = target - s;
        }
        if h < threshold {
            return fail(Error::StepCollapse { s, step: h, threshold }, sol);
        }
        let (k1, rest) = k.split_at_mut(1);
        let k1 = &k1[0];
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, rest) = rest.split_at_mut(1);
        let (k4, rest) = rest.split_at_mut(1);
        let (k5, rest) = rest.split_at_mut(1);
        let (k6, k7) = rest.split_at_mut(1);
        let (k2, k3, k4, k5, k6, k7) = (&mut k2[0], &mut k3[0], &mut k4[0], &mut k5[0], &mut k6[0], &mut k7[0]);
        let mut ok = true;
        combo(&y, step, &[(A21, k1)], &mut tmp);
        ok &= field(&tmp, k2);
        combo(&y, step, &[(A31, k1), (A32, k2)], &mut tmp);
        ok &= field(&tmp, k3);
        combo(&y, step, &[(A41, k1), (A42, k2), (A43, k3)], &mut tmp);
        ok &= field(&tmp, k4);
        combo(&y, step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], &mut tmp);
        ok &= field(&tmp, k5);
        combo(
            &y,
            step,
            &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
            &mut tmp,
        );
        ok &= field(&tmp, k6);
        let mut delta = vec![0.0; n];
        for i in 0..n {
            delta[i] = step * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            tmp[i] = y[i] + delta[i];
        }
        ok &= field(&tmp, k7);
        let err = if ok {
            let mut acc = 0.0;
            for i in 0..n {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = scale(y[i], tmp[i]);
                acc += (e / sc).powi(2);
            }
            (acc / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        if err.is_nan() {
            return fail(Error::NonFinite("error estimate".into()), sol);
        }
        if err <= 1.0 {
            // PI controller, beta = 0.04
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * err_old.powf(0.04)).clamp(0.2, 10.0);
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            compensated_add(&mut y, &mut comp, &delta);
            s = if hits_target { target } else { s + step };
            let k7c = k7.clone();
            k[0].copy_from_slice(&k7c);
            sol.stats.accepted += 1;
            sol.stats.min_step = sol.stats.min_step.min(step);
            sol.stats.max_step = sol.stats.max_step.max(step);
            total += step;
            sol.stats.mean_step = total / sol.stats.accepted as f64;
            err_old = err.max(1e-4);
            last_rejected = false;
            let record = match output {
                Output::Steps => true,
                Output::At(_) => hits_target,
            };
            if record {
                sol.s.push(s);
                sol.y.push(y.clone());
            }
            if hits_target && !points.is_empty() {
                next_point += 1;
            }
            if s >= s1 {
                break;
            }
            h = if hits_target { h.max(step * fac) } else { step * fac };
        } else {
            sol.stats.rejected += 1;
            last_rejected = true;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h = step * fac;
        }
    }
    sol.stats.mean_step = total / sol.stats.accepted.max(1) as f64;
    finish_stats(&mut sol.stats);
    Ok(sol)
}

fn finish_stats(stats: &mut StepStats) {
    if !stats.min_step.is_finite() {
        stats.min_step = 0.0;
    }
}

fn rk4(
    field: &Field,
    y0: &[f64],
    span: (f64, f64),
    step: f64,
    max_steps: usize,
) -> std::result::Result<Solution, Failure> {
    let n = y0.len();
    let length = span.1 - span.0;
    let count = (length / step).round().max(1.0) as usize;
    let mut sol = Solution {
        s: vec![span.0],
        y: vec![y0.to_vec()],
        stats: StepStats::default(),
    };
    if count > max_steps {
        return Err(Failure {
            error: Error::MaxSteps(max_steps),
            partial: sol,
        });
    }
    let h = length / count as f64;
    let mut y = y0.to_vec();
    let mut comp = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut delta = vec![0.0; n];
    for i in 1..=count {
        let mut ok = field(&y, &mut k1);
        combo(&y, 0.5 * h, &[(1.0, &k1)], &mut tmp);
        ok &= field(&tmp, &mut k2);
        combo(&y, 0.5 * h, &[(1.0, &k2)], &mut tmp);
        ok &= field(&tmp, &mut k3);
        combo(&y, h, &[(1.0, &k3)], &mut tmp);
        ok &= field(&tmp, &mut k4);
        if !ok {
            return Err(Failure {
                error: Error::NonFinite(format!("vector field near s = {}", sol.s.last().unwrap())),
                partial: sol,
            });
        }
        for j in 0..n {
            delta[j] = h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        compensated_add(&mut y, &mut comp, &delta);
        sol.s.push(if i == count { span.1 } else { span.0 + i as f64 * h });
        sol.y.push(y.clone());
    }
    sol.stats = StepStats {
        accepted: count,
        rejected: 0,
        min_step: h,
        max_step: h,
        mean_step: h,
    };
    Ok(sol)
}

fn solve(
    field: &Field,
    y0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
    output: &Output,
) -> std::result::Result<Solution, Failure> {
    match cfg.method {
        Method::Rk4Fixed { step } => rk4(field, y0, span, step, cfg.max_steps),
        Method::Dopri5Adaptive { rel_tol, abs_tol } => dopri5(field, y0, span, rel_tol, abs_tol, cfg.max_steps, output),
    }
}

fn bilinears(spec: &HamiltonianSpec, state: &[f64]) -> (Option<f64>, Option<f64>) {
    match spec.layout() {
        Layout::Quaternion => {
            let z = PhasePoint8::from_slice(state);
            (Some(xi0(&z)), Some(xi1(&z)))
        }
        Layout::Euler => (Some(2.0 * state[7]), Some(2.0 * state[5])),
        _ => (None, None),
    }
}

fn check_span(span: (f64, f64)) -> Result<()> {
    crate::error::ensure_finite("span", &[span.0, span.1])?;
    if span.1 > span.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("span must be increasing, got {span:?}")))
    }
}

fn build(
    spec: &HamiltonianSpec,
    cfg: &IntegratorConfig,
    time_factor: Option<TimeFactor>,
    sol: Solution,
) -> Result<Trajectory> {
    let dim = spec.layout().dim();
    let mut samples = Vec::with_capacity(sol.s.len());
    let mut e0 = None;
    for (s, y) in sol.s.iter().zip(sol.y) {
        let state = y[..dim].to_vec();
        let t = if time_factor.is_some() { y[dim] } else { *s };
        let energy = ham_value(spec, &state).unwrap_or(f64::NAN);
        let e0 = *e0.get_or_insert(energy);
        let (a, b) = bilinears(spec, &state);
        samples.push(Sample {
            s: *s,
            t,
            state,
            energy,
            energy_drift: (energy - e0).abs(),
            xi0: a,
            xi1: b,
        });
    }
    Ok(Trajectory {
        system: spec.kind.name().to_string(),
        spec: *spec,
        layout: spec.layout(),
        config: *cfg,
        time_factor,
        stats: sol.stats,
        samples,
    })
}

fn run(
    spec: &HamiltonianSpec,
    s0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
    time_factor: Option<TimeFactor>,
    output: &Output,
) -> std::result::Result<Trajectory, FlowError> {
    spec.validate()?;
    cfg.validate()?;
    check_span(span)?;
    ham_value(spec, s0)?;
    let dim = spec.layout().dim();
    if let Some(tf) = time_factor {
        tf.rate(spec, s0)?;
    }
    let field = |y: &[f64], out: &mut [f64]| -> bool {
        let Ok(g) = ham_gradient(spec, &y[..dim]) else {
            return false;
        };
        let f = symplectic_field(&g);
        out[..dim].copy_from_slice(&f);
        if let Some(tf) = time_factor {
            match tf.rate(spec, &y[..dim]) {
                Ok(r) => out[dim] = r,
                Err(_) => return false,
            }
        }
        out.iter().all(|v| v.is_finite())
    };
    let mut y0 = s0.to_vec();
    if time_factor.is_some() {
        y0.push(0.0);
    }
    match solve(&field, &y0, span, cfg, output) {
        Ok(sol) => Ok(build(spec, cfg, time_factor, sol)?),
        Err(Failure { error, partial }) => Err(FlowError {
            error,
            partial: build(spec, cfg, time_factor, partial).ok().map(Box::new),
        }),
    }
}

/// Integrates `spec` over `span`, recording every step. Physical time equals
/// the integration variable.
pub fn integrate(
    spec: &HamiltonianSpec,
    s0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, FlowError> {
    run(spec, s0, span, cfg, None, &Output::Steps)
}

/// As [`integrate`], with explicit output placement.
pub fn integrate_at(
    spec: &HamiltonianSpec,
    s0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
    output: &Output,
) -> std::result::Result<Trajectory, FlowError> {
    run(spec, s0, span, cfg, None, output)
}

/// Integrates with physical time carried as an extra component,
/// `dt/ds = time_factor(state)`, starting from `t = 0`.
pub fn integrate_with_time_map(
    spec: &HamiltonianSpec,
    s0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
    time_factor: TimeFactor,
    output: &Output,
) -> std::result::Result<Trajectory, FlowError> {
    run(spec, s0, span, cfg, Some(time_factor), output)
}

/// Integrates a bare vector field on `R^n`; used for flows that are not
/// Hamiltonians of a registered kind.
pub fn integrate_field<F>(field: F, y0: &[f64], span: (f64, f64), cfg: &IntegratorConfig) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) -> bool,
{
    cfg.validate()?;
    check_span(span)?;
    solve(&field, y0, span, cfg, &Output::At(vec![]))
        .map(|sol| sol.y.last().cloned().expect("solutions hold the initial state"))
        .map_err(|f| f.error)
}

/// Length of a regularized Kepler propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeplerSpan {
    /// Whole Kepler periods; one period is half an oscillator period.
    Revolutions(f64),
    /// Span of the oscillator time.
    Fictitious(f64),
}

/// Settings for [`propagate_regularized_kepler`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedKepler {
    pub grav_param: f64,
    pub span: KeplerSpan,
    pub gauge_psi: f64,
    /// Samples per revolution; `0` records every step.
    pub samples_per_rev: usize,
}

impl Default for RegularizedKepler {
    fn default() -> Self {
        RegularizedKepler {
            grav_param: 1.0,
            span: KeplerSpan::Revolutions(1.0),
            gauge_psi: 0.0,
            samples_per_rev: 0,
        }
    }
}

/// Oscillator parameters `(h, omega)` for a bound Kepler state: `h = 4 mu`
/// and `omega = -8 E`.
pub fn oscillator_parameters(x: [f64; 3], y: [f64; 3], grav_param: f64) -> Result<(f64, f64)> {
    let r = crate::maps::norm3(&x);
    if r == 0.0 {
        return Err(Error::domain("|x|", 0.0, "collision state"));
    }
    let energy = 0.5 * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) - grav_param / r;
    if energy >= 0.0 {
        return Err(Error::domain(
            "energy",
            energy,
            "regularized propagation needs a bound orbit",
        ));
    }
    Ok((4.0 * grav_param, -8.0 * energy))
}

/// Lifts `(x0, y0)` to the oscillator with the KS preimage, integrates
/// `osc4` in oscillator time with `dt = 4 |q|^2 dtau`, and maps every
/// sample back with the KS map. Samples are Kepler states with the Kepler
/// energy; `xi0`/`xi1` report the bilinears of the oscillator state.
pub fn propagate_regularized_kepler(
    x0: [f64; 3],
    y0: [f64; 3],
    settings: &RegularizedKepler,
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, FlowError> {
    let mu = settings.grav_param;
    let (h, omega) = oscillator_parameters(x0, y0, mu)?;
    let z0 = ks_preimage(x0, y0, settings.gauge_psi)?;
    let osc = HamiltonianSpec::osc4(omega).with_h(h);
    let half_period = std::f64::consts::PI / omega.sqrt();
    let (tau, revs) = match settings.span {
        KeplerSpan::Revolutions(n) => (n * half_period, n),
        KeplerSpan::Fictitious(t) => (t, t / half_period),
    };
    let output = if settings.samples_per_rev == 0 {
        Output::Steps
    } else {
        let n = (settings.samples_per_rev as f64 * revs).ceil().max(1.0) as usize;
        Output::At((1..n).map(|k| tau * k as f64 / n as f64).collect())
    };
    let kepler = HamiltonianSpec::kepler3(mu);
    let convert = |traj: Trajectory| -> Result<Trajectory> {
        let mut samples = Vec::with_capacity(traj.samples.len());
        let mut e0 = None;
        for smp in traj.samples {
            let img = ks_map(&PhasePoint8::from_slice(&smp.state), DefiningVector::PLUS_K)?;
            let state = img.phase().to_array().to_vec();
            let energy = ham_value(&kepler, &state)?;
            let e0 = *e0.get_or_insert(energy);
            samples.push(Sample {
                energy,
                energy_drift: (energy - e0).abs(),
                state,
                ..smp
            });
        }
        Ok(Trajectory {
            system: "kepler3-regularized".into(),
            spec: traj.spec,
            layout: Layout::Cartesian3,
            samples,
            ..traj
        })
    };
    match integrate_with_time_map(&osc, &z0.to_array(), (0.0, tau), cfg, TimeFactor::FourRho, &output) {
        Ok(traj) => Ok(convert(traj)?),
        Err(FlowError { error, partial }) => Err(FlowError {
            error,
            partial: partial.and_then(|p| convert(*p).ok()).map(Box::new),
        }),
    }
}

/// Kepler's third law, `2 pi a^{3/2} / sqrt(mu)`.
pub fn kepler_period(x: [f64; 3], y: [f64; 3], grav_param: f64) -> f64 {
    let r = crate::maps::norm3(&x);
    let energy = 0.5 * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) - grav_param / r;
    let a = -grav_param / (2.0 * energy);
    2.0 * std::f64::consts::PI * a.powf(1.5) / grav_param.sqrt()
}

/// Is this kind integrated on the quaternion layout?
pub fn is_oscillator(kind: HamiltonianKind) -> bool {
    kind.layout() == Layout::Quaternion
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn oscillator_period_rk4() {
        let spec = HamiltonianSpec::osc4(1.0);
        let s0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0];
        let traj = integrate(&spec, &s0, (0.0, 2.0 * PI), &IntegratorConfig::rk4(1e-3)).unwrap();
        let end = &traj.last().state;
        for (a, b) in end.iter().zip(&s0) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(traj.last().s, 2.0 * PI);
    }

    #[test]
    fn oscillator_matches_exact_solution_dopri5() {
        let spec = HamiltonianSpec::osc4(2.0);
        let s0 = [1.0, 0.3, -0.2, 0.1, 0.0, 0.5, 0.4, -0.6];
        let span = 3.7;
        let traj = integrate(&spec, &s0, (0.0, span), &IntegratorConfig::dopri5(1e-12, 1e-14)).unwrap();
        let w = 2.0f64.sqrt();
        let (s, c) = (w * span).sin_cos();
        for k in 0..4 {
            let q = s0[k] * c + s0[4 + k] / w * s;
            let p = -s0[k] * w * s + s0[4 + k] * c;
            assert!((traj.last().state[k] - q).abs() < 1e-10);
            assert!((traj.last().state[4 + k] - p).abs() < 1e-10);
        }
        assert!(traj.max_energy_drift() < 1e-11);
        assert!(traj.samples.windows(2).all(|w| w[1].s > w[0].s));
    }

    #[test]
    fn circular_kepler_returns() {
        let spec = HamiltonianSpec::kepler3(1.0);
        let s0 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let traj = integrate(&spec, &s0, (0.0, 2.0 * PI), &IntegratorConfig::dopri5(1e-11, 1e-13)).unwrap();
        for (a, b) in traj.last().state.iter().zip(&s0) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn output_points_are_hit_exactly() {
        let spec = HamiltonianSpec::osc4(1.0);
        let s0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let pts = vec![0.5, 1.0, 2.5];
        let traj = integrate_at(
            &spec,
            &s0,
            (0.0, 3.0),
            &IntegratorConfig::dopri5(1e-10, 1e-12),
            &Output::At(pts),
        )
        .unwrap();
        let s: Vec<f64> = traj.samples.iter().map(|x| x.s).collect();
        assert_eq!(s, vec![0.0, 0.5, 1.0, 2.5, 3.0]);
    }

    #[test]
    fn time_map_on_circular_state_is_linear() {
        // on a circular oscillator orbit |q|^2 is constant
        let spec = HamiltonianSpec::osc4(1.0);
        let s0 = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let traj = integrate_with_time_map(
            &spec,
            &s0,
            (0.0, 2.0),
            &IntegratorConfig::dopri5(1e-12, 1e-14),
            TimeFactor::FourRho,
            &Output::Steps,
        )
        .unwrap();
        for smp in &traj.samples {
            assert!((smp.t - 4.0 * smp.s).abs() < 1e-11);
        }
    }

    #[test]
    fn regularized_ellipse_closes() {
        let (x0, y0) = ([1.0, 0.0, 0.0], [0.0, 0.5, 0.1]);
        let traj = propagate_regularized_kepler(
            x0,
            y0,
            &RegularizedKepler::default(),
            &IntegratorConfig::dopri5(1e-12, 1e-14),
        )
        .unwrap();
        let end = &traj.last().state;
        for k in 0..3 {
            assert!((end[k] - x0[k]).abs() < 1e-8);
            assert!((end[3 + k] - y0[k]).abs() < 1e-8);
        }
        let period = kepler_period(x0, y0, 1.0);
        assert!((traj.last().t - period).abs() < 1e-8 * period);
        assert!(traj.max_energy_drift() < 1e-9);
    }

    #[test]
    fn unbound_states_are_rejected() {
        let r = propagate_regularized_kepler(
            [1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            &RegularizedKepler::default(),
            &IntegratorConfig::default(),
        );
        assert!(matches!(
            r,
            Err(FlowError {
                error: Error::Domain { .. },
                ..
            })
        ));
    }

    #[test]
    fn csv_and_json_lines_exports() {
        let spec = HamiltonianSpec::osc4(1.0);
        let traj = integrate(
            &spec,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            (0.0, 0.1),
            &IntegratorConfig::rk4(0.05),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# format_version=1 system=osc4");
        assert_eq!(lines.next().unwrap(), "s,t,q1,q2,q3,q4,p1,p2,p3,p4,H,Xi0,Xi1");
        assert_eq!(lines.count(), 3);
        let mut buf = Vec::new();
        traj.write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["format_version"], 1);
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn rectilinear_fall_collapses() {
        // exactly radial infall hits the singularity at finite time
        let spec = HamiltonianSpec::kepler3(1.0);
        let err = integrate(
            &spec,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            (0.0, 2.0),
            &IntegratorConfig::dopri5(1e-10, 1e-12),
        )
        .unwrap_err();
        assert!(err.is_collapse(), "{err}");
        let partial = err.partial.unwrap();
        assert!(partial.samples.len() > 1);
        assert!(partial.last().s > 1.0);
    }
}
