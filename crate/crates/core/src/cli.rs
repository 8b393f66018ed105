//! Command-line driver: `verify`, `propagate`, `map` and `sample`.
//!
//! Exit codes: 0 success, 1 failed verification or integration, 2 usage,
//! 3 domain, 4 step collapse, 5 malformed input.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::charts::{
    andoyer_to_phase, euler_to_phase, phase_to_euler, polar_to_cartesian2, spherical_to_cartesian, AndoyerChart,
    AndoyerConvention, EulerChart, SphericalChart,
};
use crate::dynamics::{HamiltonianKind, HamiltonianSpec, TimeFactor};
use crate::error::Error;
use crate::flow::{
    integrate_at, integrate_with_time_map, propagate_regularized_kepler, FlowError, IntegratorConfig, KeplerSpan,
    Output, RegularizedKepler, Trajectory, FORMAT_VERSION,
};
use crate::maps::{ks_map, ks_preimage, lc_map, DefiningVector, LcVariant};
use crate::observables::{Convention, PhasePoint8};
use crate::sampling::{self, Manifold};
use crate::verify::{parse_suites, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_COLLAPSE: i32 = 4;
pub const EXIT_MALFORMED: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Collapse(String),
    Malformed(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Collapse(_) => EXIT_COLLAPSE,
            CliError::Malformed(_) => EXIT_MALFORMED,
            CliError::Failed(_) => EXIT_FAILED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Domain(m)
            | CliError::Collapse(m)
            | CliError::Malformed(m)
            | CliError::Failed(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Domain { .. } | Error::NonFinite(_) => CliError::Domain(msg),
            Error::Dimension { .. } => CliError::Malformed(msg),
            Error::StepCollapse { .. } => CliError::Collapse(msg),
            Error::MaxSteps(_) => CliError::Failed(msg),
            Error::Unsupported(_) | Error::Config(_) => CliError::Usage(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Failed(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "ksreg", version, about = "Regularized Kepler dynamics and its verification")]
pub struct Cli {
    /// TOML file with `[verify]`, `[propagate]`, `[map]` or `[sample]` tables; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run property suites and write JSON reports.
    Verify(VerifyArgs),
    /// Integrate a system and write its trajectory.
    Propagate(PropagateArgs),
    /// Apply a map or chart to points.
    Map(MapArgs),
    /// Draw seeded samples from a manifold.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// brackets, diagram, fibers, reduction, charts, lc, flow or all.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restrict the bracket suite to `printed` (report only) or `corrected`.
    #[arg(long)]
    pub convention: Option<String>,
    /// Directory for `<suite>.json` reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateArgs {
    /// osc4, kepler3, kepler2, kepler3-regularized or any Hamiltonian kind.
    #[arg(long)]
    pub system: Option<String>,
    /// Initial condition, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub ic: Option<String>,
    /// CSV file whose first data row is the initial condition.
    #[arg(long)]
    pub ic_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// Length of the integration interval (fictitious time for the regularized system).
    #[arg(long)]
    pub span: Option<f64>,
    /// Kepler revolutions, for the regularized system.
    #[arg(long)]
    pub revs: Option<f64>,
    /// Samples per revolution for the regularized system; 0 records every step.
    #[arg(long)]
    pub samples_per_rev: Option<usize>,
    /// Fiber angle of the lift, for the regularized system.
    #[arg(long, allow_hyphen_values = true)]
    pub gauge: Option<f64>,
    /// dopri5 or rk4.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Fixed step for rk4.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// 4rho, rho_over_4 or abs_x_over_h.
    #[arg(long)]
    pub time_factor: Option<String>,
    /// csv or jsonl.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapArgs {
    /// ks, ks-inverse, lc, euler, euler-inverse, andoyer, spherical or polar.
    #[arg(long)]
    pub via: Option<String>,
    /// Defining vector for ks, e.g. `+k` or `-i`.
    #[arg(long = "dv", allow_hyphen_values = true)]
    pub defining_vector: Option<String>,
    /// Levi-Civita variant: 1, -1, i or -i.
    #[arg(long, allow_hyphen_values = true)]
    pub variant: Option<String>,
    /// Fiber angle for ks-inverse.
    #[arg(long, allow_hyphen_values = true)]
    pub gauge: Option<f64>,
    /// Andoyer construction: calibrated or printed.
    #[arg(long)]
    pub andoyer: Option<String>,
    /// A single point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// CSV input with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    /// phase8, xi0-zero, xi1-zero, euler-domain or andoyer-domain.
    #[arg(long)]
    pub manifold: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub verify: VerifyArgs,
    #[serde(default)]
    pub propagate: PropagateArgs,
    #[serde(default)]
    pub map: MapArgs,
    #[serde(default)]
    pub sample: SampleArgs,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),+) => {{
        let (a, b) = ($flags, $file);
        Self { $($f: a.$f.or(b.$f)),+ }
    }};
}

impl VerifyArgs {
    fn merge(self, file: VerifyArgs) -> Self {
        merge_fields!(self, file, suite, samples, seed, convention, out)
    }
}

impl PropagateArgs {
    fn merge(self, file: PropagateArgs) -> Self {
        merge_fields!(
            self,
            file,
            system,
            ic,
            ic_file,
            omega,
            mu,
            h,
            span,
            revs,
            samples_per_rev,
            gauge,
            method,
            rtol,
            atol,
            step,
            max_steps,
            time_factor,
            format,
            out
        )
    }
}

impl MapArgs {
    fn merge(self, file: MapArgs) -> Self {
        merge_fields!(
            self,
            file,
            via,
            defining_vector,
            variant,
            gauge,
            andoyer,
            point,
            input,
            out
        )
    }
}

impl SampleArgs {
    fn merge(self, file: SampleArgs) -> Self {
        merge_fields!(self, file, manifold, count, seed, out)
    }
}

fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn finite(name: &str, v: Option<f64>) -> CliResult<Option<f64>> {
    match v {
        Some(x) if !x.is_finite() => Err(CliError::Usage(format!("--{name} must be finite, got {x}"))),
        other => Ok(other),
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_point(text: &str, expected: usize) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Malformed(format!("cannot parse `{text}`: {e}")))?;
    if values.len() != expected {
        return Err(CliError::Malformed(format!(
            "expected {expected} comma-separated values, got {}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Malformed(format!("non-finite value {v} in `{text}`")));
    }
    Ok(values)
}

fn format_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

fn open_output(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io_err(p))?;
            }
            let f = fs::File::create(p).map_err(io_err(p))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn print_config<T: Serialize>(section: &str, value: &T) -> CliResult<i32> {
    let mut table = toml::Table::new();
    let inner = toml::Table::try_from(value).map_err(|e| CliError::Failed(e.to_string()))?;
    table.insert(section.into(), toml::Value::Table(inner));
    print!(
        "{}",
        toml::to_string(&table).map_err(|e| CliError::Failed(e.to_string()))?
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- verify

fn cmd_verify(args: VerifyArgs, print: bool) -> CliResult<i32> {
    let resolved = VerifyArgs {
        suite: Some(args.suite.unwrap_or_else(|| "all".into())),
        samples: Some(args.samples.unwrap_or(1000)),
        seed: Some(args.seed.unwrap_or(42)),
        convention: args.convention,
        out: Some(args.out.unwrap_or_else(|| PathBuf::from("verify-reports"))),
    };
    if print {
        return print_config("verify", &resolved);
    }
    let suites = parse_suites(resolved.suite.as_deref().unwrap_or("all")).map_err(CliError::from)?;
    let convention = match resolved.convention.as_deref() {
        None => None,
        Some("printed") => Some(Convention::Printed),
        Some("corrected") => Some(Convention::Corrected),
        Some(other) => return Err(CliError::Usage(format!("unknown convention `{other}`"))),
    };
    let samples = resolved.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let opts = VerifyOptions {
        seed: resolved.seed.unwrap_or(42),
        samples,
        convention,
        ..Default::default()
    };
    let dir = resolved.out.unwrap_or_default();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut ok = true;
    for suite in suites {
        let report = suite.run(&opts);
        for p in &report.properties {
            println!("{}", p.summary_line(&report.suite));
        }
        let path = dir.join(format!("{}.json", report.suite));
        fs::write(&path, report.to_json()).map_err(io_err(&path))?;
        ok &= report.passed();
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

// ---------------------------------------------------------------- propagate

fn integrator(args: &PropagateArgs) -> CliResult<IntegratorConfig> {
    let mut cfg = match args.method.as_deref().unwrap_or("dopri5") {
        "dopri5" => IntegratorConfig::dopri5(args.rtol.unwrap_or(1e-10), args.atol.unwrap_or(1e-12)),
        "rk4" => IntegratorConfig::rk4(args.step.unwrap_or(1e-3)),
        other => return Err(CliError::Usage(format!("unknown method `{other}`"))),
    };
    if let Some(n) = args.max_steps {
        cfg.max_steps = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_ic_file(path: &Path, expected: usize) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let record = reader
        .records()
        .next()
        .ok_or_else(|| CliError::Malformed(format!("{}: no data row", path.display())))?
        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
    let row: Vec<&str> = record.iter().collect();
    parse_point(&row.join(","), expected)
}

fn cmd_propagate(args: PropagateArgs, print: bool) -> CliResult<i32> {
    for (name, v) in [
        ("omega", args.omega),
        ("mu", args.mu),
        ("h", args.h),
        ("span", args.span),
        ("revs", args.revs),
        ("gauge", args.gauge),
        ("rtol", args.rtol),
        ("atol", args.atol),
        ("step", args.step),
    ] {
        finite(name, v)?;
    }
    let system = args
        .system
        .clone()
        .ok_or_else(|| CliError::Usage("--system is required".into()))?;
    let cfg = integrator(&args)?;
    if print {
        return print_config("propagate", &args);
    }
    let regularized = system == "kepler3-regularized";
    let spec = if regularized {
        HamiltonianSpec::kepler3(args.mu.unwrap_or(1.0))
    } else {
        let kind: HamiltonianKind = system
            .parse()
            .map_err(|_| CliError::Usage(format!("unknown system `{system}`")))?;
        let mut spec = HamiltonianSpec::new(kind);
        if let Some(w) = args.omega {
            spec = spec.with_omega(w);
        }
        if let Some(m) = args.mu {
            spec = spec.with_grav_param(m);
        }
        if let Some(h) = args.h {
            spec = spec.with_h(h);
        }
        spec.validate()?;
        spec
    };
    let dim = spec.layout().dim();
    let ic = match (&args.ic, &args.ic_file) {
        (Some(text), None) => parse_point(text, dim)?,
        (None, Some(path)) => read_ic_file(path, dim)?,
        (Some(_), Some(_)) => return Err(CliError::Usage("give --ic or --ic-file, not both".into())),
        (None, None) => return Err(CliError::Usage("an initial condition is required".into())),
    };

    let result: std::result::Result<Trajectory, FlowError> = if regularized {
        let span = match (args.revs, args.span) {
            (Some(_), Some(_)) => return Err(CliError::Usage("give --revs or --span, not both".into())),
            (_, Some(s)) => KeplerSpan::Fictitious(s),
            (r, None) => KeplerSpan::Revolutions(r.unwrap_or(1.0)),
        };
        let settings = RegularizedKepler {
            grav_param: args.mu.unwrap_or(1.0),
            span,
            gauge_psi: args.gauge.unwrap_or(0.0),
            samples_per_rev: args.samples_per_rev.unwrap_or(0),
        };
        propagate_regularized_kepler([ic[0], ic[1], ic[2]], [ic[3], ic[4], ic[5]], &settings, &cfg)
    } else {
        let span = args.span.ok_or_else(|| CliError::Usage("--span is required".into()))?;
        match args.time_factor.as_deref() {
            None => integrate_at(&spec, &ic, (0.0, span), &cfg, &Output::Steps),
            Some(name) => {
                let tf: TimeFactor = serde_json::from_value(serde_json::Value::String(name.into()))
                    .map_err(|_| CliError::Usage(format!("unknown time factor `{name}`")))?;
                integrate_with_time_map(&spec, &ic, (0.0, span), &cfg, tf, &Output::Steps)
            }
        }
    };

    let format = args.format.clone().unwrap_or_else(|| "csv".into());
    let write = |traj: &Trajectory| -> CliResult<()> {
        let mut out = open_output(args.out.as_deref())?;
        match format.as_str() {
            "csv" => traj.write_csv(&mut out)?,
            "jsonl" => traj.write_json_lines(&mut out)?,
            other => return Err(CliError::Usage(format!("unknown format `{other}`"))),
        }
        out.flush().map_err(|e| CliError::Failed(e.to_string()))
    };
    if !matches!(format.as_str(), "csv" | "jsonl") {
        return Err(CliError::Usage(format!("unknown format `{format}`")));
    }
    match result {
        Ok(traj) => {
            write(&traj)?;
            report_stats(&traj);
            Ok(EXIT_OK)
        }
        Err(FlowError { error, partial }) => {
            if let Some(p) = &partial {
                write(p)?;
                report_stats(p);
                eprintln!("partial output retained: {} samples", p.samples.len());
            }
            Err(error.into())
        }
    }
}

fn report_stats(traj: &Trajectory) {
    let s = traj.stats;
    eprintln!(
        "steps accepted={} rejected={} min={:.3e} max={:.3e} mean={:.3e} max_energy_drift={:.3e}",
        s.accepted,
        s.rejected,
        s.min_step,
        s.max_step,
        s.mean_step,
        traj.max_energy_drift()
    );
}

// ---------------------------------------------------------------- map

const PHASE8: [&str; 8] = sampling::PHASE_HEADER;
const CART3: [&str; 6] = ["x1", "x2", "x3", "y1", "y2", "y3"];
const SPHERICAL: [&str; 6] = ["rho", "theta", "phi", "p_rho", "p_theta", "p_phi"];

/// A single-point map with fixed input and output columns.
struct Mapping {
    input: Vec<&'static str>,
    output: Vec<&'static str>,
    apply: Box<dyn Fn(&[f64]) -> crate::error::Result<Vec<f64>>>,
}

fn mapping(args: &MapArgs) -> CliResult<Mapping> {
    let via = args
        .via
        .as_deref()
        .ok_or_else(|| CliError::Usage("--via is required".into()))?;
    let phase = || -> Vec<&'static str> { PHASE8.to_vec() };
    Ok(match via {
        "ks" => {
            let dv: DefiningVector = args.defining_vector.as_deref().unwrap_or("+k").parse()?;
            Mapping {
                input: phase(),
                output: [&CART3[..], &["real_defect"]].concat(),
                apply: Box::new(move |v| {
                    let img = ks_map(&PhasePoint8::from_slice(v), dv)?;
                    let mut out = img.phase().to_array().to_vec();
                    out.push(img.real_defect);
                    Ok(out)
                }),
            }
        }
        "ks-inverse" => {
            let gauge = finite("gauge", args.gauge)?.unwrap_or(0.0);
            Mapping {
                input: CART3.to_vec(),
                output: phase(),
                apply: Box::new(move |v| {
                    Ok(ks_preimage([v[0], v[1], v[2]], [v[3], v[4], v[5]], gauge)?
                        .to_array()
                        .to_vec())
                }),
            }
        }
        "lc" => {
            let variant: LcVariant = args.variant.as_deref().unwrap_or("1").parse()?;
            Mapping {
                input: vec!["q1", "q2", "p1", "p2"],
                output: vec!["x1", "x2", "y1", "y2"],
                apply: Box::new(move |v| {
                    let (x, y) = lc_map([v[0], v[1]], [v[2], v[3]], variant)?;
                    Ok(vec![x[0], x[1], y[0], y[1]])
                }),
            }
        }
        "euler" => Mapping {
            input: phase(),
            output: EulerChart::HEADER.to_vec(),
            apply: Box::new(|v| Ok(phase_to_euler(&PhasePoint8::from_slice(v))?.to_array().to_vec())),
        },
        "euler-inverse" => Mapping {
            input: EulerChart::HEADER.to_vec(),
            output: phase(),
            apply: Box::new(|v| Ok(euler_to_phase(&EulerChart::from_slice(v))?.to_array().to_vec())),
        },
        "andoyer" => {
            let conv = match args.andoyer.as_deref().unwrap_or("calibrated") {
                "calibrated" => AndoyerConvention::Calibrated,
                "printed" => AndoyerConvention::Printed,
                other => return Err(CliError::Usage(format!("unknown Andoyer construction `{other}`"))),
            };
            Mapping {
                input: AndoyerChart::HEADER.to_vec(),
                output: phase(),
                apply: Box::new(move |v| {
                    Ok(andoyer_to_phase(&AndoyerChart::from_slice(v), conv)?
                        .to_array()
                        .to_vec())
                }),
            }
        }
        "spherical" => Mapping {
            input: SPHERICAL.to_vec(),
            output: CART3.to_vec(),
            apply: Box::new(|v| {
                let c = SphericalChart {
                    rho: v[0],
                    theta: v[1],
                    phi: v[2],
                    p_rho: v[3],
                    p_theta: v[4],
                    p_phi: v[5],
                };
                Ok(spherical_to_cartesian(&c)?.to_array().to_vec())
            }),
        },
        "polar" => Mapping {
            input: vec!["rho", "mu", "P", "M"],
            output: vec!["x1", "x2", "y1", "y2"],
            apply: Box::new(|v| {
                let p = polar_to_cartesian2(v[0], v[1], v[2], v[3])?;
                Ok(vec![p.x[0], p.x[1], p.y[0], p.y[1]])
            }),
        },
        other => return Err(CliError::Usage(format!("unknown map `{other}`"))),
    })
}

fn cmd_map(args: MapArgs, print: bool) -> CliResult<i32> {
    let m = mapping(&args)?;
    if print {
        return print_config("map", &args);
    }
    let rows: Vec<(usize, CliResult<Vec<f64>>)> = match (&args.point, &args.input) {
        (Some(p), None) => vec![(0, parse_point(p, m.input.len()))],
        (None, Some(path)) => read_rows(path, &m.input)?,
        (None, None) if args.point.is_none() => {
            return Err(CliError::Usage("give --point or --input".into()));
        }
        _ => return Err(CliError::Usage("give --point or --input, not both".into())),
    };
    let results: Vec<(usize, CliResult<Vec<f64>>)> = rows
        .into_iter()
        .map(|(line, row)| (line, row.and_then(|v| (m.apply)(&v).map_err(CliError::from))))
        .collect();
    if args.point.is_some() {
        if let Some((_, Err(_))) = results.first() {
            let (_, r) = results.into_iter().next().unwrap();
            return r.map(|_| EXIT_OK);
        }
    }
    cmd_map_write(&args, &m, results)
}

fn cmd_map_write(args: &MapArgs, m: &Mapping, results: Vec<(usize, CliResult<Vec<f64>>)>) -> CliResult<i32> {
    let mut out = open_output(args.out.as_deref())?;
    let werr = |e: io::Error| CliError::Failed(e.to_string());
    writeln!(
        out,
        "# format_version={FORMAT_VERSION} via={}",
        args.via.as_deref().unwrap_or("")
    )
    .map_err(werr)?;
    let mut w = csv::Writer::from_writer(out);
    let cerr = |e: csv::Error| CliError::Failed(e.to_string());
    w.write_record(&m.output).map_err(cerr)?;
    let (mut malformed, mut domain) = (0usize, 0usize);
    for (line, result) in results {
        match result {
            Ok(values) => w.write_record(format_row(&values)).map_err(cerr)?,
            Err(e) => {
                eprintln!("line {line}: {}", e.message());
                match e {
                    CliError::Malformed(_) => malformed += 1,
                    _ => domain += 1,
                }
            }
        }
    }
    w.flush().map_err(werr)?;
    if malformed > 0 {
        Err(CliError::Malformed(format!("{malformed} malformed row(s)")))
    } else if domain > 0 {
        Err(CliError::Domain(format!("{domain} row(s) outside the domain")))
    } else {
        Ok(EXIT_OK)
    }
}

/// Reads a headed CSV; rows keep their 1-based line numbers.
fn read_rows(path: &Path, expected: &[&str]) -> CliResult<Vec<(usize, CliResult<Vec<f64>>)>> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::Failed(e.to_string()))?;
    } else {
        text = fs::read_to_string(path).map_err(io_err(path))?;
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    if header != expected {
        return Err(CliError::Malformed(format!(
            "{}: header {:?} does not match expected columns {:?}",
            path.display(),
            header,
            expected
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        match record {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line() as usize);
                let fields: Vec<&str> = r.iter().collect();
                rows.push((line, parse_point(&fields.join(","), expected.len())));
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                rows.push((line, Err(CliError::Malformed(e.to_string()))));
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- sample

fn cmd_sample(args: SampleArgs, print: bool) -> CliResult<i32> {
    let resolved = SampleArgs {
        manifold: Some(args.manifold.unwrap_or_else(|| "phase8".into())),
        count: Some(args.count.unwrap_or(10)),
        seed: Some(args.seed.unwrap_or(42)),
        out: args.out,
    };
    let manifold: Manifold = resolved.manifold.as_deref().unwrap_or("phase8").parse()?;
    if print {
        return print_config("sample", &resolved);
    }
    let rows = sampling::sample(manifold, resolved.count.unwrap_or(10), resolved.seed.unwrap_or(42));
    let mut out = open_output(resolved.out.as_deref())?;
    sampling::write_csv(manifold, &rows, &mut out)?;
    out.flush().map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- entry

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    let file = load_config(cli.config.as_deref())?;
    let print = cli.print_config;
    match cli.command {
        Command::Verify(a) => cmd_verify(a.merge(file.verify), print),
        Command::Propagate(a) => cmd_propagate(a.merge(file.propagate), print),
        Command::Map(a) => cmd_map(a.merge(file.map), print),
        Command::Sample(a) => cmd_sample(a.merge(file.sample), print),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("1, -2,3e-1", 3).unwrap(), vec![1.0, -2.0, 0.3]);
        assert!(matches!(parse_point("1,2", 3), Err(CliError::Malformed(_))));
        assert!(matches!(parse_point("1,x,3", 3), Err(CliError::Malformed(_))));
        assert!(matches!(parse_point("1,nan,3", 3), Err(CliError::Malformed(_))));
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("[sample]\nmanifold = \"xi0-zero\"\ncount = 3\nseed = 9\n").unwrap();
        let flags = SampleArgs {
            count: Some(5),
            ..Default::default()
        };
        let merged = flags.merge(file.sample);
        assert_eq!(merged.manifold.as_deref(), Some("xi0-zero"));
        assert_eq!(merged.count, Some(5));
        assert_eq!(merged.seed, Some(9));
        assert!(toml::from_str::<FileConfig>("[sample]\nbogus = 1\n").is_err());
    }

    #[test]
    fn exit_codes_follow_errors() {
        assert_eq!(CliError::from(Error::domain("q", 0.0, "x")).exit_code(), EXIT_DOMAIN);
        let collapse = Error::StepCollapse {
            s: 0.0,
            step: 0.0,
            threshold: 1.0,
        };
        assert_eq!(CliError::from(collapse).exit_code(), EXIT_COLLAPSE);
        assert_eq!(run(["ksreg", "verify", "--suite", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["ksreg", "sample", "--manifold", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["ksreg", "nonsense"]), EXIT_USAGE);
    }
}
