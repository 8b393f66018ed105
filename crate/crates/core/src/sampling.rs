//! Seeded samplers for phase points, constraint manifolds and chart domains.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charts::{phase_to_euler, AndoyerChart, EulerChart};
use crate::error::{Error, Result};
use crate::observables::{gradient, xi0, xi1, Convention, ObservableId, PhasePoint8};

/// Coordinates are drawn from `[-BOX, BOX]`.
pub const BOX: f64 = 2.0;
/// Points with `|q|` below this are rejected.
pub const MIN_Q: f64 = 0.1;
/// Chart points with `sin(theta)` below this are rejected.
pub const MIN_SIN_THETA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Manifold {
    Phase8,
    Xi0Zero,
    Xi1Zero,
    EulerDomain,
    AndoyerDomain,
}

impl Manifold {
    pub const ALL: [Manifold; 5] = [
        Manifold::Phase8,
        Manifold::Xi0Zero,
        Manifold::Xi1Zero,
        Manifold::EulerDomain,
        Manifold::AndoyerDomain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Manifold::Phase8 => "phase8",
            Manifold::Xi0Zero => "xi0-zero",
            Manifold::Xi1Zero => "xi1-zero",
            Manifold::EulerDomain => "euler-domain",
            Manifold::AndoyerDomain => "andoyer-domain",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            Manifold::Phase8 | Manifold::Xi0Zero | Manifold::Xi1Zero => &PHASE_HEADER,
            Manifold::EulerDomain => &EulerChart::HEADER,
            Manifold::AndoyerDomain => &AndoyerChart::HEADER,
        }
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Manifold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Manifold::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown manifold `{s}`")))
    }
}

pub const PHASE_HEADER: [&str; 8] = ["q1", "q2", "q3", "q4", "p1", "p2", "p3", "p4"];

/// Deterministic sampler; the same seed yields the same stream on every platform.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Uniform point of the box with `|q| >= MIN_Q`.
    pub fn phase_point(&mut self) -> PhasePoint8 {
        loop {
            let mut a = [0.0; 8];
            for v in &mut a {
                *v = self.rng.random_range(-BOX..BOX);
            }
            let z = PhasePoint8::from_array(a);
            if z.q.norm() >= MIN_Q {
                return z;
            }
        }
    }

    /// Phase point projected onto `Xi0 = 0` along `p`.
    pub fn xi0_zero(&mut self) -> PhasePoint8 {
        project_momentum(self.phase_point(), ObservableId::Xi0)
    }

    /// Phase point projected onto `Xi1 = 0` along `p`.
    pub fn xi1_zero(&mut self) -> PhasePoint8 {
        project_momentum(self.phase_point(), ObservableId::Xi1)
    }

    /// Euler chart of a phase point, away from the exclusion manifolds.
    pub fn euler_chart(&mut self) -> EulerChart {
        loop {
            let z = self.phase_point();
            if let Ok(c) = phase_to_euler(&z) {
                if c.theta.sin() >= MIN_SIN_THETA {
                    return c;
                }
            }
        }
    }

    /// Admissible Andoyer chart with `M > 0`, `|N| < M`, `|Lambda| < M`.
    ///
    /// The bounds on `N` and `Lambda` stop short of `M` since the chart
    /// degenerates there.
    pub fn andoyer_chart(&mut self) -> AndoyerChart {
        let tau = std::f64::consts::TAU;
        let m = self.uniform(MIN_Q, BOX);
        AndoyerChart {
            rho: self.uniform(MIN_Q, BOX),
            lambda: self.uniform(0.0, tau),
            mu_angle: self.uniform(0.0, tau),
            nu: self.uniform(0.0, tau),
            p_rho: self.uniform(-BOX, BOX),
            p_lambda: m * self.uniform(-0.95, 0.95),
            p_mu: m,
            p_nu: m * self.uniform(-0.95, 0.95),
        }
    }

    pub fn row(&mut self, manifold: Manifold) -> [f64; 8] {
        match manifold {
            Manifold::Phase8 => self.phase_point().to_array(),
            Manifold::Xi0Zero => self.xi0_zero().to_array(),
            Manifold::Xi1Zero => self.xi1_zero().to_array(),
            Manifold::EulerDomain => self.euler_chart().to_array(),
            Manifold::AndoyerDomain => self.andoyer_chart().to_array(),
        }
    }
}

/// Removes the component of `p` along the momentum gradient of a bilinear
/// function, which is linear in `p` with gradient `|q|`-sized.
fn project_momentum(z: PhasePoint8, id: ObservableId) -> PhasePoint8 {
    let value = match id {
        ObservableId::Xi0 => xi0(&z),
        _ => xi1(&z),
    };
    let g = gradient(id, Convention::Printed, &z);
    let gp: Vec<f64> = g[4..].to_vec();
    let n2: f64 = gp.iter().map(|v| v * v).sum();
    let mut a = z.to_array();
    for k in 0..4 {
        a[4 + k] -= value / n2 * gp[k];
    }
    PhasePoint8::from_array(a)
}

/// `count` rows of `manifold` from `seed`.
pub fn sample(manifold: Manifold, count: usize, seed: u64) -> Vec<[f64; 8]> {
    let mut s = Sampler::new(seed);
    (0..count).map(|_| s.row(manifold)).collect()
}

/// Writes samples as CSV with a version comment and header row.
pub fn write_csv<W: Write>(manifold: Manifold, rows: &[[f64; 8]], w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("write failed: {e}"));
    let mut w = w;
    writeln!(
        w,
        "# format_version={} manifold={manifold}",
        crate::flow::FORMAT_VERSION
    )
    .map_err(io)?;
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Config(format!("write failed: {e}"));
    out.write_record(manifold.header()).map_err(csv_err)?;
    for r in rows {
        out.write_record(r.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    out.flush().map_err(io)
}
