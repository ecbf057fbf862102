//! Quenched environments: colony-size fields on a finite window or ring,
//! their reversible weights, ensemble averages, effective parameters, the
//! scale function, and the size-bias coupling.
//!
//! An environment is an immutable array of positive sizes `N(x)` with a
//! uniform ellipticity bound `1/K <= N(x) <= K`. All derived quantities are
//! window-normalized: the reversible weight field `pi` has window mean 1.

mod coupling;
mod params;
mod scale;
mod window;

pub use coupling::{coupling_check, CouplingReport};
pub use params::{
    effective_params, effective_params_empirical, ensemble_average, pair_mean, triple_mean,
    window_pair_mean, window_triple_mean, BracketPath, EffectiveParams, Functional,
};
pub use scale::{scale_function, ScaleFunction};
pub use window::pi_window_average;

use crate::error::{Error, Result};
use crate::seeds::rng_from;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Colony-size distribution family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// Every colony has the same size.
    Constant { size: f64 },
    /// Sizes drawn independently from a finite value set.
    IidDiscrete { values: Vec<f64>, probs: Vec<f64> },
    /// Sizes drawn independently and uniformly from [lo, hi].
    IidUniform { lo: f64, hi: f64 },
    /// Deterministic tiling of a fixed pattern.
    Periodic { pattern: Vec<f64> },
    /// Sizes follow a stationary finite-state Markov chain along the line.
    MarkovChain { states: Vec<f64>, rows: Vec<Vec<f64>> },
}

/// Window boundary handling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Periodic wrap; the default for exact computations.
    Ring,
    /// Hard edges; walks reflect and touching sites are flagged.
    Segment,
}

/// Migration mechanism variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Weight each neighbor by its size over the plain three-site sum.
    Standard,
    /// Mass-conserving weights m/2, 1-m, m/2 in the three-site sum.
    Conservative,
}

/// Migration rate and variant. `m` must be positive; the conservative
/// variant additionally requires `m <= 1` so the center weight stays
/// nonnegative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Migration {
    pub m: f64,
    pub variant: Variant,
}

impl Migration {
    pub fn new(m: f64, variant: Variant) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParams(format!("m must be positive, got {m}")));
        }
        if variant == Variant::Conservative && m > 1.0 {
            return Err(Error::InvalidParams(format!(
                "conservative variant requires m <= 1, got {m}"
            )));
        }
        Ok(Migration { m, variant })
    }

    pub fn standard(m: f64) -> Result<Self> {
        Self::new(m, Variant::Standard)
    }

    pub fn conservative(m: f64) -> Result<Self> {
        Self::new(m, Variant::Conservative)
    }

    /// Effective rate in front of the drift and the walk rates: the
    /// conservative mechanism behaves like the standard one at rate m/2.
    pub fn m_eff(&self) -> f64 {
        match self.variant {
            Variant::Standard => self.m,
            Variant::Conservative => 0.5 * self.m,
        }
    }

    /// Three-site combination for neighbor triple (a, b, c).
    pub fn n3_of(&self, a: f64, b: f64, c: f64) -> f64 {
        match self.variant {
            Variant::Standard => a + b + c,
            Variant::Conservative => 0.5 * self.m * (a + c) + (1.0 - self.m) * b,
        }
    }

    /// Upper bound on the diffusivity sigma^2 over all environments
    /// (attained by the constant environment): 2m/3 for the standard
    /// variant, m for the conservative one. Used for window sizing.
    pub fn sigma2_upper(&self) -> f64 {
        match self.variant {
            Variant::Standard => 2.0 * self.m / 3.0,
            Variant::Conservative => self.m,
        }
    }
}

/// Specification of an environment draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub family: Family,
    /// Ellipticity bound: all sizes lie in [1/k, k].
    pub k: f64,
    /// Window length in colonies.
    pub len: usize,
    pub boundary: Boundary,
}

impl EnvironmentSpec {
    pub fn new(family: Family, k: f64, len: usize, boundary: Boundary) -> Result<Self> {
        let spec = EnvironmentSpec { family, k, len, boundary };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 1.0) || !self.k.is_finite() {
            return Err(Error::InvalidSpec(format!("K = {} must satisfy K >= 1", self.k)));
        }
        if self.len < 3 {
            return Err(Error::InvalidSpec(format!("window length {} < 3", self.len)));
        }
        let check_value = |v: f64| -> Result<()> {
            if !v.is_finite() || v < 1.0 / self.k - 1e-12 || v > self.k + 1e-12 {
                return Err(Error::Ellipticity {
                    site: -1,
                    value: v,
                    lo: 1.0 / self.k,
                    hi: self.k,
                });
            }
            Ok(())
        };
        match &self.family {
            Family::Constant { size } => check_value(*size)?,
            Family::IidDiscrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidSpec(
                        "iid-discrete needs matching nonempty values/probs".into(),
                    ));
                }
                for v in values {
                    check_value(*v)?;
                }
                if probs.iter().any(|p| *p < 0.0) {
                    return Err(Error::InvalidSpec("negative probability".into()));
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!("probabilities sum to {s}, not 1")));
                }
            }
            Family::IidUniform { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::InvalidSpec(format!("need lo < hi, got [{lo}, {hi}]")));
                }
                check_value(*lo)?;
                check_value(*hi)?;
            }
            Family::Periodic { pattern } => {
                if pattern.is_empty() {
                    return Err(Error::InvalidSpec("empty periodic pattern".into()));
                }
                for v in pattern {
                    check_value(*v)?;
                }
                if self.boundary == Boundary::Ring && self.len % pattern.len() != 0 {
                    return Err(Error::InvalidSpec(format!(
                        "ring length {} must be a multiple of the period {}",
                        self.len,
                        pattern.len()
                    )));
                }
            }
            Family::MarkovChain { states, rows } => {
                if states.is_empty() || rows.len() != states.len() {
                    return Err(Error::InvalidSpec(
                        "markov chain needs one transition row per state".into(),
                    ));
                }
                for v in states {
                    check_value(*v)?;
                }
                for row in rows {
                    if row.len() != states.len() {
                        return Err(Error::InvalidSpec("ragged transition matrix".into()));
                    }
                    if row.iter().any(|p| *p < 0.0) {
                        return Err(Error::InvalidSpec("negative transition probability".into()));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidSpec(format!("transition row sums to {s}")));
                    }
                }
                if !is_irreducible(rows) {
                    return Err(Error::InvalidSpec("markov chain is not irreducible".into()));
                }
            }
        }
        Ok(())
    }
}

/// Strong connectivity of the positive-entry digraph, by forward and
/// backward reachability from state 0.
fn is_irreducible(rows: &[Vec<f64>]) -> bool {
    let n = rows.len();
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let p = if forward { rows[i][j] } else { rows[j][i] };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    reach(true) == n && reach(false) == n
}

/// Stationary law of a validated transition matrix.
pub(crate) fn markov_stationary(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    // Solve rho (P - I) = 0 with the normalization sum(rho) = 1: transpose
    // to (P^T - I) rho = 0 and replace the last equation by the sum.
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = rows[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let rho = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidSpec("singular stationary system".into()))?;
    let rho: Vec<f64> = rho.iter().copied().collect();
    if rho.iter().any(|p| *p < -1e-12) {
        return Err(Error::InvalidSpec("stationary law has negative mass".into()));
    }
    Ok(rho.iter().map(|p| p.max(0.0)).collect())
}

/// A sampled colony-size field. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    spec: EnvironmentSpec,
    seed: u64,
    sizes: Vec<f64>,
}

/// Draw an environment. Deterministic in (spec, seed); the constant and
/// periodic families ignore the seed. Markov fields start from the
/// stationary law so the window is translation-consistent.
pub fn sample_environment(spec: &EnvironmentSpec, seed: u64) -> Result<Environment> {
    spec.validate()?;
    let l = spec.len;
    let sizes: Vec<f64> = match &spec.family {
        Family::Constant { size } => vec![*size; l],
        Family::Periodic { pattern } => (0..l).map(|i| pattern[i % pattern.len()]).collect(),
        Family::IidDiscrete { values, probs } => {
            let mut rng = rng_from(seed);
            let mut cum = Vec::with_capacity(probs.len());
            let mut acc = 0.0;
            for p in probs {
                acc += p;
                cum.push(acc);
            }
            (0..l)
                .map(|_| {
                    let u: f64 = rng.random();
                    let k = cum.partition_point(|c| *c < u).min(values.len() - 1);
                    values[k]
                })
                .collect()
        }
        Family::IidUniform { lo, hi } => {
            let mut rng = rng_from(seed);
            (0..l).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
        }
        Family::MarkovChain { states, rows } => {
            let mut rng = rng_from(seed);
            let rho = markov_stationary(rows)?;
            let draw = |cum: &[f64], u: f64| cum.partition_point(|c| *c < u).min(states.len() - 1);
            let cum_of = |ps: &[f64]| {
                let mut acc = 0.0;
                ps.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect::<Vec<f64>>()
            };
            let rho_cum = cum_of(&rho);
            let row_cums: Vec<Vec<f64>> = rows.iter().map(|r| cum_of(r)).collect();
            let mut state = draw(&rho_cum, rng.random());
            let mut out = Vec::with_capacity(l);
            out.push(states[state]);
            for _ in 1..l {
                state = draw(&row_cums[state], rng.random());
                out.push(states[state]);
            }
            out
        }
    };
    for (i, v) in sizes.iter().enumerate() {
        if !v.is_finite() || *v < 1.0 / spec.k - 1e-12 || *v > spec.k + 1e-12 {
            return Err(Error::Ellipticity {
                site: i as i64,
                value: *v,
                lo: 1.0 / spec.k,
                hi: spec.k,
            });
        }
    }
    Ok(Environment { spec: spec.clone(), seed, sizes })
}

impl Environment {
    /// Wrap an explicit size column as a ring environment. The family is
    /// recorded as the one-period tiling of the column and the ellipticity
    /// bound is the tightest K covering the data.
    pub fn from_sizes(sizes: Vec<f64>) -> Result<Environment> {
        if sizes.len() < 3 {
            return Err(Error::InvalidSpec(format!("window length {} < 3", sizes.len())));
        }
        if sizes.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidSpec("sizes must be positive reals".into()));
        }
        let k = sizes.iter().fold(1.0f64, |k, v| k.max(*v).max(1.0 / *v));
        let spec = EnvironmentSpec::new(
            Family::Periodic { pattern: sizes.clone() },
            k,
            sizes.len(),
            Boundary::Ring,
        )?;
        Ok(Environment { spec, seed: 0, sizes })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn k(&self) -> f64 {
        self.spec.k
    }

    pub fn boundary(&self) -> Boundary {
        self.spec.boundary
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// Window index for a possibly out-of-range site. Rings wrap; segments
    /// reject sites outside [0, L).
    pub fn index_of(&self, x: i64) -> Result<usize> {
        let l = self.sizes.len() as i64;
        match self.spec.boundary {
            Boundary::Ring => Ok(x.rem_euclid(l) as usize),
            Boundary::Segment => {
                if x < 0 || x >= l {
                    Err(Error::OutOfWindow { site: x, len: self.sizes.len() })
                } else {
                    Ok(x as usize)
                }
            }
        }
    }

    /// Size at a site (ring wraps).
    pub fn size(&self, x: i64) -> Result<f64> {
        Ok(self.sizes[self.index_of(x)?])
    }

    /// Size with ring semantics regardless of boundary mode; used by
    /// internal kernels that have already validated the window.
    pub(crate) fn size_wrapped(&self, x: i64) -> f64 {
        let l = self.sizes.len() as i64;
        self.sizes[x.rem_euclid(l) as usize]
    }

    /// Neighbor triple (N(x-1), N(x), N(x+1)) with ring wrap.
    pub(crate) fn triple_wrapped(&self, x: i64) -> (f64, f64, f64) {
        (self.size_wrapped(x - 1), self.size_wrapped(x), self.size_wrapped(x + 1))
    }

    /// Three-site denominator used by migration weights. Segments only
    /// define it at interior sites.
    pub fn n3(&self, x: i64, mig: Migration) -> Result<f64> {
        let l = self.sizes.len() as i64;
        match self.spec.boundary {
            Boundary::Ring => {
                let (a, b, c) = self.triple_wrapped(x.rem_euclid(l));
                Ok(mig.n3_of(a, b, c))
            }
            Boundary::Segment => {
                if x < 1 || x > l - 2 {
                    Err(Error::OutOfWindow { site: x, len: self.sizes.len() })
                } else {
                    let (a, b, c) =
                        (self.sizes[(x - 1) as usize], self.sizes[x as usize], self.sizes[(x + 1) as usize]);
                    Ok(mig.n3_of(a, b, c))
                }
            }
        }
    }

    /// Three-site denominator with the missing neighbor dropped at segment
    /// edges (reflecting treatment). Equals `n3` at interior sites.
    pub(crate) fn n3_reflecting(&self, x: i64, mig: Migration) -> f64 {
        let l = self.sizes.len() as i64;
        match self.spec.boundary {
            Boundary::Ring => {
                let (a, b, c) = self.triple_wrapped(x.rem_euclid(l));
                mig.n3_of(a, b, c)
            }
            Boundary::Segment => {
                let xi = x.clamp(0, l - 1) as usize;
                let a = if x >= 1 { self.sizes[xi - 1] } else { 0.0 };
                let c = if x <= l - 2 { self.sizes[xi + 1] } else { 0.0 };
                match mig.variant {
                    Variant::Standard => a + self.sizes[xi] + c,
                    Variant::Conservative => {
                        0.5 * mig.m * (a + c) + (1.0 - mig.m) * self.sizes[xi]
                    }
                }
            }
        }
    }

    /// Reversible weight field pi(x) = N(x) N3(x) / mean(N N3), normalized
    /// so that the window mean is exactly 1. Segment edges use the
    /// reflecting three-site sum; any positive convention there preserves
    /// detailed balance because N3 cancels from the flux.
    pub fn reversible_pi(&self, mig: Migration) -> Vec<f64> {
        let l = self.sizes.len();
        let mut w: Vec<f64> = (0..l)
            .map(|x| self.sizes[x] * self.n3_reflecting(x as i64, mig))
            .collect();
        let mean = w.iter().sum::<f64>() / l as f64;
        for v in &mut w {
            *v /= mean;
        }
        w
    }

    /// One-line header plus one decimal size per line.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "# stepstone-env family={} K={} L={} seed={} boundary={}",
            family_to_string(&self.spec.family),
            self.spec.k,
            self.spec.len,
            self.seed,
            match self.spec.boundary {
                Boundary::Ring => "ring",
                Boundary::Segment => "segment",
            }
        )?;
        for v in &self.sizes {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    /// Load either the native header format or a plain numeric column
    /// (which becomes a ring environment with inferred K).
    pub fn read_from(input: impl Read) -> Result<Environment> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let first = match lines.next() {
            Some(l) => l?,
            None => return Err(Error::EnvFormat("empty file".into())),
        };
        let mut sizes = Vec::new();
        let mut header: Option<(EnvironmentSpec, u64)> = None;
        if first.trim_start().starts_with('#') {
            header = Some(parse_header(&first)?);
        } else if !first.trim().is_empty() {
            sizes.push(parse_size(&first)?);
        }
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            sizes.push(parse_size(t)?);
        }
        match header {
            Some((spec, seed)) => {
                if sizes.len() != spec.len {
                    return Err(Error::LengthMismatch { expected: spec.len, got: sizes.len() });
                }
                let env = Environment { spec, seed, sizes };
                for (i, v) in env.sizes.iter().enumerate() {
                    if *v < 1.0 / env.spec.k - 1e-12 || *v > env.spec.k + 1e-12 {
                        return Err(Error::Ellipticity {
                            site: i as i64,
                            value: *v,
                            lo: 1.0 / env.spec.k,
                            hi: env.spec.k,
                        });
                    }
                }
                Ok(env)
            }
            None => Environment::from_sizes(sizes),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Environment> {
        Environment::read_from(std::fs::File::open(path)?)
    }
}

fn parse_size(token: &str) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::EnvFormat(format!("bad size entry `{token}`")))
}

fn list_to_string(xs: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in xs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::EnvFormat(format!("bad list entry `{t}`")))
        })
        .collect()
}

pub(crate) fn family_to_string(family: &Family) -> String {
    match family {
        Family::Constant { size } => format!("constant({size})"),
        Family::IidDiscrete { values, probs } => format!(
            "iid-discrete(values={};probs={})",
            list_to_string(values),
            list_to_string(probs)
        ),
        Family::IidUniform { lo, hi } => format!("iid-uniform({lo},{hi})"),
        Family::Periodic { pattern } => format!("periodic({})", list_to_string(pattern)),
        Family::MarkovChain { states, rows } => {
            let mut s = format!("markov(states={};rows=", list_to_string(states));
            for (i, row) in rows.iter().enumerate() {
                if i > 0 {
                    s.push('|');
                }
                s.push_str(&list_to_string(row));
            }
            s.push(')');
            s
        }
    }
}

pub(crate) fn family_from_string(s: &str) -> Result<Family> {
    let bad = |m: &str| Error::EnvFormat(format!("bad family `{s}`: {m}"));
    let (name, rest) = s
        .split_once('(')
        .ok_or_else(|| bad("missing parameter list"))?;
    let args = rest.strip_suffix(')').ok_or_else(|| bad("missing `)`"))?;
    match name {
        "constant" => Ok(Family::Constant {
            size: args.parse().map_err(|_| bad("bad size"))?,
        }),
        "iid-uniform" => {
            let (lo, hi) = args.split_once(',').ok_or_else(|| bad("need lo,hi"))?;
            Ok(Family::IidUniform {
                lo: lo.trim().parse().map_err(|_| bad("bad lo"))?,
                hi: hi.trim().parse().map_err(|_| bad("bad hi"))?,
            })
        }
        "periodic" => Ok(Family::Periodic { pattern: parse_list(args)? }),
        "iid-discrete" => {
            let mut values = None;
            let mut probs = None;
            for part in args.split(';') {
                let (k, v) = part.split_once('=').ok_or_else(|| bad("need key=value parts"))?;
                match k.trim() {
                    "values" => values = Some(parse_list(v)?),
                    "probs" => probs = Some(parse_list(v)?),
                    other => return Err(bad(&format!("unknown part `{other}`"))),
                }
            }
            Ok(Family::IidDiscrete {
                values: values.ok_or_else(|| bad("missing values"))?,
                probs: probs.ok_or_else(|| bad("missing probs"))?,
            })
        }
        "markov" => {
            let mut states = None;
            let mut rows = None;
            for part in args.split(';') {
                let (k, v) = part.split_once('=').ok_or_else(|| bad("need key=value parts"))?;
                match k.trim() {
                    "states" => states = Some(parse_list(v)?),
                    "rows" => {
                        rows = Some(
                            v.split('|').map(parse_list).collect::<Result<Vec<Vec<f64>>>>()?,
                        )
                    }
                    other => return Err(bad(&format!("unknown part `{other}`"))),
                }
            }
            Ok(Family::MarkovChain {
                states: states.ok_or_else(|| bad("missing states"))?,
                rows: rows.ok_or_else(|| bad("missing rows"))?,
            })
        }
        other => Err(bad(&format!("unknown family `{other}`"))),
    }
}

fn parse_header(line: &str) -> Result<(EnvironmentSpec, u64)> {
    let body = line.trim_start_matches('#').trim();
    let mut tokens = body.split_whitespace();
    match tokens.next() {
        Some("stepstone-env") => {}
        _ => return Err(Error::EnvFormat("header must start with `# stepstone-env`".into())),
    }
    let mut family = None;
    let mut k = None;
    let mut l = None;
    let mut seed = 0u64;
    let mut boundary = Boundary::Ring;
    for tok in tokens {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::EnvFormat(format!("bad header token `{tok}`")))?;
        match key {
            "family" => family = Some(family_from_string(val)?),
            "K" => k = Some(val.parse::<f64>().map_err(|_| Error::EnvFormat("bad K".into()))?),
            "L" => l = Some(val.parse::<usize>().map_err(|_| Error::EnvFormat("bad L".into()))?),
            "seed" => {
                seed = val.parse::<u64>().map_err(|_| Error::EnvFormat("bad seed".into()))?
            }
            "boundary" => {
                boundary = match val {
                    "ring" => Boundary::Ring,
                    "segment" => Boundary::Segment,
                    other => return Err(Error::EnvFormat(format!("bad boundary `{other}`"))),
                }
            }
            other => return Err(Error::EnvFormat(format!("unknown header key `{other}`"))),
        }
    }
    let spec = EnvironmentSpec::new(
        family.ok_or_else(|| Error::EnvFormat("missing family".into()))?,
        k.ok_or_else(|| Error::EnvFormat("missing K".into()))?,
        l.ok_or_else(|| Error::EnvFormat("missing L".into()))?,
        boundary,
    )?;
    Ok((spec, seed))
}

#[cfg(test)]
mod tests;
