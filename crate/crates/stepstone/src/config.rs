//! Line-oriented experiment configuration.
//!
//! The format is `key = value` entries grouped under `[section]` headers,
//! with `#` comments. There is no nesting. Unknown sections and keys are
//! rejected with their line number, so a typo can never silently fall back
//! to a default. Every field has a documented default; the only required
//! entry is the top-level `kind`.
//!
//! ```text
//! kind = duality
//!
//! [environment]
//! family = iid-discrete      # constant | iid-discrete | iid-uniform | periodic | markov
//! values = 1, 2
//! probs = 0.5, 0.5
//! len = 64
//! boundary = ring            # ring | segment
//!
//! [model]
//! m = 1.0
//! variant = standard         # standard | conservative
//! lambda = auto              # auto = sqrt(n) at each scale
//!
//! [scales]
//! n = 400, 10000
//!
//! [run]
//! replicates = 400
//! seed = 1
//! out = runs
//!
//! [tolerances]
//! z_max = 3.0
//! ```

use crate::env::{Boundary, EnvironmentSpec, Family, Migration, Variant};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Which experiment battery to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    /// Effective parameters, identities, and bounds of the environment.
    Env,
    /// Forward field integrity: absorption, martingale, refinement.
    Forward,
    /// Dual walk homogenization: MSD and the meeting-time rate.
    Dual,
    /// Exact kernels: local CLT decay, Dirichlet and diagonal bounds,
    /// meeting-chain reversibility.
    Kernel,
    /// Moment duality, first and second moments.
    Duality,
    /// Rescaled coalescence CDF against the delayed-coalescence flow.
    Universality,
    /// The full verification battery at its stated scales.
    Acceptance,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Env,
        ExperimentKind::Forward,
        ExperimentKind::Dual,
        ExperimentKind::Kernel,
        ExperimentKind::Duality,
        ExperimentKind::Universality,
        ExperimentKind::Acceptance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Env => "env",
            ExperimentKind::Forward => "forward",
            ExperimentKind::Dual => "dual",
            ExperimentKind::Kernel => "kernel",
            ExperimentKind::Duality => "duality",
            ExperimentKind::Universality => "universality",
            ExperimentKind::Acceptance => "acceptance",
        }
    }

    pub fn parse(s: &str) -> Option<ExperimentKind> {
        Self::ALL.iter().copied().find(|k| k.as_str() == s)
    }
}

/// Pass/fail thresholds, all overridable from the `[tolerances]` section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Duality score cutoff: |z| must not exceed this.
    pub z_max: f64,
    /// Relative error allowed on MSD/t against the closed-form slope.
    pub msd_rel: f64,
    /// Relative error allowed on the meeting-rate estimate.
    pub gamma_rel: f64,
    /// Significance level of the distribution-free CDF bands.
    pub dkw_alpha: f64,
    /// Absolute residual allowed on exact algebraic identities.
    pub identity_abs: f64,
    /// Detailed-balance residual allowed on the meeting chain.
    pub db_residual: f64,
    /// Sup-norm error allowed for the local CLT at the largest scale.
    pub lclt_sup: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            z_max: 3.0,
            msd_rel: 0.05,
            gamma_rel: 0.02,
            dkw_alpha: 0.01,
            identity_abs: 1e-12,
            db_residual: 1e-8,
            lclt_sup: 0.05,
        }
    }
}

/// A fully validated experiment description. Everything a run needs is
/// here plus the master seed, so a run is reproducible from this value
/// alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub env: EnvironmentSpec,
    pub migration: Migration,
    /// Explicit sampling-rate scale; `None` means sqrt(n) at each scale.
    pub lambda: Option<f64>,
    /// Diffusive scales n to probe, increasing.
    pub scales: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub out: String,
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    /// The documented defaults: the fair two-size benchmark on a ring of
    /// 64 colonies, m = 1 standard migration, lambda = sqrt(n), one scale
    /// n = 400, 400 replicates, seed 1, output under `runs/`.
    pub fn default_for(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            env: EnvironmentSpec::new(
                Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
                2.0,
                64,
                Boundary::Ring,
            )
            .expect("default spec is valid"),
            migration: Migration::standard(1.0).expect("m = 1 is valid"),
            lambda: None,
            scales: vec![400.0],
            replicates: 400,
            seed: 1,
            out: "runs".into(),
            tolerances: Tolerances::default(),
        }
    }

    /// The lambda used at scale n: the explicit override, else sqrt(n).
    pub fn lambda_at(&self, n: f64) -> f64 {
        self.lambda.unwrap_or_else(|| n.sqrt())
    }

    /// Render in the same line-oriented format `parse_config` reads, with
    /// every default spelled out. Parsing the result reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind.as_str());
        let _ = writeln!(s, "\n[environment]");
        match &self.env.family {
            Family::Constant { size } => {
                let _ = writeln!(s, "family = constant\nsize = {size}");
            }
            Family::IidDiscrete { values, probs } => {
                let _ = writeln!(s, "family = iid-discrete");
                let _ = writeln!(s, "values = {}", join(values));
                let _ = writeln!(s, "probs = {}", join(probs));
            }
            Family::IidUniform { lo, hi } => {
                let _ = writeln!(s, "family = iid-uniform\nlo = {lo}\nhi = {hi}");
            }
            Family::Periodic { pattern } => {
                let _ = writeln!(s, "family = periodic\npattern = {}", join(pattern));
            }
            Family::MarkovChain { states, rows } => {
                let _ = writeln!(s, "family = markov\nstates = {}", join(states));
                let rows: Vec<String> = rows.iter().map(|r| join(r)).collect();
                let _ = writeln!(s, "rows = {}", rows.join("; "));
            }
        }
        let _ = writeln!(s, "k = {}", self.env.k);
        let _ = writeln!(s, "len = {}", self.env.len);
        let _ = writeln!(
            s,
            "boundary = {}",
            match self.env.boundary {
                Boundary::Ring => "ring",
                Boundary::Segment => "segment",
            }
        );
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "m = {}", self.migration.m);
        let _ = writeln!(
            s,
            "variant = {}",
            match self.migration.variant {
                Variant::Standard => "standard",
                Variant::Conservative => "conservative",
            }
        );
        match self.lambda {
            Some(l) => {
                let _ = writeln!(s, "lambda = {l}");
            }
            None => {
                let _ = writeln!(s, "lambda = auto");
            }
        }
        let _ = writeln!(s, "\n[scales]");
        let _ = writeln!(s, "n = {}", join(&self.scales));
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "replicates = {}", self.replicates);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out);
        let _ = writeln!(s, "\n[tolerances]");
        let t = &self.tolerances;
        let _ = writeln!(s, "z_max = {}", t.z_max);
        let _ = writeln!(s, "msd_rel = {}", t.msd_rel);
        let _ = writeln!(s, "gamma_rel = {}", t.gamma_rel);
        let _ = writeln!(s, "dkw_alpha = {}", t.dkw_alpha);
        let _ = writeln!(s, "identity_abs = {}", t.identity_abs);
        let _ = writeln!(s, "db_residual = {}", t.db_residual);
        let _ = writeln!(s, "lclt_sup = {}", t.lclt_sup);
        s
    }

    /// Validate every cross-field precondition the modules will rely on.
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidParams(format!("lambda = {l} must be positive")));
            }
        }
        if self.scales.is_empty() {
            return Err(Error::InvalidParams("scale list is empty".into()));
        }
        for w in self.scales.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidParams(format!(
                    "scales must increase: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !(self.scales[0] >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "scale n = {} must be >= 1",
                self.scales[0]
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParams("replicates must be positive".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("z_max", t.z_max),
            ("msd_rel", t.msd_rel),
            ("gamma_rel", t.gamma_rel),
            ("identity_abs", t.identity_abs),
            ("db_residual", t.db_residual),
            ("lclt_sup", t.lclt_sup),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        if !(t.dkw_alpha > 0.0 && t.dkw_alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "dkw_alpha = {} must lie in (0, 1)",
                t.dkw_alpha
            )));
        }
        Ok(())
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

/// Read and strictly parse a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// One `key = value` occurrence with its provenance.
struct Entry {
    line: usize,
    value: String,
}

/// The raw key-value store: section -> key -> entry, duplicates rejected.
struct RawConfig {
    entries: std::collections::BTreeMap<(String, String), Entry>,
}

impl RawConfig {
    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }
}

const SECTIONS: [&str; 5] = ["environment", "model", "scales", "run", "tolerances"];

fn scan(text: &str) -> Result<RawConfig> {
    let mut entries = std::collections::BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(Error::Config { line, msg: format!("unterminated section: {raw}") });
            };
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown section [{name}]; expected one of {SECTIONS:?}"),
                });
            }
            section = name.to_string();
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config { line, msg: format!("expected `key = value`: {raw}") });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config { line, msg: "empty key".into() });
        }
        let slot = (section.clone(), key.clone());
        if let Some(prev) = entries.get(&slot) {
            let Entry { line: prev_line, .. } = prev;
            return Err(Error::Config {
                line,
                msg: format!("duplicate key `{key}` (first set on line {prev_line})"),
            });
        }
        entries.insert(slot, Entry { line, value });
    }
    Ok(RawConfig { entries })
}

fn bad(line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config { line, msg: format!("field {key}: {msg}") }
}

fn parse_f64(e: &Entry, key: &str) -> Result<f64> {
    e.value.parse().map_err(|_| bad(e.line, key, format_args!("not a number: {}", e.value)))
}

fn parse_usize(e: &Entry, key: &str) -> Result<usize> {
    e.value.parse().map_err(|_| bad(e.line, key, format_args!("not an integer: {}", e.value)))
}

fn parse_list(e: &Entry, key: &str) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| bad(e.line, key, format_args!("not a number: {}", v.trim())))
        })
        .collect()
}

/// Strictly parse configuration text: unknown keys, duplicate keys,
/// malformed values, and invariant violations are all errors carrying the
/// offending line.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut raw = scan(text)?;

    let kind_entry = raw
        .take("", "kind")
        .ok_or_else(|| Error::Config { line: 0, msg: "missing required key `kind`".into() })?;
    let kind = ExperimentKind::parse(&kind_entry.value).ok_or_else(|| {
        bad(
            kind_entry.line,
            "kind",
            format_args!(
                "unknown experiment kind `{}`; expected one of {:?}",
                kind_entry.value,
                ExperimentKind::ALL.map(|k| k.as_str())
            ),
        )
    })?;

    let mut config = ExperimentConfig::default_for(kind);

    // [environment]
    let family_entry = raw.take("environment", "family");
    let family_line = family_entry.as_ref().map(|e| e.line).unwrap_or(0);
    if let Some(e) = family_entry {
        config.env.family = match e.value.as_str() {
            "constant" => {
                let size = raw
                    .take("environment", "size")
                    .ok_or_else(|| bad(e.line, "family", "constant requires `size`"))?;
                Family::Constant { size: parse_f64(&size, "size")? }
            }
            "iid-discrete" => {
                let values = raw
                    .take("environment", "values")
                    .ok_or_else(|| bad(e.line, "family", "iid-discrete requires `values`"))?;
                let probs = raw
                    .take("environment", "probs")
                    .ok_or_else(|| bad(e.line, "family", "iid-discrete requires `probs`"))?;
                Family::IidDiscrete {
                    values: parse_list(&values, "values")?,
                    probs: parse_list(&probs, "probs")?,
                }
            }
            "iid-uniform" => {
                let lo = raw
                    .take("environment", "lo")
                    .ok_or_else(|| bad(e.line, "family", "iid-uniform requires `lo`"))?;
                let hi = raw
                    .take("environment", "hi")
                    .ok_or_else(|| bad(e.line, "family", "iid-uniform requires `hi`"))?;
                Family::IidUniform { lo: parse_f64(&lo, "lo")?, hi: parse_f64(&hi, "hi")? }
            }
            "periodic" => {
                let pattern = raw
                    .take("environment", "pattern")
                    .ok_or_else(|| bad(e.line, "family", "periodic requires `pattern`"))?;
                Family::Periodic { pattern: parse_list(&pattern, "pattern")? }
            }
            "markov" => {
                let states = raw
                    .take("environment", "states")
                    .ok_or_else(|| bad(e.line, "family", "markov requires `states`"))?;
                let rows = raw
                    .take("environment", "rows")
                    .ok_or_else(|| bad(e.line, "family", "markov requires `rows`"))?;
                let parsed_rows: Vec<Vec<f64>> = rows
                    .value
                    .split(';')
                    .map(|chunk| {
                        chunk
                            .split(',')
                            .map(|v| {
                                v.trim().parse().map_err(|_| {
                                    bad(rows.line, "rows", format_args!("not a number: {v}"))
                                })
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?;
                Family::MarkovChain { states: parse_list(&states, "states")?, rows: parsed_rows }
            }
            other => {
                return Err(bad(e.line, "family", format_args!("unknown family `{other}`")));
            }
        };
    }
    if let Some(e) = raw.take("environment", "k") {
        config.env.k = parse_f64(&e, "k")?;
    } else {
        config.env.k = implied_k(&config.env.family)
            .ok_or_else(|| bad(family_line, "k", "this family needs an explicit bound `k`"))?;
    }
    if let Some(e) = raw.take("environment", "len") {
        config.env.len = parse_usize(&e, "len")?;
    }
    if let Some(e) = raw.take("environment", "boundary") {
        config.env.boundary = match e.value.as_str() {
            "ring" => Boundary::Ring,
            "segment" => Boundary::Segment,
            other => {
                return Err(bad(
                    e.line,
                    "boundary",
                    format_args!("unknown boundary `{other}`; expected ring or segment"),
                ))
            }
        };
    }

    // [model]
    let mut m = config.migration.m;
    let mut variant = config.migration.variant;
    let mut m_line = 0;
    if let Some(e) = raw.take("model", "m") {
        m = parse_f64(&e, "m")?;
        m_line = e.line;
    }
    if let Some(e) = raw.take("model", "variant") {
        variant = match e.value.as_str() {
            "standard" => Variant::Standard,
            "conservative" => Variant::Conservative,
            other => {
                return Err(bad(e.line, "variant", format_args!("unknown variant `{other}`")))
            }
        };
    }
    config.migration =
        Migration::new(m, variant).map_err(|err| bad(m_line, "m", err))?;
    if let Some(e) = raw.take("model", "lambda") {
        config.lambda = if e.value == "auto" {
            None
        } else {
            let l = parse_f64(&e, "lambda")?;
            if !(l > 0.0) || !l.is_finite() {
                return Err(bad(e.line, "lambda", "must be positive (or `auto`)"));
            }
            Some(l)
        };
    }

    // [scales]
    if let Some(e) = raw.take("scales", "n") {
        config.scales = parse_list(&e, "n")?;
    }

    // [run]
    if let Some(e) = raw.take("run", "replicates") {
        config.replicates = parse_usize(&e, "replicates")?;
    }
    if let Some(e) = raw.take("run", "seed") {
        config.seed = e
            .value
            .parse()
            .map_err(|_| bad(e.line, "seed", format_args!("not a u64: {}", e.value)))?;
    }
    if let Some(e) = raw.take("run", "out") {
        config.out = e.value;
    }

    // [tolerances]
    if let Some(e) = raw.take("tolerances", "z_max") {
        config.tolerances.z_max = parse_f64(&e, "z_max")?;
    }
    if let Some(e) = raw.take("tolerances", "msd_rel") {
        config.tolerances.msd_rel = parse_f64(&e, "msd_rel")?;
    }
    if let Some(e) = raw.take("tolerances", "gamma_rel") {
        config.tolerances.gamma_rel = parse_f64(&e, "gamma_rel")?;
    }
    if let Some(e) = raw.take("tolerances", "dkw_alpha") {
        config.tolerances.dkw_alpha = parse_f64(&e, "dkw_alpha")?;
    }
    if let Some(e) = raw.take("tolerances", "identity_abs") {
        config.tolerances.identity_abs = parse_f64(&e, "identity_abs")?;
    }
    if let Some(e) = raw.take("tolerances", "db_residual") {
        config.tolerances.db_residual = parse_f64(&e, "db_residual")?;
    }
    if let Some(e) = raw.take("tolerances", "lclt_sup") {
        config.tolerances.lclt_sup = parse_f64(&e, "lclt_sup")?;
    }

    // anything left over was never consumed: an unknown key for its section
    if let Some(((section, key), entry)) = raw.entries.pop_first() {
        return Err(Error::UnknownKey { line: entry.line, section, key });
    }

    config.validate().map_err(|err| match err {
        e @ (Error::Config { .. } | Error::UnknownKey { .. }) => e,
        other => Error::Config { line: 0, msg: other.to_string() },
    })?;
    Ok(config)
}

/// The tightest ellipticity bound implied by an enumerable family, when
/// one can be read off the parameters directly.
fn implied_k(family: &Family) -> Option<f64> {
    let bound = |vals: &[f64]| -> Option<f64> {
        let mut k: f64 = 1.0;
        for &v in vals {
            if !(v > 0.0) {
                return None;
            }
            k = k.max(v).max(1.0 / v);
        }
        Some(k)
    };
    match family {
        Family::Constant { size } => bound(&[*size]),
        Family::IidDiscrete { values, .. } => bound(values),
        Family::IidUniform { lo, hi } => bound(&[*lo, *hi]),
        Family::Periodic { pattern } => bound(pattern),
        Family::MarkovChain { states, .. } => bound(states),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_for_every_kind() {
        for kind in ExperimentKind::ALL {
            let config = ExperimentConfig::default_for(kind);
            let text = config.to_config_string();
            let parsed = parse_config_str(&text).expect("canonical text parses");
            assert_eq!(parsed, config, "round trip for {}", kind.as_str());
        }
    }

    #[test]
    fn a_full_custom_config_round_trips() {
        let text = "\
kind = kernel

[environment]
family = markov
states = 1, 3
rows = 0.9, 0.1; 0.4, 0.6
k = 3
len = 48
boundary = segment

[model]
m = 0.7
variant = conservative
lambda = 12.5

[scales]
n = 100, 400, 1600

[run]
replicates = 250
seed = 99
out = tmp/kernel-run

[tolerances]
z_max = 2.5
msd_rel = 0.04
gamma_rel = 0.03
dkw_alpha = 0.05
identity_abs = 1e-11
db_residual = 1e-7
lclt_sup = 0.04
";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.kind, ExperimentKind::Kernel);
        assert_eq!(
            config.env.family,
            Family::MarkovChain {
                states: vec![1.0, 3.0],
                rows: vec![vec![0.9, 0.1], vec![0.4, 0.6]],
            }
        );
        assert_eq!(config.env.boundary, Boundary::Segment);
        assert_eq!(config.migration, Migration::conservative(0.7).unwrap());
        assert_eq!(config.lambda, Some(12.5));
        assert_eq!(config.scales, vec![100.0, 400.0, 1600.0]);
        assert_eq!(config.replicates, 250);
        assert_eq!(config.seed, 99);
        assert_eq!(config.out, "tmp/kernel-run");
        assert_eq!(config.tolerances.dkw_alpha, 0.05);

        let echoed = parse_config_str(&config.to_config_string()).unwrap();
        assert_eq!(echoed, config);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# leading comment\n\nkind = env   # trailing comment\n\n[run]\nseed = 7\n";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.kind, ExperimentKind::Env);
        assert_eq!(config.seed, 7);
        assert_eq!(config.replicates, 400, "untouched fields keep their defaults");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        let text = "kind = env\n\n[run]\nseed = 1\nreplicas = 10\n";
        let err = parse_config_str(text).unwrap_err();
        match err {
            Error::UnknownKey { line, section, key } => {
                assert_eq!(line, 5);
                assert_eq!(section, "run");
                assert_eq!(key, "replicas");
            }
            other => panic!("expected UnknownKey, got {other}"),
        }
    }

    #[test]
    fn unknown_sections_and_malformed_lines_carry_line_numbers() {
        let err = parse_config_str("kind = env\n[outputs]\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("unknown section"), "{msg}");
            }
            other => panic!("expected Config, got {other}"),
        }

        let err = parse_config_str("kind = env\n[run]\nseed 1\n").unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("key = value"), "{msg}");
            }
            other => panic!("expected Config, got {other}"),
        }
    }

    #[test]
    fn duplicate_keys_are_rejected_and_name_the_first_occurrence() {
        let text = "kind = env\n[run]\nseed = 1\nseed = 2\n";
        let err = parse_config_str(text).unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("duplicate key `seed`"), "{msg}");
                assert!(msg.contains("line 3"), "{msg}");
            }
            other => panic!("expected Config, got {other}"),
        }
    }

    #[test]
    fn missing_kind_is_a_clear_error() {
        let err = parse_config_str("[run]\nseed = 1\n").unwrap_err();
        assert!(err.to_string().contains("missing required key `kind`"), "{err}");
    }

    #[test]
    fn negative_migration_rate_is_rejected_on_its_line() {
        let text = "kind = env\n\n[model]\nm = -1\n";
        let err = parse_config_str(text).unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("m must be positive"), "{msg}");
            }
            other => panic!("expected Config, got {other}"),
        }
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let bad_scales = "kind = dual\n[scales]\nn = 400, 100\n";
        let err = parse_config_str(bad_scales).unwrap_err();
        assert!(err.to_string().contains("scales must increase"), "{err}");

        let bad_alpha = "kind = dual\n[tolerances]\ndkw_alpha = 1.5\n";
        let err = parse_config_str(bad_alpha).unwrap_err();
        assert!(err.to_string().contains("dkw_alpha"), "{err}");

        let bad_lambda = "kind = dual\n[model]\nlambda = 0\n";
        let err = parse_config_str(bad_lambda).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");

        let bad_probs = "kind = dual\n[environment]\nfamily = iid-discrete\nvalues = 1, 2\nprobs = 0.9, 0.2\n";
        assert!(parse_config_str(bad_probs).is_err(), "probs must sum to one");
    }

    #[test]
    fn the_ellipticity_bound_is_implied_when_omitted() {
        let text = "kind = env\n[environment]\nfamily = iid-discrete\nvalues = 0.5, 4\nprobs = 0.5, 0.5\n";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.env.k, 4.0, "max of v and 1/v over the atoms");

        let text = "kind = env\n[environment]\nfamily = constant\nsize = 0.25\n";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.env.k, 4.0);
    }

    #[test]
    fn lambda_auto_means_sqrt_of_scale() {
        let config = parse_config_str("kind = dual\n[model]\nlambda = auto\n").unwrap();
        assert_eq!(config.lambda, None);
        assert_eq!(config.lambda_at(400.0), 20.0);

        let config = parse_config_str("kind = dual\n[model]\nlambda = 5\n").unwrap();
        assert_eq!(config.lambda_at(400.0), 5.0);
    }

    #[test]
    fn config_file_parsing_matches_string_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        let config = ExperimentConfig::default_for(ExperimentKind::Duality);
        std::fs::write(&path, config.to_config_string()).unwrap();
        assert_eq!(parse_config(&path).unwrap(), config);
    }
}
