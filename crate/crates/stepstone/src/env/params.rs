//! Ensemble averages over the size law and the closed-form effective
//! parameters (diffusivity `sigma2` and coalescence factor `gamma`).
//!
//! For constant, iid, periodic, and finite-state Markov families the
//! brackets are computed exactly: discrete laws enumerate all neighbor
//! triples with their probabilities, the uniform family uses tensor
//! Gauss-Legendre quadrature, and periodic patterns average one period.
//! Arbitrary size fields fall back to a window average whose length is
//! recorded alongside the result.

use super::{markov_stationary, Boundary, Environment, EnvironmentSpec, Family, Migration};
use crate::error::{Error, Result};
use crate::stats::gauss_legendre;
use serde::{Deserialize, Serialize};

/// The named window functionals of the size field. Each depends on at most
/// the triple (N(x-1), N(x), N(x+1)) with the plain three-site sum N3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    /// 1/(N * T^1 N): reciprocal of the product of two adjacent sizes.
    InvPairProduct,
    /// N * N3.
    NTimesN3,
    /// N * N3^2.
    NTimesN3Sq,
    /// (N * N3)^2.
    NTimesN3AllSq,
    /// N itself.
    MeanSize,
}

impl Functional {
    pub const ALL: [Functional; 5] = [
        Functional::InvPairProduct,
        Functional::NTimesN3,
        Functional::NTimesN3Sq,
        Functional::NTimesN3AllSq,
        Functional::MeanSize,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Functional::InvPairProduct => "1/(N T1N)",
            Functional::NTimesN3 => "N N3",
            Functional::NTimesN3Sq => "N N3^2",
            Functional::NTimesN3AllSq => "(N N3)^2",
            Functional::MeanSize => "N",
        }
    }

    /// Parse a functional name. Accepts ASCII and the typeset variants
    /// (middle dots, superscripts); spacing and case are ignored.
    pub fn from_name(name: &str) -> Result<Functional> {
        let mut key = String::with_capacity(name.len());
        for ch in name.chars() {
            match ch {
                ' ' | '\t' | '*' | '\u{00b7}' => {}
                '\u{00b9}' => key.push('1'),
                '\u{00b2}' => key.push_str("^2"),
                '\u{2083}' => key.push('3'),
                c => key.push(c.to_ascii_lowercase()),
            }
        }
        match key.as_str() {
            "1/(nt1n)" => Ok(Functional::InvPairProduct),
            "nn3" => Ok(Functional::NTimesN3),
            "nn3^2" => Ok(Functional::NTimesN3Sq),
            "(nn3)^2" => Ok(Functional::NTimesN3AllSq),
            "n" => Ok(Functional::MeanSize),
            _ => Err(Error::UnknownFunctional(name.to_string())),
        }
    }

    fn eval(&self, a: f64, b: f64, c: f64) -> f64 {
        let n3 = a + b + c;
        match self {
            Functional::InvPairProduct => 1.0 / (b * c),
            Functional::NTimesN3 => b * n3,
            Functional::NTimesN3Sq => b * n3 * n3,
            Functional::NTimesN3AllSq => (b * n3) * (b * n3),
            Functional::MeanSize => b,
        }
    }
}

/// Exact ensemble mean of f(N(-1), N(0), N(1)) over the stationary law of
/// the family.
pub fn triple_mean(spec: &EnvironmentSpec, f: impl Fn(f64, f64, f64) -> f64) -> Result<f64> {
    spec.validate()?;
    match &spec.family {
        Family::Constant { size } => Ok(f(*size, *size, *size)),
        Family::IidDiscrete { values, probs } => {
            let mut acc = 0.0;
            for (i, &vi) in values.iter().enumerate() {
                for (j, &vj) in values.iter().enumerate() {
                    for (k, &vk) in values.iter().enumerate() {
                        acc += probs[i] * probs[j] * probs[k] * f(vi, vj, vk);
                    }
                }
            }
            Ok(acc)
        }
        Family::IidUniform { lo, hi } => {
            let (nodes, weights) = gauss_legendre(32);
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let xs: Vec<f64> = nodes.iter().map(|t| mid + half * t).collect();
            let mut acc = 0.0;
            for (i, &xi) in xs.iter().enumerate() {
                for (j, &xj) in xs.iter().enumerate() {
                    let wij = weights[i] * weights[j];
                    for (k, &xk) in xs.iter().enumerate() {
                        acc += wij * weights[k] * f(xi, xj, xk);
                    }
                }
            }
            // Weights on [-1,1] sum to 2 per axis; divide by 2^3 to get a mean.
            Ok(acc / 8.0)
        }
        Family::Periodic { pattern } => {
            let p = pattern.len();
            let mut acc = crate::stats::KahanSum::default();
            for i in 0..p {
                acc.add(f(pattern[(i + p - 1) % p], pattern[i], pattern[(i + 1) % p]));
            }
            Ok(acc.value() / p as f64)
        }
        Family::MarkovChain { states, rows } => {
            let rho = markov_stationary(rows)?;
            let mut acc = 0.0;
            for (i, &si) in states.iter().enumerate() {
                for (j, &sj) in states.iter().enumerate() {
                    let pij = rho[i] * rows[i][j];
                    if pij == 0.0 {
                        continue;
                    }
                    for (k, &sk) in states.iter().enumerate() {
                        acc += pij * rows[j][k] * f(si, sj, sk);
                    }
                }
            }
            Ok(acc)
        }
    }
}

/// Exact ensemble mean of f(N(0), N(1)) over the stationary pair law.
pub fn pair_mean(spec: &EnvironmentSpec, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    triple_mean(spec, |_a, b, c| f(b, c))
}

/// Spatial window mean of f over the triples of an explicit size field.
/// Rings wrap; segments average interior sites only.
pub fn window_triple_mean(env: &Environment, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let l = env.len();
    let mut acc = crate::stats::KahanSum::default();
    match env.boundary() {
        Boundary::Ring => {
            for x in 0..l {
                let (a, b, c) = env.triple_wrapped(x as i64);
                acc.add(f(a, b, c));
            }
            acc.value() / l as f64
        }
        Boundary::Segment => {
            let s = env.sizes();
            for x in 1..l - 1 {
                acc.add(f(s[x - 1], s[x], s[x + 1]));
            }
            acc.value() / (l - 2) as f64
        }
    }
}

/// Spatial window mean of f over adjacent pairs of an explicit size field.
pub fn window_pair_mean(env: &Environment, f: impl Fn(f64, f64) -> f64) -> f64 {
    window_triple_mean(env, |_a, b, c| f(b, c))
}

/// Ensemble average of a named functional. Exact for every supported
/// family; uses the plain three-site sum N3 = N(-1)+N(0)+N(1).
pub fn ensemble_average(spec: &EnvironmentSpec, functional: Functional) -> Result<f64> {
    triple_mean(spec, |a, b, c| functional.eval(a, b, c))
}

/// Which averaging route produced a set of brackets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BracketPath {
    /// Exact enumeration (or quadrature) over the family's stationary law.
    Exact,
    /// Spatial average over a realized window of the given length.
    Empirical { window: usize },
}

/// Closed-form limit parameters of a size law under a migration mechanism.
///
/// The N3 inside the recorded brackets follows the migration variant: the
/// standard variant uses the plain three-site sum, the conservative variant
/// the reweighted one. `sigma2_flux` and `gamma_pi` are the same parameters
/// computed through independent identities (flux form and reversible-weight
/// form); they must agree with `sigma2` and `gamma` to 1e-12.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub migration: Migration,
    pub sigma2: f64,
    pub gamma: f64,
    /// c = <1/(N T1N)>, the reciprocal-pair bracket (also the scale slope).
    pub c: f64,
    pub mean_n_n3: f64,
    pub mean_n_n3_sq: f64,
    pub mean_n_n3_all_sq: f64,
    pub mean_n: f64,
    pub sigma2_flux: f64,
    pub gamma_pi: f64,
    pub path: BracketPath,
}

fn params_from_brackets(
    mig: Migration,
    mut bracket: impl FnMut(&dyn Fn(f64, f64, f64) -> f64) -> f64,
    path: BracketPath,
) -> Result<EffectiveParams> {
    let m_eff = mig.m_eff();
    let c = bracket(&|_a, b, cc| 1.0 / (b * cc));
    let nn3 = bracket(&|a, b, cc| b * mig.n3_of(a, b, cc));
    let nn3_sq = bracket(&|a, b, cc| {
        let n3 = mig.n3_of(a, b, cc);
        b * n3 * n3
    });
    let nn3_all_sq = bracket(&|a, b, cc| {
        let w = b * mig.n3_of(a, b, cc);
        w * w
    });
    let mean_n = bracket(&|_a, b, _c| b);

    let sigma2 = 2.0 * m_eff / (c * nn3);
    let gamma = nn3_sq / nn3_all_sq;

    // Flux identity: sigma2 = c^{-2} <h pi> with
    // h = m_eff/(N3 N^2) (1/T1N + 1/T-1N) and pi = N N3 / <N N3>.
    let h_pi = bracket(&|a, b, cc| {
        let n3 = mig.n3_of(a, b, cc);
        let h = m_eff / (n3 * b * b) * (1.0 / cc + 1.0 / a);
        h * (b * n3) / nn3
    });
    let sigma2_flux = h_pi / (c * c);

    // Reversible-weight identity: gamma = <pi^2/N> / <pi^2>.
    let pi_sq = bracket(&|a, b, cc| {
        let w = b * mig.n3_of(a, b, cc) / nn3;
        w * w
    });
    let pi_sq_over_n = bracket(&|a, b, cc| {
        let w = b * mig.n3_of(a, b, cc) / nn3;
        w * w / b
    });
    let gamma_pi = pi_sq_over_n / pi_sq;

    let params = EffectiveParams {
        migration: mig,
        sigma2,
        gamma,
        c,
        mean_n_n3: nn3,
        mean_n_n3_sq: nn3_sq,
        mean_n_n3_all_sq: nn3_all_sq,
        mean_n,
        sigma2_flux,
        gamma_pi,
        path,
    };
    params.validate()?;
    Ok(params)
}

impl EffectiveParams {
    fn validate(&self) -> Result<()> {
        let entries = [
            ("sigma2", self.sigma2),
            ("gamma", self.gamma),
            ("c", self.c),
            ("<N N3>", self.mean_n_n3),
            ("<N N3^2>", self.mean_n_n3_sq),
            ("<(N N3)^2>", self.mean_n_n3_all_sq),
            ("<N>", self.mean_n),
        ];
        for (name, v) in entries {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        let tol = 1e-12;
        if (self.sigma2_flux - self.sigma2).abs() > tol * self.sigma2.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "flux-form sigma2 {} disagrees with closed form {}",
                self.sigma2_flux, self.sigma2
            )));
        }
        if (self.gamma_pi - self.gamma).abs() > tol * self.gamma.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "pi-form gamma {} disagrees with closed form {}",
                self.gamma_pi, self.gamma
            )));
        }
        Ok(())
    }

    /// Variant-dependent upper bound: sigma2 <= 2m/3 (standard) or <= m
    /// (conservative), with equality iff the environment is constant.
    pub fn sigma2_bound(&self) -> f64 {
        match self.migration.variant {
            super::Variant::Standard => 2.0 * self.migration.m / 3.0,
            super::Variant::Conservative => self.migration.m,
        }
    }
}

/// Effective parameters from exact ensemble brackets of the family.
pub fn effective_params(spec: &EnvironmentSpec, mig: Migration) -> Result<EffectiveParams> {
    spec.validate()?;
    let mut err = None;
    let params = params_from_brackets(
        mig,
        |f| match triple_mean(spec, f) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        BracketPath::Exact,
    );
    match err {
        Some(e) => Err(e),
        None => params,
    }
}

/// Effective parameters from spatial window averages of a realized field.
/// The window length is recorded in the result's `path`.
pub fn effective_params_empirical(env: &Environment, mig: Migration) -> Result<EffectiveParams> {
    let path = BracketPath::Empirical {
        window: if env.boundary() == Boundary::Ring { env.len() } else { env.len() - 2 },
    };
    params_from_brackets(mig, |f| window_triple_mean(env, f), path)
}
