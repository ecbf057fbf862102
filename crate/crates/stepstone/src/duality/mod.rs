//! Moment duality between the forward frequency field and the backward
//! coalescing walks, plus the macroscopic reference comparisons built on
//! top of it.
//!
//! First moments: one backward lineage never merges, so E[p_t(x)] equals
//! the heat kernel applied to the initial profile and the forward Monte
//! Carlo is checked against an exact curve. Second moments: two lineages
//! merge at rate 1/(lambda N) while co-located, and E[p_t(x) p_t(y)]
//! equals the expected product of the initial profile over the surviving
//! lineages; on small rings the merge-time law is computed exactly, on
//! large ones both sides are Monte Carlo.

mod flow;
mod pair_chain;
mod universality;

pub use flow::{
    brownian_flow_reference, merge_law_quadrature, BrownianFlowParams, FlowReference,
    LOCAL_TIME_CONVENTION,
};
pub use pair_chain::exact_merge_probability;
pub use universality::{
    universality_report, NegativeControl, UniversalityReport, UniversalityRow,
    UniversalitySettings,
};

use crate::env::{Boundary, Environment};
use crate::error::{Error, Result};
use crate::forward::{simulate_forward, SdeParams};
use crate::kernel::{build_generator, heat_kernel, Sources};
use crate::seeds::child_seed;
use crate::stats::{mean_se, KahanSum};
use crate::walks::simulate_pair;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One two-sided comparison; the verdict is PASS iff |z| <= 3.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityCheck {
    pub label: String,
    pub forward: f64,
    pub forward_se: f64,
    pub dual: f64,
    pub dual_se: f64,
    pub z: f64,
    pub pass: bool,
}

impl DualityCheck {
    fn new(label: String, forward: (f64, f64), dual: (f64, f64)) -> DualityCheck {
        let se = (forward.1 * forward.1 + dual.1 * dual.1).sqrt().max(1e-12);
        let z = (forward.0 - dual.0) / se;
        DualityCheck {
            label,
            forward: forward.0,
            forward_se: forward.1,
            dual: dual.0,
            dual_se: dual.1,
            z,
            pass: z.abs() <= 3.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityReport {
    pub checks: Vec<DualityCheck>,
    pub pass: bool,
}

impl DualityReport {
    fn from_checks(checks: Vec<DualityCheck>) -> DualityReport {
        let pass = checks.iter().all(|c| c.pass);
        DualityReport { checks, pass }
    }
}

/// How the dual side of a second-moment comparison is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualSide {
    /// Uniformization of the pair-plus-merge chain; exact, but requires a
    /// flat initial profile (the surviving lineage's position is not
    /// tracked) and a small ring.
    ExactPairChain,
    /// Simulated backward pair, this many replicates.
    MonteCarlo { replicates: usize },
}

fn check_common(env: &Environment, p0: &[f64], replicates: usize) -> Result<()> {
    if env.boundary() != Boundary::Ring {
        return Err(Error::RingRequired("duality comparisons"));
    }
    if p0.len() != env.len() {
        return Err(Error::LengthMismatch { expected: env.len(), got: p0.len() });
    }
    if replicates < 16 {
        return Err(Error::TooFewSamples { what: "forward replicates", need: 16, got: replicates });
    }
    Ok(())
}

/// First-moment duality at a set of probe sites: forward Monte Carlo
/// E[p_t(x)] against the exact kernel curve sum_y g_t(x, y) p0(y), with t
/// the horizon of `params`.
pub fn duality_k1(
    env: &Environment,
    p0: &[f64],
    params: &SdeParams,
    probes: &[i64],
    replicates: usize,
    seed: u64,
) -> Result<DualityReport> {
    check_common(env, p0, replicates)?;
    if probes.is_empty() {
        return Err(Error::InvalidParams("no probe sites given".into()));
    }
    params.validate(env.k())?;

    let probe_idx: Vec<usize> =
        probes.iter().map(|&x| env.index_of(x)).collect::<Result<Vec<_>>>()?;
    let samples: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let run =
                simulate_forward(env, p0, params, &[params.t_end], child_seed(seed, "k1-fwd", rep))?;
            Ok(probe_idx.iter().map(|&i| run.snapshots[0].p[i]).collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let gen = build_generator(env, params.mig)?;
    let kernel = heat_kernel(&gen, params.t_end, Sources::Sites(probes.to_vec()))?;

    let mut checks = Vec::with_capacity(probes.len());
    for (pi, &probe) in probes.iter().enumerate() {
        let values: Vec<f64> = samples.iter().map(|row| row[pi]).collect();
        let row = kernel.row(probe)?;
        let mut acc = KahanSum::default();
        for (g, &v) in row.iter().zip(p0) {
            acc.add(g * v);
        }
        checks.push(DualityCheck::new(
            format!("first moment at site {probe}"),
            mean_se(&values),
            (acc.value(), 0.0),
        ));
    }
    Ok(DualityReport::from_checks(checks))
}

/// Second-moment duality at one site pair: forward Monte Carlo of
/// E[p_t(x) p_t(y)] against the backward pair, exact or simulated.
pub fn duality_k2(
    env: &Environment,
    p0: &[f64],
    params: &SdeParams,
    x: i64,
    y: i64,
    dual_side: DualSide,
    replicates: usize,
    seed: u64,
) -> Result<DualityReport> {
    check_common(env, p0, replicates)?;
    params.validate(env.k())?;
    let xi = env.index_of(x)?;
    let yi = env.index_of(y)?;

    let forward_samples: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let run =
                simulate_forward(env, p0, params, &[params.t_end], child_seed(seed, "k2-fwd", rep))?;
            Ok(run.snapshots[0].p[xi] * run.snapshots[0].p[yi])
        })
        .collect::<Result<Vec<_>>>()?;

    let dual = match dual_side {
        DualSide::ExactPairChain => {
            let c = p0[0];
            if p0.iter().any(|&v| v != c) {
                return Err(Error::InvalidParams(
                    "the exact merge chain needs a flat initial profile".into(),
                ));
            }
            let merged =
                exact_merge_probability(env, params.mig, params.lambda, params.t_end, x, y)?;
            // two lineages contribute c^2 while apart, c once merged
            (c * c * (1.0 - merged) + c * merged, 0.0)
        }
        DualSide::MonteCarlo { replicates: dual_reps } => {
            if dual_reps < 16 {
                return Err(Error::TooFewSamples {
                    what: "dual replicates",
                    need: 16,
                    got: dual_reps,
                });
            }
            let values: Vec<f64> = (0..dual_reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let (st, _) = simulate_pair(
                        env,
                        x,
                        y,
                        params.lambda,
                        params.mig,
                        params.t_end,
                        child_seed(seed, "k2-dual", rep),
                    )?;
                    let a = p0[env.index_of(st.x1)?];
                    Ok(if st.coalesced_at.is_some() { a } else { a * p0[env.index_of(st.x2)?] })
                })
                .collect::<Result<Vec<_>>>()?;
            mean_se(&values)
        }
    };

    let check = DualityCheck::new(
        format!("second moment at sites ({x}, {y})"),
        mean_se(&forward_samples),
        dual,
    );
    Ok(DualityReport::from_checks(vec![check]))
}

#[cfg(test)]
mod tests;
