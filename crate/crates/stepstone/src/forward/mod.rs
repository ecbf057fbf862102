//! Forward-in-time simulation of the interacting allele-frequency field.
//!
//! Each colony `x` carries a frequency `p(x)` in [0, 1]. The field follows
//! nearest-neighbor exchange driven by the same size-weighted rates as the
//! dual walks, plus Wright-Fisher noise of variance `p(1-p)/(lambda N(x))`
//! per unit time. Integration is Euler-Maruyama with post-step clipping to
//! [0, 1]; the step size is capped so both the drift displacement and the
//! per-step noise scale stay small, keeping the clip a rare correction.

use crate::env::{Boundary, Environment, Migration};
use crate::error::{Error, Result};
use crate::seeds::{child_seed, rng_from};
use crate::stats::KahanSum;
use crate::walks::jump_rates;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Integration controls for the frequency field.
///
/// Invariants enforced by [`SdeParams::new`]: positive finite `lambda` and
/// `dt`, horizon `t_end >= dt`, and `dt <= max_dt(mig, lambda, k)` so one
/// step moves a deme by at most 5 percent of the range through drift and
/// the per-step noise standard deviation stays below 0.025 at the smallest
/// admissible colony.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub mig: Migration,
    /// Inverse noise strength; the field rescaling uses `lambda = sqrt(n)`.
    pub lambda: f64,
    pub dt: f64,
    /// Simulation horizon; snapshots may be requested anywhere in [0, t_end].
    pub t_end: f64,
}

impl SdeParams {
    pub fn new(mig: Migration, lambda: f64, dt: f64, t_end: f64, k: f64) -> Result<Self> {
        let params = SdeParams { mig, lambda, dt, t_end };
        params.validate(k)?;
        Ok(params)
    }

    /// Largest admissible step for ellipticity bound `k`: the drift cap
    /// `0.05/m` and the noise cap `0.0025 lambda / k` (per-step noise
    /// variance at a colony of size `1/k` is at most `dt k / (4 lambda)`).
    pub fn max_dt(mig: Migration, lambda: f64, k: f64) -> f64 {
        (0.05 / mig.m).min(0.0025 * lambda / k)
    }

    pub fn validate(&self, k: f64) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "noise level lambda {} must be positive and finite",
                self.lambda
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParams(format!("step dt {} must be positive", self.dt)));
        }
        if !(k >= 1.0) || !k.is_finite() {
            return Err(Error::InvalidParams(format!("ellipticity bound {k} must be >= 1")));
        }
        let cap = Self::max_dt(self.mig, self.lambda, k);
        if self.dt > cap {
            return Err(Error::InvalidParams(format!(
                "step dt {} exceeds the stability cap {cap} for m {}, lambda {}, k {k}",
                self.dt, self.mig.m, self.lambda
            )));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::InvalidParams(format!(
                "horizon {} must be finite and at least one step {}",
                self.t_end, self.dt
            )));
        }
        Ok(())
    }

    /// Number of steps covering the horizon; the grid time after step `j`
    /// is `j * dt`.
    pub fn steps(&self) -> usize {
        step_index(self.t_end, self.dt).max(1)
    }
}

/// First grid index whose time `j * dt` reaches `t`, tolerating the usual
/// rounding slack so `t = j * dt` maps to `j` exactly.
fn step_index(t: f64, dt: f64) -> usize {
    if t <= 0.0 {
        0
    } else {
        (t / dt - 1e-9).ceil() as usize
    }
}

/// One spatial snapshot of the frequency field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyField {
    pub p: Vec<f64>,
    pub t: f64,
}

impl FrequencyField {
    pub fn spatial_mean(&self) -> f64 {
        let mut acc = KahanSum::default();
        for &v in &self.p {
            acc.add(v);
        }
        acc.value() / self.p.len() as f64
    }

    /// Window average of `pi(x) p(x)`. The reversible weights have window
    /// mean 1, and the drift is orthogonal to them, so this quantity is a
    /// martingale of the dynamics (up to the rare boundary clip).
    pub fn pi_mean(&self, env: &Environment, mig: Migration) -> Result<f64> {
        if self.p.len() != env.len() {
            return Err(Error::LengthMismatch { expected: env.len(), got: self.p.len() });
        }
        let pi = env.reversible_pi(mig);
        let mut acc = KahanSum::default();
        for (w, &v) in pi.iter().zip(&self.p) {
            acc.add(w * v);
        }
        Ok(acc.value() / self.p.len() as f64)
    }
}

/// Initial frequency profiles, all valued in [0, 1] and constructed with a
/// spatial Lipschitz constant of at most `budget / sqrt(n)` per site when
/// instantiated at scale `n`, so the rescaled field starts uniformly smooth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialProfile {
    Constant { level: f64 },
    /// Ramp from `lo` (left half) to `hi` (right half) across the window
    /// center, with per-site slope exactly `budget / sqrt(n)`.
    SmoothedStep { lo: f64, hi: f64, budget: f64 },
    /// Gaussian bump of the given peak height centered in the window, with
    /// maximal slope `budget / sqrt(n)`.
    GaussianBump { amplitude: f64, budget: f64 },
}

impl InitialProfile {
    pub fn instantiate(&self, len: usize, n: f64) -> Result<Vec<f64>> {
        if len == 0 {
            return Err(Error::InvalidParams("profile window must be nonempty".into()));
        }
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::InvalidParams(format!("profile scale {n} must be >= 1")));
        }
        let center = (len - 1) as f64 / 2.0;
        match *self {
            InitialProfile::Constant { level } => {
                check_level("constant level", level)?;
                Ok(vec![level; len])
            }
            InitialProfile::SmoothedStep { lo, hi, budget } => {
                check_level("step low level", lo)?;
                check_level("step high level", hi)?;
                check_budget(budget)?;
                if hi < lo {
                    return Err(Error::InvalidParams(format!(
                        "step levels out of order: lo {lo} > hi {hi}"
                    )));
                }
                if hi == lo {
                    return Ok(vec![lo; len]);
                }
                // ramp width chosen so the slope is budget / sqrt(n)
                let width = (hi - lo) * n.sqrt() / budget;
                Ok((0..len)
                    .map(|x| {
                        let u = (x as f64 - center) / width + 0.5;
                        (lo + (hi - lo) * u).clamp(lo, hi)
                    })
                    .collect())
            }
            InitialProfile::GaussianBump { amplitude, budget } => {
                check_level("bump amplitude", amplitude)?;
                check_budget(budget)?;
                if amplitude == 0.0 {
                    return Ok(vec![0.0; len]);
                }
                // steepest slope of a e^{-x^2/2s^2} is a e^{-1/2} / s
                let s = amplitude * (-0.5f64).exp() * n.sqrt() / budget;
                Ok((0..len)
                    .map(|x| {
                        let u = (x as f64 - center) / s;
                        amplitude * (-0.5 * u * u).exp()
                    })
                    .collect())
            }
        }
    }
}

fn check_level(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParams(format!("{what} {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_budget(budget: f64) -> Result<()> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::InvalidParams(format!(
            "smoothness budget {budget} must be positive and finite"
        )));
    }
    Ok(())
}

/// Exchange drift of the field: at each site the neighbor jump rates of
/// one dual walk weight the incoming differences,
/// `d(x) = rate_left(x) (p(x-1) - p(x)) + rate_right(x) (p(x+1) - p(x))`.
/// Rings wrap; segment edges lose the missing neighbor term. The reversible
/// weights `pi` annihilate the drift: `sum_x pi(x) d(x) = 0` up to rounding.
pub fn drift(env: &Environment, p: &[f64], mig: Migration) -> Result<Vec<f64>> {
    if p.len() != env.len() {
        return Err(Error::LengthMismatch { expected: env.len(), got: p.len() });
    }
    let stepper = Stepper::new(env, &SdeParams { mig, lambda: 1.0, dt: 1.0, t_end: 1.0 })?;
    Ok((0..p.len()).map(|x| stepper.drift_at(p, x)).collect())
}

/// Precomputed per-site rates for the integrator. Segment edges carry rate
/// zero toward the missing neighbor, which makes the edge reflecting.
struct Stepper {
    rate_left: Vec<f64>,
    rate_right: Vec<f64>,
    /// 1 / (lambda N(x)): local noise variance per unit time at p(1-p) = 1.
    noise_scale: Vec<f64>,
    dt: f64,
    ring: bool,
}

impl Stepper {
    fn new(env: &Environment, params: &SdeParams) -> Result<Self> {
        let l = env.len();
        let mut rate_left = Vec::with_capacity(l);
        let mut rate_right = Vec::with_capacity(l);
        for x in 0..l {
            let r = jump_rates(env, x as i64, params.mig)?;
            rate_left.push(r.left);
            rate_right.push(r.right);
        }
        let noise_scale = env.sizes().iter().map(|&s| 1.0 / (params.lambda * s)).collect();
        Ok(Stepper {
            rate_left,
            rate_right,
            noise_scale,
            dt: params.dt,
            ring: env.boundary() == Boundary::Ring,
        })
    }

    fn drift_at(&self, p: &[f64], x: usize) -> f64 {
        let l = p.len();
        // segment edges see their own value through the zero rate, so the
        // clamped neighbor index contributes exactly nothing
        let pl = if x == 0 { p[if self.ring { l - 1 } else { 0 }] } else { p[x - 1] };
        let pr = if x + 1 == l { p[if self.ring { 0 } else { x }] } else { p[x + 1] };
        self.rate_left[x] * (pl - p[x]) + self.rate_right[x] * (pr - p[x])
    }

    /// One Euler-Maruyama step: drift and noise both evaluated on the
    /// pre-step field, one standard normal per deme (drawn even when the
    /// amplitude vanishes, so the draw sequence is position-independent),
    /// then clip to [0, 1].
    fn step(&self, p: &[f64], out: &mut [f64], rng: &mut ChaCha8Rng) {
        for x in 0..p.len() {
            let z: f64 = rng.sample(StandardNormal);
            self.advance_site(p, out, x, z);
        }
    }

    /// Same update with the normals supplied by the caller, one per deme.
    fn step_with(&self, p: &[f64], out: &mut [f64], zs: &[f64]) {
        for x in 0..p.len() {
            self.advance_site(p, out, x, zs[x]);
        }
    }

    fn advance_site(&self, p: &[f64], out: &mut [f64], x: usize, z: f64) {
        let px = p[x];
        let var = self.dt * px * (1.0 - px) * self.noise_scale[x];
        out[x] = (px + self.drift_at(p, x) * self.dt + var.sqrt() * z).clamp(0.0, 1.0);
    }
}

/// Advance one step. Both endpoints of the step use the same environment
/// and parameters; the returned field is stamped `t + dt`.
pub fn em_step(
    env: &Environment,
    field: &FrequencyField,
    params: &SdeParams,
    rng: &mut ChaCha8Rng,
) -> Result<FrequencyField> {
    params.validate(env.k())?;
    check_field(env, &field.p)?;
    let stepper = Stepper::new(env, params)?;
    let mut out = vec![0.0; field.p.len()];
    stepper.step(&field.p, &mut out, rng);
    Ok(FrequencyField { p: out, t: field.t + params.dt })
}

fn check_field(env: &Environment, p: &[f64]) -> Result<()> {
    if p.len() != env.len() {
        return Err(Error::LengthMismatch { expected: env.len(), got: p.len() });
    }
    for (x, &v) in p.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParams(format!("frequency {v} at site {x} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Result of one forward trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForwardRun {
    /// One field per requested time, stamped with the grid time actually
    /// reached (the first step boundary at or past the request).
    pub snapshots: Vec<FrequencyField>,
    pub steps: usize,
    /// Segment windows only: set once either edge deme departs from its
    /// initial value. With a profile that vanishes near the edges this
    /// detects mass reaching the boundary exactly, because quiescent edge
    /// demes have zero drift and zero noise.
    pub boundary_touched: bool,
}

impl ForwardRun {
    /// Stream the snapshots as `replicate,t,x,p` rows.
    pub fn write_csv<W: Write>(&self, replicate: u64, header: bool, w: &mut W) -> Result<()> {
        if header {
            writeln!(w, "replicate,t,x,p")?;
        }
        for snap in &self.snapshots {
            for (x, &v) in snap.p.iter().enumerate() {
                writeln!(w, "{replicate},{},{x},{v}", snap.t)?;
            }
        }
        Ok(())
    }
}

/// Integrate the field from `p0` over [0, t_end], recording a snapshot at
/// each requested time. Requests must be finite, non-decreasing, and within
/// the horizon. The trajectory is a deterministic function of the inputs
/// and the seed; the draw order never depends on the snapshot requests.
pub fn simulate_forward(
    env: &Environment,
    p0: &[f64],
    params: &SdeParams,
    snapshot_times: &[f64],
    seed: u64,
) -> Result<ForwardRun> {
    params.validate(env.k())?;
    check_field(env, p0)?;
    for w in snapshot_times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::NonMonotone { x0: w[0], x1: w[1] });
        }
    }
    for &t in snapshot_times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParams(format!("snapshot time {t} must be finite and >= 0")));
        }
        if t > params.t_end {
            return Err(Error::BeyondHorizon { t, horizon: params.t_end });
        }
    }

    let l = p0.len();
    let segment = env.boundary() == Boundary::Segment;
    let (edge_lo, edge_hi) = (p0[0], p0[l - 1]);
    let stepper = Stepper::new(env, params)?;
    let mut rng = rng_from(child_seed(seed, "forward", 0));

    let total = params.steps();
    let mut cur = p0.to_vec();
    let mut nxt = vec![0.0; l];
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut next_snap = 0;
    while next_snap < snapshot_times.len() && step_index(snapshot_times[next_snap], params.dt) == 0
    {
        snapshots.push(FrequencyField { p: cur.clone(), t: 0.0 });
        next_snap += 1;
    }

    let mut touched = false;
    for j in 1..=total {
        stepper.step(&cur, &mut nxt, &mut rng);
        std::mem::swap(&mut cur, &mut nxt);
        if segment && !touched && (cur[0] != edge_lo || cur[l - 1] != edge_hi) {
            touched = true;
        }
        let tj = j as f64 * params.dt;
        while next_snap < snapshot_times.len()
            && step_index(snapshot_times[next_snap], params.dt) == j
        {
            snapshots.push(FrequencyField { p: cur.clone(), t: tj });
            next_snap += 1;
        }
    }
    // a request at exactly t_end can round one grid index past the loop
    while next_snap < snapshot_times.len() {
        snapshots.push(FrequencyField { p: cur.clone(), t: total as f64 * params.dt });
        next_snap += 1;
    }

    Ok(ForwardRun { snapshots, steps: total, boundary_touched: touched })
}

/// Outcome of a common-noise step-size refinement probe.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct RefinementGap {
    /// Monte Carlo mean of the terminal spatial average at step `dt`.
    pub coarse_mean: f64,
    /// Same statistic at step `dt/2` on the same Brownian increments.
    pub fine_mean: f64,
    /// coarse_mean - fine_mean: the discretization shift, isolated from
    /// sampling noise because both grids share every increment.
    pub gap: f64,
    /// Standard error of `fine_mean` over the replicates, i.e. the noise
    /// floor of the estimate itself.
    pub mc_se: f64,
    pub replicates: usize,
}

/// Drive a `dt` path and a `dt/2` path with the same Brownian increments
/// (each coarse step consumes two fine normals, combined as
/// `(z1 + z2)/sqrt(2)`), and compare the terminal spatial averages. The
/// coupling removes Monte Carlo noise from the difference, so `gap`
/// measures time-discretization error alone.
pub fn refinement_gap(
    env: &Environment,
    p0: &[f64],
    params: &SdeParams,
    replicates: usize,
    seed: u64,
) -> Result<RefinementGap> {
    params.validate(env.k())?;
    if p0.len() != env.len() {
        return Err(Error::LengthMismatch { expected: env.len(), got: p0.len() });
    }
    if replicates < 16 {
        return Err(Error::TooFewSamples { what: "refinement replicates", need: 16, got: replicates });
    }
    let coarse = Stepper::new(env, params)?;
    let half = SdeParams { dt: params.dt / 2.0, ..*params };
    let fine = Stepper::new(env, &half)?;
    let steps = params.steps();
    let l = env.len();

    let finals: Vec<(f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_from(child_seed(seed, "refine", rep));
            let mut pc = p0.to_vec();
            let mut pf = p0.to_vec();
            let mut buf = vec![0.0; l];
            let mut z1 = vec![0.0; l];
            let mut z2 = vec![0.0; l];
            let mut zc = vec![0.0; l];
            for _ in 0..steps {
                for x in 0..l {
                    z1[x] = rng.sample(StandardNormal);
                    z2[x] = rng.sample(StandardNormal);
                    zc[x] = (z1[x] + z2[x]) / std::f64::consts::SQRT_2;
                }
                fine.step_with(&pf, &mut buf, &z1);
                std::mem::swap(&mut pf, &mut buf);
                fine.step_with(&pf, &mut buf, &z2);
                std::mem::swap(&mut pf, &mut buf);
                coarse.step_with(&pc, &mut buf, &zc);
                std::mem::swap(&mut pc, &mut buf);
            }
            let mc = FrequencyField { p: pc, t: 0.0 }.spatial_mean();
            let mf = FrequencyField { p: pf, t: 0.0 }.spatial_mean();
            (mc, mf)
        })
        .collect();

    let coarse_vals: Vec<f64> = finals.iter().map(|f| f.0).collect();
    let fine_vals: Vec<f64> = finals.iter().map(|f| f.1).collect();
    let coarse_mean = crate::stats::mean(&coarse_vals);
    let (fine_mean, mc_se) = crate::stats::mean_se(&fine_vals);
    Ok(RefinementGap { coarse_mean, fine_mean, gap: coarse_mean - fine_mean, mc_se, replicates })
}

/// Rescaled pairing of a field against a test function on the window:
/// `n^{-1/2} sum_x p(x) phi((x - center) / sqrt(n))`. The support of `phi`
/// (in rescaled coordinates) must lie inside the window, otherwise the sum
/// would silently miss mass.
pub fn pairing<F: Fn(f64) -> f64>(p: &[f64], n: f64, phi: F, support: (f64, f64)) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidParams("pairing needs a nonempty field".into()));
    }
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidParams(format!("pairing scale {n} must be >= 1")));
    }
    let (a, b) = support;
    if !a.is_finite() || !b.is_finite() || a > b {
        return Err(Error::InvalidParams(format!("support [{a}, {b}] must be a finite interval")));
    }
    let sqrt_n = n.sqrt();
    let center = (p.len() - 1) as f64 / 2.0;
    let lo = -center / sqrt_n;
    let hi = ((p.len() - 1) as f64 - center) / sqrt_n;
    if a < lo || b > hi {
        return Err(Error::InvalidParams(format!(
            "test function support [{a}, {b}] exceeds the rescaled window [{lo}, {hi}]"
        )));
    }
    let mut acc = KahanSum::default();
    for (x, &px) in p.iter().enumerate() {
        let u = (x as f64 - center) / sqrt_n;
        if u < a || u > b {
            continue;
        }
        acc.add(px * phi(u));
    }
    Ok(acc.value() / sqrt_n)
}

/// Rescaled Hoelder modulus of a set of snapshots: the largest
/// `n^{beta/2} |p(x) - p(y)| / |x - y|^beta` over all site pairs and all
/// snapshots, with the window read as an interval. The exponent must lie
/// in (0, 2/15), the regime where the rescaled field stays uniformly
/// continuous.
pub fn holder_modulus(snapshots: &[FrequencyField], beta: f64, n: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 2.0 / 15.0) {
        return Err(Error::InvalidParams(format!("modulus exponent {beta} outside (0, 2/15)")));
    }
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidParams(format!("modulus scale {n} must be >= 1")));
    }
    let mut inv_pow: Vec<f64> = Vec::new();
    let mut best: f64 = 0.0;
    for snap in snapshots {
        let p = &snap.p;
        if inv_pow.len() < p.len() {
            inv_pow = (0..p.len()).map(|d| (d.max(1) as f64).powf(-beta)).collect();
        }
        for x in 0..p.len() {
            for y in x + 1..p.len() {
                let r = (p[y] - p[x]).abs() * inv_pow[y - x];
                if r > best {
                    best = r;
                }
            }
        }
    }
    Ok(n.powf(beta / 2.0) * best)
}
