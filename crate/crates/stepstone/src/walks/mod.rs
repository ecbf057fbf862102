//! Event-driven simulation of the quenched nearest-neighbor random walk:
//! single-walk paths, streaming diffusivity estimates, and the scale
//! martingale residual. The coalescing pair lives in [`pair`].
//!
//! Simulation is exact: holding times are exponential with the site's total
//! exit rate and nothing is time-discretized. Runs that emulate the infinite
//! lattice draw ring windows sized so a walk stays at least six standard
//! deviations away from the wrap seam over the whole horizon; excursions
//! beyond half the window are flagged per path.

pub mod pair;

pub use pair::{
    accumulate_meeting_time, coalescence_stats, gamma_meeting_estimator, simulate_pair,
    CoalescenceRow, CoalescenceStats, DualPairState, GammaEstimate, MeetingRecord, MeetingSpell,
};

use crate::env::{
    effective_params, sample_environment, scale_function, triple_mean, Boundary, Environment,
    EnvironmentSpec, Family, Migration,
};
use crate::error::{Error, Result};
use crate::seeds::{child_seed, rng_from};
use crate::stats::{ols_slope, KahanSum};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Jump rates out of one site: each neighbor is entered at rate
/// m_eff N(neighbor) / N3(site).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRates {
    pub left: f64,
    pub right: f64,
    /// Set at segment edges, where the missing neighbor's rate is zero.
    pub boundary_clipped: bool,
}

impl JumpRates {
    pub fn total(&self) -> f64 {
        self.left + self.right
    }
}

/// Rates out of site `x`. Rings wrap; segment edges get rate 0 toward the
/// missing neighbor and are flagged.
pub fn jump_rates(env: &Environment, x: i64, mig: Migration) -> Result<JumpRates> {
    let xi = env.index_of(x)? as i64;
    let l = env.len() as i64;
    let m_eff = mig.m_eff();
    let n3 = env.n3_reflecting(xi, mig);
    match env.boundary() {
        Boundary::Ring => Ok(JumpRates {
            left: m_eff * env.size_wrapped(xi - 1) / n3,
            right: m_eff * env.size_wrapped(xi + 1) / n3,
            boundary_clipped: false,
        }),
        Boundary::Segment => {
            let s = env.sizes();
            let left = if xi >= 1 { m_eff * s[(xi - 1) as usize] / n3 } else { 0.0 };
            let right = if xi + 1 < l { m_eff * s[(xi + 1) as usize] / n3 } else { 0.0 };
            Ok(JumpRates { left, right, boundary_clipped: xi == 0 || xi + 1 == l })
        }
    }
}

/// Per-site exit rates and right-jump probabilities, precomputed for the
/// event loop.
pub(crate) struct RateTable {
    total: Vec<f64>,
    p_right: Vec<f64>,
    boundary: Boundary,
}

impl RateTable {
    pub(crate) fn new(env: &Environment, mig: Migration) -> Result<RateTable> {
        let l = env.len();
        let mut total = Vec::with_capacity(l);
        let mut p_right = Vec::with_capacity(l);
        for x in 0..l {
            let r = jump_rates(env, x as i64, mig)?;
            let tot = r.total();
            total.push(tot);
            p_right.push(if tot > 0.0 { r.right / tot } else { 0.5 });
        }
        Ok(RateTable { total, p_right, boundary: env.boundary() })
    }

    fn len(&self) -> usize {
        self.total.len()
    }
}

/// One walker's live state. Positions are unwrapped (signed lattice
/// coordinates); `xi` is the wrapped window index driving the rates.
pub(crate) struct Walker<'a> {
    table: &'a RateTable,
    rng: ChaCha8Rng,
    pub(crate) x: i64,
    pub(crate) xi: usize,
    t: f64,
    /// Time of the next jump, sampled ahead.
    pub(crate) t_next: f64,
    start: i64,
    wrap_guard: i64,
    pub(crate) touched: bool,
}

impl<'a> Walker<'a> {
    pub(crate) fn new(table: &'a RateTable, start: i64, seed: u64) -> Result<Walker<'a>> {
        let l = table.len() as i64;
        let xi = match table.boundary {
            Boundary::Ring => start.rem_euclid(l) as usize,
            Boundary::Segment => {
                if start < 0 || start >= l {
                    return Err(Error::OutOfWindow { site: start, len: table.len() });
                }
                start as usize
            }
        };
        let mut w = Walker {
            table,
            rng: rng_from(seed),
            x: start,
            xi,
            t: 0.0,
            t_next: 0.0,
            start,
            wrap_guard: (l / 2).max(1),
            touched: false,
        };
        w.note_position();
        w.sample_hold();
        Ok(w)
    }

    fn sample_hold(&mut self) {
        let rate = self.table.total[self.xi];
        if rate > 0.0 {
            let e: f64 = self.rng.sample(Exp1);
            self.t_next = self.t + e / rate;
        } else {
            self.t_next = f64::INFINITY;
        }
    }

    fn note_position(&mut self) {
        match self.table.boundary {
            Boundary::Ring => {
                if (self.x - self.start).abs() >= self.wrap_guard {
                    self.touched = true;
                }
            }
            Boundary::Segment => {
                if self.xi == 0 || self.xi + 1 == self.table.len() {
                    self.touched = true;
                }
            }
        }
    }

    /// Execute the pending jump and sample the next holding time.
    pub(crate) fn jump(&mut self) {
        self.t = self.t_next;
        let l = self.table.len();
        if self.rng.random::<f64>() < self.table.p_right[self.xi] {
            self.x += 1;
            self.xi = if self.xi + 1 == l { 0 } else { self.xi + 1 };
        } else {
            self.x -= 1;
            self.xi = if self.xi == 0 { l - 1 } else { self.xi - 1 };
        }
        self.note_position();
        self.sample_hold();
    }

    pub(crate) fn time(&self) -> f64 {
        self.t
    }
}

/// A simulated walk trajectory: jump records plus the start site.
///
/// `boundary_touched` means the trajectory left the trustworthy region:
/// edge contact on a segment, or an excursion of at least half the window
/// on a ring (where the tiled window stops emulating the infinite lattice).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkPath {
    pub start: i64,
    /// (jump time, new position); times strictly increasing, nearest-neighbor moves.
    pub jumps: Vec<(f64, i64)>,
    pub t_end: f64,
    pub boundary_touched: bool,
}

impl WalkPath {
    /// Position at time `t` (right-continuous).
    pub fn position_at(&self, t: f64) -> i64 {
        let k = self.jumps.partition_point(|(s, _)| *s <= t);
        if k == 0 {
            self.start
        } else {
            self.jumps[k - 1].1
        }
    }

    pub fn final_position(&self) -> i64 {
        self.jumps.last().map_or(self.start, |(_, x)| *x)
    }

    /// CSV of jump records, one `time,site` row per event.
    pub fn write_csv(&self, mut out: impl std::io::Write) -> Result<()> {
        writeln!(out, "time,site")?;
        writeln!(out, "0,{}", self.start)?;
        for (t, x) in &self.jumps {
            writeln!(out, "{t},{x}")?;
        }
        Ok(())
    }
}

/// Exact event-driven walk on the window, deterministic given the seed.
pub fn simulate_walk(
    env: &Environment,
    start: i64,
    mig: Migration,
    t_end: f64,
    seed: u64,
) -> Result<WalkPath> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParams(format!("horizon {t_end} must be positive and finite")));
    }
    let table = RateTable::new(env, mig)?;
    let mut w = Walker::new(&table, start, seed)?;
    let mut jumps = Vec::new();
    while w.t_next <= t_end {
        w.jump();
        jumps.push((w.time(), w.x));
    }
    Ok(WalkPath { start, jumps, t_end, boundary_touched: w.touched })
}

/// Streaming positions at the given non-decreasing times; nothing is
/// stored, so arbitrarily long horizons cost O(1) memory. Returns the
/// positions and the boundary flag.
pub fn positions_at(
    env: &Environment,
    start: i64,
    mig: Migration,
    times: &[f64],
    seed: u64,
) -> Result<(Vec<i64>, bool)> {
    for pair in times.windows(2) {
        if !(pair[0] <= pair[1]) {
            return Err(Error::InvalidParams("sample times must be non-decreasing".into()));
        }
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParams("sample times must be finite and non-negative".into()));
    }
    let table = RateTable::new(env, mig)?;
    let mut w = Walker::new(&table, start, seed)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while w.t_next <= t {
            w.jump();
        }
        out.push(w.x);
    }
    Ok((out, w.touched))
}

/// Largest residual of the rate-weighted scale-increment identity over the
/// window: the scale function makes the walk a martingale, so the residual
/// is zero up to rounding on every environment.
pub fn martingale_identity_check(env: &Environment, mig: Migration) -> Result<f64> {
    Ok(scale_function(env, mig)?.max_residual)
}

/// One grid point of the diffusivity curve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MsdRow {
    pub t: f64,
    pub msd_over_t: f64,
    pub se_over_t: f64,
}

/// Mean-squared-displacement curve with its flatness diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsdReport {
    pub rows: Vec<MsdRow>,
    /// Paths contributing to the estimates (after segment aborts).
    pub paths: usize,
    pub window_len: usize,
    /// Exact ensemble diffusivity of the family.
    pub sigma2: f64,
    /// Exact mean exit rate at the start site; the t -> 0 limit of MSD/t.
    pub short_time_rate: f64,
    /// Crude ceiling K^2 c^{-2} sup h for MSD/t, from comparing the walk
    /// with its scale martingale; `max_ratio` must stay below it.
    pub stability_bound: f64,
    pub max_ratio: f64,
    /// The upper half of the curve has an OLS slope above twice its SE.
    pub upward_trend: bool,
    /// Ring paths that wandered at least half the window (kept).
    pub wrap_flagged: usize,
    /// Segment paths that touched an edge (dropped).
    pub aborted: usize,
}

/// Window spec following the family law of `spec`, long enough that a walk
/// run for `horizon` stays six standard deviations clear of the seam, plus
/// `extra_sites` of slack. Periodic families round up to a whole number of
/// patterns so the ring tiling is seamless.
pub(crate) fn scaled_window(
    spec: &EnvironmentSpec,
    mig: Migration,
    horizon: f64,
    extra_sites: usize,
) -> Result<EnvironmentSpec> {
    let half = (6.0 * (mig.sigma2_upper() * horizon).sqrt()).ceil() as usize + 16;
    let mut len = 2 * half + 1 + extra_sites;
    if let Family::Periodic { pattern } = &spec.family {
        len = len.div_ceil(pattern.len()) * pattern.len();
    }
    EnvironmentSpec::new(spec.family.clone(), spec.k, len, spec.boundary)
}

/// Smallest colony size the family can produce.
fn min_support(family: &Family) -> f64 {
    match family {
        Family::Constant { size } => *size,
        Family::IidDiscrete { values, probs } => values
            .iter()
            .zip(probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min),
        Family::IidUniform { lo, .. } => *lo,
        Family::Periodic { pattern } => pattern.iter().copied().fold(f64::INFINITY, f64::min),
        Family::MarkovChain { states, .. } => states.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Largest value of the scale-martingale quadratic variation rate
/// h = sum_z rate(x,z) dF(x,z)^2 over the family's support. h decreases in
/// every coordinate of the neighbor triple, so the smallest support value
/// bounds it.
fn sup_quadratic_rate(spec: &EnvironmentSpec, mig: Migration) -> f64 {
    let v = min_support(&spec.family);
    2.0 * mig.m_eff() / (v * v * v * mig.n3_of(v, v, v))
}

/// Diffusivity curve MSD(t)/t over fresh windows, one draw per path, with
/// standard errors and boundedness diagnostics.
///
/// The window geometry of `spec` is replaced by an anti-wrap size for the
/// last grid time; walks start at the window center. Ring paths that
/// wander half the window away are counted in `wrap_flagged` but kept
/// (the event has negligible probability under the sizing rule); segment
/// paths touching an edge are dropped and counted in `aborted`.
pub fn msd_and_variance_bound(
    spec: &EnvironmentSpec,
    mig: Migration,
    t_grid: &[f64],
    paths: usize,
    seed: u64,
) -> Result<MsdReport> {
    spec.validate()?;
    if paths < 100 {
        return Err(Error::TooFewSamples { what: "walk paths", need: 100, got: paths });
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidParams("empty time grid".into()));
    }
    if !(t_grid[0] > 0.0) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParams("time grid must be positive and finite".into()));
    }
    for pair in t_grid.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::InvalidParams("time grid must be strictly increasing".into()));
        }
    }
    let horizon = *t_grid.last().unwrap();
    let window = scaled_window(spec, mig, horizon, 0)?;
    let start = (window.len / 2) as i64;

    let per_path: Vec<(Option<Vec<f64>>, bool)> = (0..paths)
        .into_par_iter()
        .map(|i| -> Result<(Option<Vec<f64>>, bool)> {
            let env = sample_environment(&window, child_seed(seed, "msd-env", i as u64))?;
            let (xs, touched) =
                positions_at(&env, start, mig, t_grid, child_seed(seed, "msd-walk", i as u64))?;
            if touched && window.boundary == Boundary::Segment {
                return Ok((None, true));
            }
            let sq = xs
                .iter()
                .map(|x| {
                    let d = (x - start) as f64;
                    d * d
                })
                .collect();
            Ok((Some(sq), touched))
        })
        .collect::<Result<_>>()?;

    let gp = t_grid.len();
    let mut sum = vec![KahanSum::default(); gp];
    let mut sum_sq = vec![KahanSum::default(); gp];
    let mut used = 0usize;
    let mut wrap_flagged = 0usize;
    let mut aborted = 0usize;
    for (row, touched) in &per_path {
        match row {
            Some(sq) => {
                if *touched {
                    wrap_flagged += 1;
                }
                used += 1;
                for (g, d2) in sq.iter().enumerate() {
                    sum[g].add(*d2);
                    sum_sq[g].add(d2 * d2);
                }
            }
            None => aborted += 1,
        }
    }
    if used < 2 {
        return Err(Error::TooFewSamples { what: "surviving paths", need: 2, got: used });
    }

    let nf = used as f64;
    let rows: Vec<MsdRow> = (0..gp)
        .map(|g| {
            let t = t_grid[g];
            let m = sum[g].value() / nf;
            let var = (sum_sq[g].value() / nf - m * m).max(0.0) * nf / (nf - 1.0);
            MsdRow { t, msd_over_t: m / t, se_over_t: (var / nf).sqrt() / t }
        })
        .collect();

    let params = effective_params(spec, mig)?;
    let short_time_rate =
        triple_mean(spec, |a, b, c| mig.m_eff() * (a + c) / mig.n3_of(a, b, c))?;
    let stability_bound =
        spec.k * spec.k / (params.c * params.c) * sup_quadratic_rate(spec, mig);
    let max_ratio = rows.iter().map(|r| r.msd_over_t).fold(0.0, f64::max);

    let tail = &rows[rows.len() / 2..];
    let upward_trend = if tail.len() >= 3 {
        let xs: Vec<f64> = tail.iter().map(|r| r.t).collect();
        let ys: Vec<f64> = tail.iter().map(|r| r.msd_over_t).collect();
        let (slope, se) = ols_slope(&xs, &ys)?;
        slope > 2.0 * se && slope > 0.0
    } else {
        false
    };

    Ok(MsdReport {
        rows,
        paths: used,
        window_len: window.len,
        sigma2: params.sigma2,
        short_time_rate,
        stability_bound,
        max_ratio,
        upward_trend,
        wrap_flagged,
        aborted,
    })
}
