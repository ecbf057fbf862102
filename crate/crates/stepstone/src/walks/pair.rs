//! Two independent walks with an exponentially-killed weighted clock: the
//! coalescing pair. While the walks share a colony the clock L grows at
//! rate 1/(lambda N(site)); the pair merges the instant L crosses an
//! independent unit exponential, solved in closed form inside the holding
//! interval, so no discretization error enters anywhere.

use super::{scaled_window, RateTable, Walker};
use crate::env::{sample_environment, Boundary, Environment, EnvironmentSpec, Migration};
use crate::error::{Error, Result};
use crate::seeds::{child_seed, rng_from};
use crate::stats::{Ecdf, KahanSum};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One maximal interval during which the two walks shared a colony.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeetingSpell {
    pub start: f64,
    pub duration: f64,
    /// Wrapped window index of the shared colony.
    pub site: usize,
    /// 1/N at that colony, cached at record time.
    pub inv_size: f64,
}

/// All meeting spells of one pair run, in time order.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MeetingRecord {
    pub window_len: usize,
    pub spells: Vec<MeetingSpell>,
}

impl MeetingRecord {
    /// Total time the walks spent together.
    pub fn total_together(&self) -> f64 {
        let mut s = KahanSum::default();
        for sp in &self.spells {
            s.add(sp.duration);
        }
        s.value()
    }

    /// Integral of 1/N over the together time (the clock L without the
    /// 1/lambda factor).
    pub fn weighted_together(&self) -> f64 {
        let mut s = KahanSum::default();
        for sp in &self.spells {
            s.add(sp.duration * sp.inv_size);
        }
        s.value()
    }

    /// Merge time the spells imply for the given rate scale and unit
    /// exponential: the instant the running integral of 1/(lambda N)
    /// crosses `clock`. The same record answers for any lambda, which is
    /// how one trajectory set serves several rate scales.
    pub fn coalescence_time(&self, lambda: f64, clock: f64) -> Option<f64> {
        if !(lambda > 0.0) || !(clock > 0.0) {
            return None;
        }
        // mirrors the accumulation of the live run operation for operation,
        // so replaying a coalesced record reproduces its merge time exactly
        let inv_lambda = 1.0 / lambda;
        let mut acc = KahanSum::default();
        for sp in &self.spells {
            let rate = sp.inv_size * inv_lambda;
            let need = ((clock - acc.value()) / rate).max(0.0);
            if need <= sp.duration {
                return Some(sp.start + need);
            }
            acc.add(sp.duration * rate);
        }
        None
    }

    /// Together-time mass per window site.
    pub fn site_histogram(&self) -> Vec<f64> {
        let mut hist = vec![0.0; self.window_len];
        for sp in &self.spells {
            hist[sp.site] += sp.duration;
        }
        hist
    }
}

/// Final state of one pair run.
///
/// Positions are unwrapped lattice coordinates; once the pair has merged
/// both fields report the surviving lineage. The weighted clock L is frozen
/// at the merge (where it equals `clock` exactly); `together_time` counts
/// shared-colony time up to the merge or the horizon.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DualPairState {
    pub x1: i64,
    pub x2: i64,
    pub weighted_local_time: f64,
    pub together_time: f64,
    /// The unit exponential the clock races against.
    pub clock: f64,
    pub coalesced_at: Option<f64>,
    pub lambda: f64,
    pub t_end: f64,
    pub boundary_touched: bool,
}

/// Two walks plus the merge clock, exactly event-driven.
///
/// `lambda` scales the merge clock: while the walks share a colony of size
/// N the clock grows at rate 1/(lambda N). An infinite `lambda` disables
/// merging, which is the mode used for pure meeting-time records. After the
/// merge only the first walk keeps running, to the horizon.
pub fn simulate_pair(
    env: &Environment,
    x1: i64,
    x2: i64,
    lambda: f64,
    mig: Migration,
    t_end: f64,
    seed: u64,
) -> Result<(DualPairState, MeetingRecord)> {
    pair_core(env, x1, x2, lambda, mig, t_end, seed, true)
}

pub(crate) fn pair_core(
    env: &Environment,
    x1: i64,
    x2: i64,
    lambda: f64,
    mig: Migration,
    t_end: f64,
    seed: u64,
    continue_after_merge: bool,
) -> Result<(DualPairState, MeetingRecord)> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParams(format!("horizon {t_end} must be positive and finite")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("rate scale lambda = {lambda} must be positive")));
    }
    let table = RateTable::new(env, mig)?;
    let mut w1 = Walker::new(&table, x1, child_seed(seed, "pair-w1", 0))?;
    let mut w2 = Walker::new(&table, x2, child_seed(seed, "pair-w2", 0))?;
    let clock: f64 = rng_from(child_seed(seed, "pair-clock", 0)).sample(Exp1);
    let inv_lambda = if lambda.is_finite() { 1.0 / lambda } else { 0.0 };
    let sizes = env.sizes();

    let mut spells: Vec<MeetingSpell> = Vec::new();
    let mut l_acc = KahanSum::default();
    let mut together = KahanSum::default();
    let mut coalesced_at: Option<f64> = None;
    let mut t = 0.0;
    // (start, site, 1/N) of the open spell, if the walks currently share a colony.
    let mut open: Option<(f64, usize, f64)> = if w1.xi == w2.xi {
        Some((0.0, w1.xi, 1.0 / sizes[w1.xi]))
    } else {
        None
    };

    loop {
        let next_jump = w1.t_next.min(w2.t_next);
        let horizon = next_jump.min(t_end);
        if let Some((s0, site, inv)) = open {
            let rate = inv * inv_lambda;
            if rate > 0.0 {
                let need = ((clock - l_acc.value()) / rate).max(0.0);
                if t + need <= horizon {
                    // a spell always spans one holding interval, so s0 == t
                    // and recording `need` keeps the record replayable
                    // bit-for-bit via coalescence_time
                    spells.push(MeetingSpell { start: s0, duration: need, site, inv_size: inv });
                    together.add(need);
                    coalesced_at = Some(t + need);
                    break;
                }
            }
            l_acc.add((horizon - t) * rate);
            together.add(horizon - t);
        }
        if next_jump > t_end {
            if let Some((s0, site, inv)) = open.take() {
                spells.push(MeetingSpell { start: s0, duration: t_end - s0, site, inv_size: inv });
            }
            break;
        }
        if w1.t_next <= w2.t_next {
            w1.jump();
        } else {
            w2.jump();
        }
        t = next_jump;
        let now_together = w1.xi == w2.xi;
        match (open, now_together) {
            (Some((s0, site, inv)), false) => {
                spells.push(MeetingSpell { start: s0, duration: t - s0, site, inv_size: inv });
                open = None;
            }
            (None, true) => {
                open = Some((t, w1.xi, 1.0 / sizes[w1.xi]));
            }
            _ => {}
        }
    }

    let (final_x1, final_x2) = if coalesced_at.is_some() {
        if continue_after_merge {
            while w1.t_next <= t_end {
                w1.jump();
            }
        }
        (w1.x, w1.x)
    } else {
        (w1.x, w2.x)
    };

    let state = DualPairState {
        x1: final_x1,
        x2: final_x2,
        weighted_local_time: if coalesced_at.is_some() { clock } else { l_acc.value() },
        together_time: together.value(),
        clock,
        coalesced_at,
        lambda,
        t_end,
        boundary_touched: w1.touched || w2.touched,
    };
    Ok((state, MeetingRecord { window_len: env.len(), spells }))
}

/// Pooled meeting-time estimate of the together-time functionals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaEstimate {
    /// Duration-weighted mean of 1/N over all meeting spells.
    pub gamma: f64,
    pub total_together: f64,
    pub spell_count: usize,
    /// Together-time mass per window site; meaningful when all records
    /// share one environment.
    pub histogram: Vec<f64>,
}

/// Duration-weighted mean of 1/N at the shared colony, pooled over the
/// records. All records must come from windows of one length; the site
/// histogram is only meaningful when they share the same environment.
pub fn gamma_meeting_estimator(records: &[MeetingRecord]) -> Result<GammaEstimate> {
    let Some(first) = records.first() else {
        return Err(Error::NoMeetings);
    };
    let wl = first.window_len;
    let mut num = KahanSum::default();
    let mut den = KahanSum::default();
    let mut hist = vec![0.0; wl];
    let mut spell_count = 0usize;
    for r in records {
        if r.window_len != wl {
            return Err(Error::LengthMismatch { expected: wl, got: r.window_len });
        }
        for sp in &r.spells {
            num.add(sp.duration * sp.inv_size);
            den.add(sp.duration);
            hist[sp.site] += sp.duration;
            spell_count += 1;
        }
    }
    if !(den.value() > 0.0) {
        return Err(Error::NoMeetings);
    }
    Ok(GammaEstimate {
        gamma: num.value() / den.value(),
        total_together: den.value(),
        spell_count,
        histogram: hist,
    })
}

/// Meeting records from fresh windows until the pooled together time
/// reaches `target_together` (or `max_windows` runs out; the caller checks
/// the accumulated total). Both walks start at the window center with
/// merging disabled, so every spell up to the horizon is recorded.
pub fn accumulate_meeting_time(
    spec: &EnvironmentSpec,
    mig: Migration,
    window_len: usize,
    t_sim: f64,
    target_together: f64,
    max_windows: usize,
    seed: u64,
) -> Result<Vec<MeetingRecord>> {
    if max_windows == 0 {
        return Err(Error::TooFewSamples { what: "meeting windows", need: 1, got: 0 });
    }
    let mut len = window_len.max(3);
    if let crate::env::Family::Periodic { pattern } = &spec.family {
        len = len.div_ceil(pattern.len()) * pattern.len();
    }
    let window = EnvironmentSpec::new(spec.family.clone(), spec.k, len, spec.boundary)?;
    let start = (len / 2) as i64;
    let mut records = Vec::new();
    let mut total = 0.0;
    for r in 0..max_windows {
        let env = sample_environment(&window, child_seed(seed, "gamma-env", r as u64))?;
        let (_, record) = pair_core(
            &env,
            start,
            start,
            f64::INFINITY,
            mig,
            t_sim,
            child_seed(seed, "gamma-walk", r as u64),
            false,
        )?;
        total += record.total_together();
        records.push(record);
        if total >= target_together {
            break;
        }
    }
    Ok(records)
}

/// Merge-time sample for one scaling level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoalescenceRow {
    /// Scaling parameter: rate scale sqrt(n), time scale n, space scale sqrt(n).
    pub n: f64,
    pub lambda: f64,
    pub window_len: usize,
    /// Replicates attempted.
    pub replicates: usize,
    pub coalesced: usize,
    /// Ring replicates whose walks wandered half the window (kept).
    pub wrap_flagged: usize,
    /// Segment replicates that touched an edge (dropped).
    pub aborted: usize,
    /// Rescaled merge times T_c / n of coalesced replicates, ascending.
    pub times: Vec<f64>,
}

impl CoalescenceRow {
    /// Replicates contributing to the distribution.
    pub fn effective_replicates(&self) -> usize {
        self.replicates - self.aborted
    }

    /// Empirical CDF of the rescaled merge time. Censored replicates (no
    /// merge by the horizon) sit at +infinity, so the CDF plateaus below 1.
    pub fn ecdf(&self) -> Ecdf {
        let mut v = self.times.clone();
        v.extend(std::iter::repeat(f64::INFINITY).take(self.effective_replicates() - self.coalesced));
        Ecdf::new(v)
    }
}

/// Merge-time distributions across scaling levels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoalescenceStats {
    pub offset: f64,
    pub t_max: f64,
    pub rows: Vec<CoalescenceRow>,
}

/// Distribution of the rescaled merge time at each scaling level `n`:
/// starts round(sqrt(n) * offset) apart, rate scale sqrt(n), horizon
/// t_max * n, fresh window per replicate.
pub fn coalescence_stats(
    spec: &EnvironmentSpec,
    mig: Migration,
    offset: f64,
    n_list: &[f64],
    replicates: usize,
    t_max: f64,
    seed: u64,
) -> Result<CoalescenceStats> {
    spec.validate()?;
    if n_list.is_empty() {
        return Err(Error::InvalidParams("empty scaling list".into()));
    }
    for pair in n_list.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::InvalidParams("scaling list must be strictly increasing".into()));
        }
    }
    if n_list[0] < 1.0 || n_list.iter().any(|n| !n.is_finite()) {
        return Err(Error::InvalidParams("scaling levels must be finite and at least 1".into()));
    }
    if replicates == 0 {
        return Err(Error::TooFewSamples { what: "pair replicates", need: 1, got: 0 });
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParams(format!("t_max {t_max} must be positive and finite")));
    }
    if !offset.is_finite() {
        return Err(Error::InvalidParams("offset must be finite".into()));
    }

    let mut rows = Vec::with_capacity(n_list.len());
    for (ni, &n) in n_list.iter().enumerate() {
        let lambda = n.sqrt();
        let horizon = t_max * n;
        let sep = (offset * n.sqrt()).round() as i64;
        let window = scaled_window(spec, mig, horizon, sep.unsigned_abs() as usize)?;
        let start1 = (window.len / 2) as i64;
        let start2 = start1 + sep;
        let env_master = child_seed(seed, "coal-env", ni as u64);
        let walk_master = child_seed(seed, "coal-walk", ni as u64);
        let outcomes: Vec<(Option<f64>, bool)> = (0..replicates)
            .into_par_iter()
            .map(|r| -> Result<(Option<f64>, bool)> {
                let env = sample_environment(&window, child_seed(env_master, "rep", r as u64))?;
                let (state, _) = pair_core(
                    &env,
                    start1,
                    start2,
                    lambda,
                    mig,
                    horizon,
                    child_seed(walk_master, "rep", r as u64),
                    false,
                )?;
                Ok((state.coalesced_at, state.boundary_touched))
            })
            .collect::<Result<_>>()?;

        let drop_touched = window.boundary == Boundary::Segment;
        let mut times = Vec::new();
        let mut wrap_flagged = 0usize;
        let mut aborted = 0usize;
        for (tc, touched) in outcomes {
            if touched {
                if drop_touched {
                    aborted += 1;
                    continue;
                }
                wrap_flagged += 1;
            }
            if let Some(tc) = tc {
                times.push(tc / n);
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite merge times"));
        rows.push(CoalescenceRow {
            n,
            lambda,
            window_len: window.len,
            replicates,
            coalesced: times.len(),
            wrap_flagged,
            aborted,
            times,
        });
    }
    Ok(CoalescenceStats { offset, t_max, rows })
}
