//! Exact merge-time law of two dual walks on a small ring.
//!
//! The pair of positions plus one absorbing "merged" state forms a finite
//! continuous-time chain with L^2 + 1 states: each walk keeps its own
//! neighbor rates, and co-located pairs feed the absorbing state at rate
//! 1/(lambda N(x)). Uniformization turns the chain's marginal at time t
//! into a Poisson mixture of powers of a stochastic matrix with a
//! certified truncation error, so the returned probability is exact to
//! the tolerance used everywhere else in the crate.

use crate::env::{Boundary, Environment, Migration};
use crate::error::{Error, Result};
use crate::kernel::{MAX_PAIR_DENSE, UNIFORMIZATION_TOL};
use crate::walks::jump_rates;

/// P(the pair launched from (x, y) has merged by time t).
pub fn exact_merge_probability(
    env: &Environment,
    mig: Migration,
    lambda: f64,
    t: f64,
    x: i64,
    y: i64,
) -> Result<f64> {
    if env.boundary() != Boundary::Ring {
        return Err(Error::RingRequired("the exact pair merge chain"));
    }
    let l = env.len();
    if l > MAX_PAIR_DENSE {
        return Err(Error::RingTooLarge {
            len: l,
            cap: MAX_PAIR_DENSE,
            what: "the exact pair merge chain",
        });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParams(format!("merge level lambda {lambda} must be positive")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("time {t} must be >= 0")));
    }

    let mut rate_left = Vec::with_capacity(l);
    let mut rate_right = Vec::with_capacity(l);
    for site in 0..l {
        let r = jump_rates(env, site as i64, mig)?;
        rate_left.push(r.left);
        rate_right.push(r.right);
    }
    let merge_rate: Vec<f64> = env.sizes().iter().map(|&s| 1.0 / (lambda * s)).collect();

    // uniformization rate: largest total exit over pair states
    let max_exit = (0..l)
        .map(|i| rate_left[i] + rate_right[i])
        .fold(0.0f64, f64::max);
    let max_merge = merge_rate.iter().copied().fold(0.0f64, f64::max);
    let uni = 2.0 * max_exit + max_merge;
    if t == 0.0 || uni == 0.0 {
        return Ok(0.0);
    }

    let states = l * l;
    let absorbed = states; // last slot
    let idx = |i: usize, j: usize| i * l + j;
    let xi = (x.rem_euclid(l as i64)) as usize;
    let yi = (y.rem_euclid(l as i64)) as usize;

    let weights = poisson(uni * t)?;
    let mut v = vec![0.0f64; states + 1];
    v[idx(xi, yi)] = 1.0;
    let mut next = vec![0.0f64; states + 1];
    let mut prob = weights[0] * v[absorbed];
    for w in &weights[1..] {
        next.iter_mut().for_each(|e| *e = 0.0);
        next[absorbed] = v[absorbed];
        for i in 0..l {
            let il = if i == 0 { l - 1 } else { i - 1 };
            let ir = if i + 1 == l { 0 } else { i + 1 };
            for j in 0..l {
                let mass = v[idx(i, j)];
                if mass == 0.0 {
                    continue;
                }
                let jl = if j == 0 { l - 1 } else { j - 1 };
                let jr = if j + 1 == l { 0 } else { j + 1 };
                let c = if i == j { merge_rate[i] } else { 0.0 };
                let exit = rate_left[i] + rate_right[i] + rate_left[j] + rate_right[j] + c;
                next[idx(i, j)] += mass * (1.0 - exit / uni);
                next[idx(il, j)] += mass * rate_left[i] / uni;
                next[idx(ir, j)] += mass * rate_right[i] / uni;
                next[idx(i, jl)] += mass * rate_left[j] / uni;
                next[idx(i, jr)] += mass * rate_right[j] / uni;
                if c > 0.0 {
                    next[absorbed] += mass * c / uni;
                }
            }
        }
        std::mem::swap(&mut v, &mut next);
        prob += w * v[absorbed];
    }
    Ok(prob.min(1.0))
}

fn poisson(mu: f64) -> Result<Vec<f64>> {
    crate::kernel::poisson_weights(mu, UNIFORMIZATION_TOL)
}
