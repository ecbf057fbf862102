//! The environment seen from two walks: jump rates of the together-position
//! process and its pi^2 detailed balance.
//!
//! When both walks sit at x they split at twice the single-walk jump rate;
//! the pair then wanders until the walks first share a site again, at some
//! y, with hitting law E(x +- 1 -> y). Composing split rates with hitting
//! laws gives the meeting-position chain q(x, y), which is reversible with
//! respect to pi^2.

use super::{GeneratorMatrix, MAX_PAIR_DENSE};
use crate::env::{Environment, Migration};
use crate::error::{Error, Result};
use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct MeetingChain {
    /// L x L rate matrix of the meeting-position process; rows sum to 0.
    pub q: DMatrix<f64>,
    /// Hitting table: row index 2x+s encodes the split start (x, x+1) for
    /// s = 0 and (x, x-1) for s = 1; column y is the probability that the
    /// walks first re-meet at y.
    pub hitting: DMatrix<f64>,
    /// max |pi^2(x) q(x,y) - pi^2(y) q(y,x)|.
    pub db_residual: f64,
    /// sup norm of (normalized pi^2) Q, the left-null-vector residual.
    pub stationary_residual: f64,
    /// Largest |row sum - 1| of the hitting table (absorption is certain).
    pub hitting_defect: f64,
}

/// Build the meeting chain by solving, for every target y, the absorbing
/// linear system of two independent walks on the ring.
pub fn meeting_chain(env: &Environment, mig: Migration) -> Result<MeetingChain> {
    let gen = super::build_generator(env, mig)?;
    let l = gen.len();
    if l > MAX_PAIR_DENSE {
        return Err(Error::RingTooLarge { len: l, cap: MAX_PAIR_DENSE, what: "meeting-chain ring" });
    }

    // Off-diagonal pair states, indexed densely.
    let mut index = vec![usize::MAX; l * l];
    let mut states = Vec::with_capacity(l * l - l);
    for a in 0..l {
        for b in 0..l {
            if a != b {
                index[a * l + b] = states.len();
                states.push((a, b));
            }
        }
    }
    let m = states.len();

    // A = pair generator restricted to off-diagonal states; B(s, y) = rate
    // from state s onto the diagonal site y.
    let mut a_mat = DMatrix::<f64>::zeros(m, m);
    let mut b_mat = DMatrix::<f64>::zeros(m, l);
    let rl = gen.rate_left();
    let rr = gen.rate_right();
    for (s, &(a, b)) in states.iter().enumerate() {
        let moves = [
            ((a + 1) % l, b, rr[a]),
            ((a + l - 1) % l, b, rl[a]),
            (a, (b + 1) % l, rr[b]),
            (a, (b + l - 1) % l, rl[b]),
        ];
        let mut exit = 0.0;
        for (na, nb, rate) in moves {
            exit += rate;
            if na == nb {
                b_mat[(s, na)] += rate;
            } else {
                a_mat[(s, index[na * l + nb])] += rate;
            }
        }
        a_mat[(s, s)] -= exit;
    }

    // Hitting probabilities H solve A H = -B.
    let lu = a_mat.lu();
    let h = lu
        .solve(&(-b_mat))
        .ok_or_else(|| Error::InvalidParams("singular absorbing system".into()))?;

    let mut hitting = DMatrix::<f64>::zeros(2 * l, l);
    for x in 0..l {
        let up = index[x * l + (x + 1) % l];
        let dn = index[x * l + (x + l - 1) % l];
        for y in 0..l {
            hitting[(2 * x, y)] = h[(up, y)];
            hitting[(2 * x + 1, y)] = h[(dn, y)];
        }
    }
    let hitting_defect = (0..2 * l)
        .map(|r| ((0..l).map(|y| hitting[(r, y)]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    // q(x, y) = sum_z 2 j(x, x+z) E_{(x, x+z)}[first meet at y].
    let mut q = DMatrix::<f64>::zeros(l, l);
    for x in 0..l {
        for y in 0..l {
            if y == x {
                continue;
            }
            q[(x, y)] = 2.0 * (rr[x] * hitting[(2 * x, y)] + rl[x] * hitting[(2 * x + 1, y)]);
        }
        let row_sum: f64 = (0..l).filter(|&y| y != x).map(|y| q[(x, y)]).sum();
        q[(x, x)] = -row_sum;
    }

    let pi = gen.pi();
    let pi2: Vec<f64> = pi.iter().map(|p| p * p).collect();
    let mut db_residual = 0.0f64;
    for x in 0..l {
        for y in 0..l {
            db_residual = db_residual.max((pi2[x] * q[(x, y)] - pi2[y] * q[(y, x)]).abs());
        }
    }
    let z: f64 = pi2.iter().sum();
    let mut stationary_residual = 0.0f64;
    for y in 0..l {
        let mut acc = 0.0;
        for x in 0..l {
            acc += pi2[x] / z * q[(x, y)];
        }
        stationary_residual = stationary_residual.max(acc.abs());
    }

    Ok(MeetingChain { q, hitting, db_residual, stationary_residual, hitting_defect })
}

impl MeetingChain {
    /// Normalized pi^2 law, the chain's stationary vector.
    pub fn stationary_pi2(gen: &GeneratorMatrix) -> Vec<f64> {
        let pi2: Vec<f64> = gen.pi().iter().map(|p| p * p).collect();
        let z: f64 = pi2.iter().sum();
        pi2.iter().map(|p| p / z).collect()
    }
}
