//! Windowed averages of the reversible weight field at diffusive scale.

use super::{Boundary, Environment, Migration};
use crate::error::{Error, Result};

/// Average of a per-site step function over the real interval
/// [c - r, c + r], where site k owns the cell [k-1/2, k+1/2].
///
/// Cell-overlap weights make the result exact for the step function: the
/// weights sum to 2r, a constant field averages to itself exactly, and the
/// value is continuous and piecewise linear in c.
pub(crate) fn cell_average(values: &[f64], c: f64, r: f64, boundary: Boundary) -> Result<f64> {
    let l = values.len();
    let k_lo = (c - r - 0.5).floor() as i64 + 1;
    let k_hi = (c + r + 0.5).ceil() as i64 - 1;
    match boundary {
        Boundary::Ring => {
            if (k_hi - k_lo + 1) as usize > l {
                return Err(Error::RingTooSmall { len: l, need: (k_hi - k_lo + 1) as usize });
            }
        }
        Boundary::Segment => {
            if k_lo < 0 {
                return Err(Error::OutOfWindow { site: k_lo, len: l });
            }
            if k_hi >= l as i64 {
                return Err(Error::OutOfWindow { site: k_hi, len: l });
            }
        }
    }
    let mut acc = 0.0;
    for k in k_lo..=k_hi {
        let lo = (k as f64 - 0.5).max(c - r);
        let hi = (k as f64 + 0.5).min(c + r);
        if hi > lo {
            acc += (hi - lo) * values[k.rem_euclid(l as i64) as usize];
        }
    }
    Ok(acc / (2.0 * r))
}

/// Diffusive-window mean of the reversible weights: the average of pi over
/// the interval of half-width delta*sqrt(n) centered at site sqrt(n)*x.
///
/// Constant environments give exactly 1 at every admissible (n, delta, x),
/// and the map x -> value is K^4/delta-Lipschitz.
pub fn pi_window_average(
    env: &Environment,
    mig: Migration,
    n: f64,
    delta: f64,
    x: f64,
) -> Result<f64> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParams(format!("scale n = {n} must be positive")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParams(format!("half-width delta = {delta} must be positive")));
    }
    let pi = env.reversible_pi(mig);
    cell_average(&pi, n.sqrt() * x, delta * n.sqrt(), env.boundary())
}
