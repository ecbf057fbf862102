//! Scale function of the quenched walk: the increasing function with
//! increments 1/(N(i)N(i+1)) that turns the walk into a martingale.

use super::{Boundary, Environment, Migration};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tabulated scale function on the window, F(0) = 0.
///
/// On a ring the table covers one wrap and `eval` extends it by the exact
/// cocycle F(qL + r) = q F(L) + F(r); on a segment it is defined for
/// 0 <= k <= L-1 only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaleFunction {
    f: Vec<f64>,
    /// F(L) including the wrap increment (ring); F(L-1) on a segment.
    total: f64,
    /// Per-site slope estimate; converges to <1/(N T1N)> on long windows.
    pub slope: f64,
    /// Largest harmonicity residual of F under the walk rates, over all
    /// sites where both neighbors exist.
    pub max_residual: f64,
    boundary: Boundary,
}

/// Build the scale function and verify harmonicity under the jump rates of
/// the given migration mechanism.
pub fn scale_function(env: &Environment, mig: Migration) -> Result<ScaleFunction> {
    let l = env.len();
    let s = env.sizes();
    let mut f = Vec::with_capacity(l);
    f.push(0.0);
    for i in 0..l - 1 {
        let df = 1.0 / (s[i] * s[i + 1]);
        f.push(f[i] + df);
    }
    let total = match env.boundary() {
        Boundary::Ring => f[l - 1] + 1.0 / (s[l - 1] * s[0]),
        Boundary::Segment => f[l - 1],
    };
    let slope = match env.boundary() {
        Boundary::Ring => total / l as f64,
        Boundary::Segment => f[l - 1] / (l - 1) as f64,
    };
    for k in 1..l {
        if !(f[k] > f[k - 1]) {
            return Err(Error::NonMonotone { x0: (k - 1) as f64, x1: k as f64 });
        }
    }

    // Residual of the martingale identity at x, from local increments:
    // rate_right(x) (F(x+1)-F(x)) + rate_left(x) (F(x-1)-F(x)).
    let m_eff = mig.m_eff();
    let residual_at = |x: usize| -> f64 {
        let xi = x as i64;
        let n3 = env.n3_reflecting(xi, mig);
        let rate_r = m_eff * env.size_wrapped(xi + 1) / n3;
        let rate_l = m_eff * env.size_wrapped(xi - 1) / n3;
        let df_r = 1.0 / (env.size_wrapped(xi) * env.size_wrapped(xi + 1));
        let df_l = 1.0 / (env.size_wrapped(xi - 1) * env.size_wrapped(xi));
        rate_r * df_r - rate_l * df_l
    };
    let interior: std::ops::Range<usize> = match env.boundary() {
        Boundary::Ring => 0..l,
        Boundary::Segment => 1..l - 1,
    };
    let max_residual = interior.map(|x| residual_at(x).abs()).fold(0.0, f64::max);

    Ok(ScaleFunction { f, total, slope, max_residual, boundary: env.boundary() })
}

impl ScaleFunction {
    pub fn window_len(&self) -> usize {
        self.f.len()
    }

    /// F at integer site k. Rings tile by the cocycle; segments reject
    /// sites outside the table.
    pub fn eval(&self, k: i64) -> Result<f64> {
        let l = self.f.len() as i64;
        match self.boundary {
            Boundary::Ring => {
                let q = k.div_euclid(l);
                let r = k.rem_euclid(l) as usize;
                Ok(q as f64 * self.total + self.f[r])
            }
            Boundary::Segment => {
                if k < 0 || k >= l {
                    Err(Error::OutOfWindow { site: k, len: self.f.len() })
                } else {
                    Ok(self.f[k as usize])
                }
            }
        }
    }

    /// The tabulated values F(0..L-1).
    pub fn table(&self) -> &[f64] {
        &self.f
    }

    /// F(L) on a ring (one full wrap), F(L-1) on a segment.
    pub fn total(&self) -> f64 {
        self.total
    }
}
