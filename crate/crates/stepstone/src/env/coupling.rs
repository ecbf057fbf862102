//! Correlation-inequality coupling: for X with a finite law and a
//! non-decreasing non-negative g, the g-size-biased copy of X constructed
//! through inverse CDFs from one shared uniform dominates X pointwise,
//! which yields E[X g(X)] >= E[X] E[g(X)].

use crate::error::{Error, Result};
use crate::seeds::rng_from;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingReport {
    pub trials: usize,
    /// Exact E[X g(X)] under the empirical law.
    pub e_xy: f64,
    /// Exact E[X] E[g(X)].
    pub e_x_e_y: f64,
    pub e_x: f64,
    pub e_y: f64,
    /// Exact mean of the size-biased copy; equals e_xy / e_y.
    pub e_x_tilde: f64,
    /// True if the biased CDF never exceeds the plain CDF on the support.
    pub cdf_dominates: bool,
    /// Trials where the coupled pair violated X-tilde >= X.
    pub domination_failures: usize,
    /// Smallest observed X-tilde - X over the trials (>= 0 when coupled).
    pub min_gap: f64,
    pub inequality_holds: bool,
}

impl CouplingReport {
    pub fn passed(&self) -> bool {
        self.cdf_dominates && self.domination_failures == 0 && self.inequality_holds
    }
}

/// Right-continuous generalized inverse of a discrete CDF:
/// quantile(u) = inf { v_i : F(v_i) > u }.
fn quantile(values: &[f64], cdf: &[f64], u: f64) -> f64 {
    let i = cdf.partition_point(|f| *f <= u);
    values[i.min(values.len() - 1)]
}

/// Check the coupling construction and the correlation inequality for the
/// empirical law of `x_values` (duplicates carry weight) and the map `g`.
pub fn coupling_check(
    x_values: &[f64],
    g: impl Fn(f64) -> f64,
    trials: usize,
    seed: u64,
) -> Result<CouplingReport> {
    if x_values.is_empty() {
        return Err(Error::InvalidParams("empty sample set".into()));
    }
    // Collapse the sample set to a sorted support with weights.
    let mut sorted = x_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let mut values = Vec::new();
    let mut probs = Vec::new();
    let w = 1.0 / sorted.len() as f64;
    for v in sorted {
        match values.last() {
            Some(&last) if last == v => *probs.last_mut().unwrap() += w,
            _ => {
                values.push(v);
                probs.push(w);
            }
        }
    }

    // Monotonicity scan over the support; the biasing also needs g >= 0.
    let ys: Vec<f64> = values.iter().map(|&v| g(v)).collect();
    for i in 1..ys.len() {
        if ys[i] < ys[i - 1] {
            return Err(Error::NonMonotone { x0: values[i - 1], x1: values[i] });
        }
    }
    if ys.iter().any(|y| *y < 0.0) {
        return Err(Error::InvalidParams(
            "size-biased coupling requires g >= 0 on the support".into(),
        ));
    }

    let e_x: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
    let e_y: f64 = ys.iter().zip(&probs).map(|(y, p)| y * p).sum();
    let e_xy: f64 = values.iter().zip(&ys).zip(&probs).map(|((v, y), p)| v * y * p).sum();
    if e_y <= 0.0 {
        return Err(Error::InvalidParams("E[g(X)] must be positive to size-bias".into()));
    }

    let cum = |ps: &[f64]| {
        let mut acc = 0.0;
        ps.iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect::<Vec<f64>>()
    };
    let cdf_x = cum(&probs);
    let biased: Vec<f64> = ys.iter().zip(&probs).map(|(y, p)| y * p / e_y).collect();
    let cdf_b = cum(&biased);
    let cdf_dominates = cdf_x
        .iter()
        .zip(&cdf_b)
        .all(|(fx, fb)| *fb <= *fx + 1e-14);
    let e_x_tilde: f64 = values.iter().zip(&biased).map(|(v, q)| v * q).sum();

    let mut rng = rng_from(seed);
    let mut domination_failures = 0usize;
    let mut min_gap = f64::INFINITY;
    for _ in 0..trials {
        let u: f64 = rng.random();
        let x = quantile(&values, &cdf_x, u);
        let x_tilde = quantile(&values, &cdf_b, u);
        let gap = x_tilde - x;
        min_gap = min_gap.min(gap);
        if gap < 0.0 {
            domination_failures += 1;
        }
    }
    if trials == 0 {
        min_gap = 0.0;
    }

    Ok(CouplingReport {
        trials,
        e_xy,
        e_x_e_y: e_x * e_y,
        e_x,
        e_y,
        e_x_tilde,
        cdf_dominates,
        domination_failures,
        min_gap,
        inequality_holds: e_xy + 1e-12 >= e_x * e_y,
    })
}
