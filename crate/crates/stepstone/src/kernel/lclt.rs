//! Local-CLT error tables: sup over diffusive windows of the distance
//! between the rescaled quenched kernel and the limiting Gaussian.

use super::{build_generator, gaussian_kernel, heat_kernel, Sources, MAX_SINGLE_RING};
use crate::env::{effective_params, sample_environment, Boundary, EnvironmentSpec, Migration};
use crate::error::{Error, Result};
use crate::seeds::child_seed;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LcltRow {
    /// Diffusive scale n (times run to n*t).
    pub n: f64,
    pub ring_len: usize,
    /// sup over t in the grid and |x|,|y| <= R sqrt(n) of
    /// |sqrt(n) g_{nt}(x,y)/pi(y) - G_t((x-y)/sqrt(n))|.
    pub sup_error: f64,
}

/// Anti-wrap ring length: big enough that mass cannot travel around the
/// ring within the probed horizon, so the ring is indistinguishable from
/// the infinite lattice.
pub fn anti_wrap_ring(sigma2_upper: f64, n: f64, t_max: f64, r: f64) -> usize {
    (10.0 * (sigma2_upper * n * t_max).sqrt() + 2.0 * r * n.sqrt()).ceil() as usize
}

/// Compute the sup LCLT error for each scale in `ns`.
///
/// For each n a fresh ring environment is drawn from the family (seeded by
/// `seed` and the position in the list), sized by the anti-wrap rule, and
/// the kernel is evaluated at times n*t for t on a uniform grid in
/// [t_lo, t_hi]. The Gaussian reference uses the family's exact sigma2.
pub fn local_clt_error(
    spec: &EnvironmentSpec,
    mig: Migration,
    ns: &[f64],
    t_lo: f64,
    t_hi: f64,
    t_points: usize,
    r: f64,
    seed: u64,
) -> Result<Vec<LcltRow>> {
    if !(t_lo > 0.0) || !(t_hi >= t_lo) {
        return Err(Error::InvalidParams(format!("bad time range [{t_lo}, {t_hi}]")));
    }
    if t_points == 0 {
        return Err(Error::InvalidParams("need at least one time point".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParams(format!("window radius R = {r} must be positive")));
    }
    let params = effective_params(spec, mig)?;
    let sigma2 = params.sigma2;
    let sigma2_upper = params.sigma2_bound();

    let mut rows = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        if !(n >= 1.0) {
            return Err(Error::InvalidParams(format!("scale n = {n} must be >= 1")));
        }
        let mut ring_len = anti_wrap_ring(sigma2_upper, n, t_hi, r);
        if let crate::env::Family::Periodic { pattern } = &spec.family {
            let period = pattern.len().max(1);
            ring_len = ring_len.div_ceil(period) * period;
        }
        if ring_len > MAX_SINGLE_RING {
            return Err(Error::RingTooLarge {
                len: ring_len,
                cap: MAX_SINGLE_RING,
                what: "anti-wrap ring for the local CLT",
            });
        }
        let env_spec = EnvironmentSpec::new(
            spec.family.clone(),
            spec.k,
            ring_len,
            Boundary::Ring,
        )?;
        let env = sample_environment(&env_spec, child_seed(seed, "lclt-env", i as u64))?;
        let gen = build_generator(&env, mig)?;

        let radius = (r * n.sqrt()).floor() as i64;
        let sources: Vec<i64> = (-radius..=radius).collect();
        let mut kernel = heat_kernel(&gen, 0.0, Sources::Sites(sources.clone()))?;
        let pi = env.reversible_pi(mig);
        let li = ring_len as i64;

        let mut sup_error = 0.0f64;
        for j in 0..t_points {
            let t = if t_points == 1 {
                t_lo
            } else {
                t_lo + (t_hi - t_lo) * j as f64 / (t_points - 1) as f64
            };
            kernel.continue_to(&gen, n * t)?;
            for &x in &sources {
                let row = kernel.row(x)?;
                for &y in &sources {
                    let yi = y.rem_euclid(li) as usize;
                    let rescaled = n.sqrt() * row[yi] / pi[yi];
                    let gauss = gaussian_kernel((x - y) as f64 / n.sqrt(), sigma2 * t);
                    sup_error = sup_error.max((rescaled - gauss).abs());
                }
            }
        }
        rows.push(LcltRow { n, ring_len, sup_error });
    }
    Ok(rows)
}
