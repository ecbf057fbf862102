//! Exact finite-state computations for the quenched walk: generator
//! matrices, heat kernels via uniformization with certified truncation,
//! local-CLT error tables, Dirichlet-form and on-diagonal bounds, and the
//! two-walk meeting chain.

mod bounds;
mod lclt;
mod meeting;
mod pair;

pub use bounds::{
    dirichlet_form_check, kernel_bound_check, mixing_horizon, DirichletCheck, KernelBoundReport,
};
pub use lclt::{anti_wrap_ring, local_clt_error, LcltRow};
pub use meeting::{meeting_chain, MeetingChain};
pub use pair::{PairChain, PairDistribution};

use crate::env::{Boundary, Environment, Migration};
use crate::error::{Error, Result};
use crate::stats::KahanSum;
use rayon::prelude::*;

/// Largest ring for single-walk kernel work.
pub const MAX_SINGLE_RING: usize = 4096;
/// Largest ring for the dense two-walk meeting chain (L^2 states).
pub const MAX_PAIR_DENSE: usize = 64;
/// Per-call truncation tolerance of uniformization, in total variation.
pub const UNIFORMIZATION_TOL: f64 = 1e-12;

/// ln(k!) to near machine precision: direct product for small k, Stirling
/// series with four correction terms above.
fn ln_factorial(k: usize) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k <= 20 {
        let mut f = 1.0f64;
        for j in 2..=k {
            f *= j as f64;
        }
        return f.ln();
    }
    let x = k as f64;
    let x2 = x * x;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x * x2 * x2)
        - 1.0 / (1680.0 * x * x2 * x2 * x2)
}

/// Poisson(mu) probabilities p_0..p_K with sum >= 1 - tol and K >= mu.
/// Each term is evaluated directly in log space, so the per-weight relative
/// error stays at machine level no matter how large mu is. Past the mode the
/// pmf eventually underflows to exact zero; stopping there truncates a tail
/// below 1e-300, so the certificate holds even when rounding keeps the
/// computed cumulative just shy of 1 - tol.
pub(crate) fn poisson_weights(mu: f64, tol: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParams(format!("Poisson mean {mu} must be >= 0")));
    }
    if mu > 2e7 {
        return Err(Error::BeyondHorizon { t: mu, horizon: 2e7 });
    }
    if mu == 0.0 {
        return Ok(vec![1.0]);
    }
    let ln_mu = mu.ln();
    let mut w = Vec::with_capacity((mu + 10.0 * mu.sqrt() + 32.0) as usize);
    let mut cum = KahanSum::default();
    let mut k = 0usize;
    loop {
        let p = (k as f64 * ln_mu - mu - ln_factorial(k)).exp();
        w.push(p);
        cum.add(p);
        if k as f64 >= mu && (cum.value() >= 1.0 - tol || p == 0.0) {
            while w.len() > 1 && w.last() == Some(&0.0) {
                w.pop();
            }
            // Normalize to an exactly convex combination; the rescaling is
            // within tol + machine rounding of 1, so the certificate stands.
            let s = cum.value();
            for wi in &mut w {
                *wi /= s;
            }
            return Ok(w);
        }
        k += 1;
    }
}

/// Tail probabilities T_k = P(Pois(mu) > k) for k = 0..K, by suffix-summing
/// the pmf from the top so small tails keep full relative accuracy.
pub(crate) fn poisson_tails(mu: f64, tol: f64) -> Result<Vec<f64>> {
    let w = poisson_weights(mu, tol * 1e-3)?;
    let mut tails = vec![0.0; w.len()];
    // T_k = sum_{j>k} p_j plus the truncated-tail remainder (<= tol*1e-3).
    let mut suffix = KahanSum::default();
    for k in (0..w.len()).rev() {
        tails[k] = suffix.value();
        suffix.add(w[k]);
    }
    Ok(tails)
}

/// Nearest-neighbor rate matrix of one walk on a ring environment.
///
/// Rates: x -> x+1 at m_eff N(x+1)/N3(x), x -> x-1 at m_eff N(x-1)/N3(x),
/// reversible with respect to pi(x) = N(x) N3(x) (window-normalized).
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    env: Environment,
    mig: Migration,
    rate_left: Vec<f64>,
    rate_right: Vec<f64>,
    exit: Vec<f64>,
    /// Precomputed 1 - exit/lambda, the stay probability per
    /// uniformization step.
    stay: Vec<f64>,
    pi: Vec<f64>,
    /// Uniformization rate: the maximum total exit rate.
    pub lambda: f64,
}

pub fn build_generator(env: &Environment, mig: Migration) -> Result<GeneratorMatrix> {
    if env.boundary() != Boundary::Ring {
        return Err(Error::RingRequired("generator matrices"));
    }
    let l = env.len();
    if l > MAX_SINGLE_RING {
        return Err(Error::RingTooLarge { len: l, cap: MAX_SINGLE_RING, what: "single-walk ring" });
    }
    let m_eff = mig.m_eff();
    let mut rate_left = Vec::with_capacity(l);
    let mut rate_right = Vec::with_capacity(l);
    for x in 0..l {
        let n3 = env.n3(x as i64, mig)?;
        rate_left.push(m_eff * env.size_wrapped(x as i64 - 1) / n3);
        rate_right.push(m_eff * env.size_wrapped(x as i64 + 1) / n3);
    }
    let exit: Vec<f64> = (0..l).map(|x| rate_left[x] + rate_right[x]).collect();
    let lambda = exit.iter().copied().fold(0.0, f64::max);
    let stay: Vec<f64> = exit.iter().map(|e| 1.0 - e / lambda).collect();
    let pi = env.reversible_pi(mig);

    // pi(x) rate(x,x+1) = pi(x+1) rate(x+1,x) entrywise.
    let scale = m_eff * env.k() * env.k();
    for x in 0..l {
        let xp = (x + 1) % l;
        let flux = pi[x] * rate_right[x] - pi[xp] * rate_left[xp];
        if flux.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "detailed-balance residual {flux:.3e} at edge ({x},{xp})"
            )));
        }
    }

    Ok(GeneratorMatrix { env: env.clone(), mig, rate_left, rate_right, exit, stay, pi, lambda })
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.exit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit.is_empty()
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn migration(&self) -> Migration {
        self.mig
    }

    /// Window-normalized reversible weights (mean 1).
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Stationary law of the walk: pi / L.
    pub fn stationary(&self) -> Vec<f64> {
        let l = self.pi.len() as f64;
        self.pi.iter().map(|p| p / l).collect()
    }

    pub fn rate_left(&self) -> &[f64] {
        &self.rate_left
    }

    pub fn rate_right(&self) -> &[f64] {
        &self.rate_right
    }

    /// Off-diagonal rate q(x, y); zero unless y is a ring neighbor of x.
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        let l = self.exit.len();
        if (x + 1) % l == y {
            self.rate_right[x]
        } else if (y + 1) % l == x {
            self.rate_left[x]
        } else {
            0.0
        }
    }

    /// Dense Q for small-matrix work; rows sum to zero.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let l = self.exit.len();
        let mut q = nalgebra::DMatrix::<f64>::zeros(l, l);
        for x in 0..l {
            q[(x, (x + 1) % l)] = self.rate_right[x];
            q[(x, (l + x - 1) % l)] = self.rate_left[x];
            q[(x, x)] = -self.exit[x];
        }
        q
    }

    /// One uniformization step: out = v (I + Q/lambda), for a row
    /// distribution v. Ring wrap is peeled off the ends so the bulk loop
    /// stays branch- and modulo-free.
    pub(crate) fn step_row(&self, v: &[f64], out: &mut [f64]) {
        let l = self.exit.len();
        let inv = 1.0 / self.lambda;
        let (stay, rr, rl) = (&self.stay, &self.rate_right, &self.rate_left);
        out[0] = v[0] * stay[0] + v[l - 1] * rr[l - 1] * inv + v[1] * rl[1] * inv;
        for y in 1..l - 1 {
            out[y] =
                v[y] * stay[y] + v[y - 1] * rr[y - 1] * inv + v[y + 1] * rl[y + 1] * inv;
        }
        out[l - 1] =
            v[l - 1] * stay[l - 1] + v[l - 2] * rr[l - 2] * inv + v[0] * rl[0] * inv;
    }
}

/// Heat kernel rows g_t(x, .) for a set of source sites.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    pub t: f64,
    sources: Vec<usize>,
    rows: Vec<Vec<f64>>,
    pi: Vec<f64>,
    /// Accumulated uniformization truncation error (total variation, per
    /// row); sums over continuations.
    pub trunc_error: f64,
}

/// Which rows of the kernel to compute.
#[derive(Clone, Debug)]
pub enum Sources {
    All,
    /// Site indices (ring-wrapped).
    Sites(Vec<i64>),
}

/// Kernel rows at time t by uniformization: g_t = sum_k Pois_k(lambda t)
/// P^k with P = I + Q/lambda, truncated once the Poisson mass reaches
/// 1 - tol (certified total-variation error <= tol per row).
pub fn heat_kernel(gen: &GeneratorMatrix, t: f64, sources: Sources) -> Result<HeatKernel> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("time {t} must be >= 0")));
    }
    let l = gen.len();
    let source_idx: Vec<usize> = match sources {
        Sources::All => (0..l).collect(),
        Sources::Sites(xs) => xs
            .into_iter()
            .map(|x| (x.rem_euclid(l as i64)) as usize)
            .collect(),
    };
    let rows: Vec<Vec<f64>> = source_idx
        .iter()
        .map(|&x| {
            let mut r = vec![0.0; l];
            r[x] = 1.0;
            r
        })
        .collect();
    let mut kernel = HeatKernel {
        t: 0.0,
        sources: source_idx,
        rows,
        pi: gen.pi().to_vec(),
        trunc_error: 0.0,
    };
    kernel.advance(gen, t)?;
    Ok(kernel)
}

impl HeatKernel {
    /// Continue the kernel from its current time to `t2 >= t`, reusing the
    /// existing rows as the initial condition. Truncation errors add.
    pub fn continue_to(&mut self, gen: &GeneratorMatrix, t2: f64) -> Result<()> {
        if t2 < self.t {
            return Err(Error::InvalidParams(format!(
                "cannot continue kernel backwards: {} -> {t2}",
                self.t
            )));
        }
        self.advance(gen, t2 - self.t)
    }

    fn advance(&mut self, gen: &GeneratorMatrix, dt: f64) -> Result<()> {
        if gen.len() != self.pi.len() {
            return Err(Error::LengthMismatch { expected: self.pi.len(), got: gen.len() });
        }
        if dt == 0.0 {
            return Ok(());
        }
        let weights = poisson_weights(gen.lambda * dt, UNIFORMIZATION_TOL)?;
        self.rows.par_iter_mut().for_each(|row| {
            let l = row.len();
            let mut v = row.clone();
            let mut next = vec![0.0; l];
            let mut out = vec![0.0; l];
            if weights[0] != 0.0 {
                for y in 0..l {
                    out[y] = weights[0] * v[y];
                }
            }
            for &w in &weights[1..] {
                gen.step_row(&v, &mut next);
                std::mem::swap(&mut v, &mut next);
                if w != 0.0 {
                    for y in 0..l {
                        out[y] += w * v[y];
                    }
                }
            }
            *row = out;
        });
        self.t += dt;
        self.trunc_error += UNIFORMIZATION_TOL;
        Ok(())
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    fn row_index(&self, x: i64) -> Result<usize> {
        let xi = x.rem_euclid(self.pi.len() as i64) as usize;
        self.sources
            .iter()
            .position(|&s| s == xi)
            .ok_or(Error::OutOfWindow { site: x, len: self.sources.len() })
    }

    pub fn row(&self, x: i64) -> Result<&[f64]> {
        Ok(&self.rows[self.row_index(x)?])
    }

    /// g_t(x, y); sites ring-wrapped; x must be a source.
    pub fn g(&self, x: i64, y: i64) -> Result<f64> {
        let row = self.row(x)?;
        Ok(row[y.rem_euclid(row.len() as i64) as usize])
    }

    /// h_t(x, y) = g_t(x, y) / pi(y): the reversibility-symmetric kernel.
    pub fn h(&self, x: i64, y: i64) -> Result<f64> {
        let yi = y.rem_euclid(self.pi.len() as i64) as usize;
        Ok(self.row(x)?[yi] / self.pi[yi])
    }

    /// Largest |row sum - 1| over the computed rows.
    pub fn row_sum_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let mut s = KahanSum::default();
                for v in r {
                    s.add(*v);
                }
                (s.value() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest |h(x,y) - h(y,x)| over computed row pairs.
    pub fn h_symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &x) in self.sources.iter().enumerate() {
            for (j, &y) in self.sources.iter().enumerate() {
                if j <= i {
                    continue;
                }
                let hxy = self.rows[i][y] / self.pi[y];
                let hyx = self.rows[j][x] / self.pi[x];
                worst = worst.max((hxy - hyx).abs());
            }
        }
        worst
    }
}

/// The centered Gaussian density with the given variance.
pub fn gaussian_kernel(x: f64, variance: f64) -> f64 {
    crate::stats::gaussian_density(x, variance)
}

#[cfg(test)]
mod tests;
