//! Exact two-walk chain on a ring: L^2 pair states plus L single states.
//!
//! Two lineages walk independently; while they share a colony x they merge
//! at rate 1/(lambda N(x)), after which the survivor keeps walking as a
//! single state. Uniformization over this combined chain gives exact
//! (certified-truncation) values for coalescence-time CDFs, together-time
//! occupation integrals, and post-merge moment functionals.

use super::{poisson_tails, poisson_weights, GeneratorMatrix, UNIFORMIZATION_TOL};
use crate::env::{Environment, Migration};
use crate::error::{Error, Result};
use crate::stats::KahanSum;
use rayon::prelude::*;

/// Cap on matrix-free pair rings: L^2 state vectors stay under ~100 MB.
pub const MAX_PAIR_RING: usize = 1024;

/// Distribution over the combined pair + single state space.
#[derive(Clone, Debug)]
pub struct PairDistribution {
    /// Length L^2 + L: pair states a*L + b, then single states L^2 + a.
    v: Vec<f64>,
    pub t: f64,
    /// Accumulated truncation error (total variation).
    pub trunc_error: f64,
}

pub struct PairChain {
    gen: GeneratorMatrix,
    /// Per-step transition probabilities: rates divided by lambda_u. The
    /// merge rate per together-site is 1/(lambda N(x)), zero when the
    /// coalescence clock is disabled.
    rr_u: Vec<f64>,
    rl_u: Vec<f64>,
    exit_u: Vec<f64>,
    kill_u: Vec<f64>,
    /// Uniformization rate for the combined chain.
    lambda_u: f64,
    l: usize,
}

impl PairChain {
    /// Build the chain. `coalescence_lambda` is the time-scale parameter of
    /// the merge clock (rate 1/(lambda N) while together); `None` disables
    /// merging, leaving two independent walks.
    pub fn new(
        env: &Environment,
        mig: Migration,
        coalescence_lambda: Option<f64>,
    ) -> Result<PairChain> {
        let gen = super::build_generator(env, mig)?;
        let l = gen.len();
        if l > MAX_PAIR_RING {
            return Err(Error::RingTooLarge { len: l, cap: MAX_PAIR_RING, what: "pair-chain ring" });
        }
        let kill: Vec<f64> = match coalescence_lambda {
            Some(lam) => {
                if !(lam > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "coalescence lambda = {lam} must be positive"
                    )));
                }
                (0..l).map(|x| 1.0 / (lam * env.size_wrapped(x as i64))).collect()
            }
            None => vec![0.0; l],
        };
        let exit: Vec<f64> = (0..l).map(|x| gen.rate_left()[x] + gen.rate_right()[x]).collect();
        let max_exit = exit.iter().copied().fold(0.0, f64::max);
        let max_kill = kill.iter().copied().fold(0.0, f64::max);
        let lambda_u = 2.0 * max_exit + max_kill;
        let rr_u: Vec<f64> = gen.rate_right().iter().map(|r| r / lambda_u).collect();
        let rl_u: Vec<f64> = gen.rate_left().iter().map(|r| r / lambda_u).collect();
        let exit_u: Vec<f64> = exit.iter().map(|e| e / lambda_u).collect();
        let kill_u: Vec<f64> = kill.iter().map(|k| k / lambda_u).collect();
        Ok(PairChain { gen, rr_u, rl_u, exit_u, kill_u, lambda_u, l })
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    pub fn states(&self) -> usize {
        self.l * self.l + self.l
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.gen
    }

    fn pair_index(&self, a: i64, b: i64) -> usize {
        let l = self.l as i64;
        (a.rem_euclid(l) * l + b.rem_euclid(l)) as usize
    }

    /// Point mass on the pair (a, b).
    pub fn delta(&self, a: i64, b: i64) -> PairDistribution {
        let mut v = vec![0.0; self.states()];
        v[self.pair_index(a, b)] = 1.0;
        PairDistribution { v, t: 0.0, trunc_error: 0.0 }
    }

    /// Mixture of pair point masses with the given weights.
    pub fn mixture(&self, starts: &[((i64, i64), f64)]) -> PairDistribution {
        let mut v = vec![0.0; self.states()];
        for &((a, b), w) in starts {
            v[self.pair_index(a, b)] += w;
        }
        PairDistribution { v, t: 0.0, trunc_error: 0.0 }
    }

    /// One uniformization step out = v (I + Q/lambda_u) of the combined
    /// chain. Ring wrap is peeled off the row ends so the bulk loop is
    /// branch- and modulo-free; the diagonal merge term is a single
    /// correction per row.
    fn step(&self, v: &[f64], out: &mut [f64]) {
        let l = self.l;
        let (rr_u, rl_u, exit_u, kill_u) = (&self.rr_u, &self.rl_u, &self.exit_u, &self.kill_u);
        let (pairs_in, singles_in) = v.split_at(l * l);
        let (pairs_out, singles_out) = out.split_at_mut(l * l);

        let fill_row = |a: usize, row_out: &mut [f64]| {
            let am = if a == 0 { l - 1 } else { a - 1 };
            let ap = if a + 1 == l { 0 } else { a + 1 };
            let row_a = &pairs_in[a * l..a * l + l];
            let row_am = &pairs_in[am * l..am * l + l];
            let row_ap = &pairs_in[ap * l..ap * l + l];
            let in_am = rr_u[am];
            let in_ap = rl_u[ap];
            let stay_a = 1.0 - exit_u[a];
            row_out[0] = row_a[0] * (stay_a - exit_u[0])
                + row_am[0] * in_am
                + row_ap[0] * in_ap
                + row_a[l - 1] * rr_u[l - 1]
                + row_a[1] * rl_u[1];
            for b in 1..l - 1 {
                row_out[b] = row_a[b] * (stay_a - exit_u[b])
                    + row_am[b] * in_am
                    + row_ap[b] * in_ap
                    + row_a[b - 1] * rr_u[b - 1]
                    + row_a[b + 1] * rl_u[b + 1];
            }
            row_out[l - 1] = row_a[l - 1] * (stay_a - exit_u[l - 1])
                + row_am[l - 1] * in_am
                + row_ap[l - 1] * in_ap
                + row_a[l - 2] * rr_u[l - 2]
                + row_a[0] * rl_u[0];
            row_out[a] -= row_a[a] * kill_u[a];
        };
        if l * l >= 1 << 14 && rayon::current_num_threads() > 1 {
            pairs_out
                .par_chunks_mut(l)
                .enumerate()
                .for_each(|(a, row_out)| fill_row(a, row_out));
        } else {
            for (a, row_out) in pairs_out.chunks_mut(l).enumerate() {
                fill_row(a, row_out);
            }
        }

        for a in 0..l {
            let am = if a == 0 { l - 1 } else { a - 1 };
            let ap = if a + 1 == l { 0 } else { a + 1 };
            singles_out[a] = singles_in[a] * (1.0 - exit_u[a])
                + singles_in[am] * rr_u[am]
                + singles_in[ap] * rl_u[ap]
                + pairs_in[a * l + a] * kill_u[a];
        }
    }

    /// Evolve the distribution by dt.
    pub fn evolve(&self, dist: &mut PairDistribution, dt: f64) -> Result<()> {
        self.evolve_weighted(dist, dt, &[])?;
        Ok(())
    }

    /// Evolve by dt while accumulating expected occupation integrals
    /// E[ int_t^{t+dt} f_i(X_s) ds ] for each sparse weight function f_i,
    /// given as (state index, weight) pairs. Returns one integral per f_i.
    ///
    /// Uses the exact identity int_0^S Pois_k(lambda s) ds =
    /// P(Pois(lambda S) > k)/lambda, so the only error is the certified
    /// Poisson truncation.
    pub fn evolve_weighted(
        &self,
        dist: &mut PairDistribution,
        dt: f64,
        occupations: &[&[(usize, f64)]],
    ) -> Result<Vec<f64>> {
        if dt < 0.0 {
            return Err(Error::InvalidParams(format!("dt = {dt} must be >= 0")));
        }
        let n = self.states();
        for f in occupations {
            if let Some((idx, _)) = f.iter().find(|(idx, _)| *idx >= n) {
                return Err(Error::LengthMismatch { expected: n, got: *idx });
            }
        }
        if dt == 0.0 {
            return Ok(vec![0.0; occupations.len()]);
        }
        let mu = self.lambda_u * dt;
        let weights = poisson_weights(mu, UNIFORMIZATION_TOL)?;
        let tails = poisson_tails(mu, UNIFORMIZATION_TOL)?;
        let mut v = std::mem::take(&mut dist.v);
        let mut next = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut occ: Vec<KahanSum> = vec![KahanSum::default(); occupations.len()];

        let dot = |v: &[f64], f: &[(usize, f64)]| -> f64 {
            let mut s = KahanSum::default();
            for &(idx, w) in f {
                s.add(v[idx] * w);
            }
            s.value()
        };

        if weights[0] != 0.0 {
            for y in 0..n {
                out[y] = weights[0] * v[y];
            }
        }
        for (i, f) in occupations.iter().enumerate() {
            occ[i].add(tails[0] * dot(&v, f));
        }
        let kmax = weights.len().min(tails.len());
        for k in 1..kmax {
            self.step(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
            if weights[k] != 0.0 {
                let w = weights[k];
                for (o, vi) in out.iter_mut().zip(&v) {
                    *o += w * vi;
                }
            }
            if tails[k] > 1e-16 {
                for (i, f) in occupations.iter().enumerate() {
                    occ[i].add(tails[k] * dot(&v, f));
                }
            }
        }
        dist.v = out;
        dist.t += dt;
        dist.trunc_error += UNIFORMIZATION_TOL;
        Ok(occ.iter().map(|s| s.value() / self.lambda_u).collect())
    }

    /// Probability mass that has merged by now.
    pub fn coalesced_mass(&self, dist: &PairDistribution) -> f64 {
        let mut s = KahanSum::default();
        for v in &dist.v[self.l * self.l..] {
            s.add(*v);
        }
        s.value()
    }

    /// E[ product of p0 over the active lineage positions ]: p0(a) p0(b)
    /// for live pairs, p0(a) for merged singles.
    pub fn moment_value(&self, dist: &PairDistribution, p0: &[f64]) -> Result<f64> {
        if p0.len() != self.l {
            return Err(Error::LengthMismatch { expected: self.l, got: p0.len() });
        }
        let l = self.l;
        let mut s = KahanSum::default();
        for a in 0..l {
            for b in 0..l {
                s.add(dist.v[a * l + b] * p0[a] * p0[b]);
            }
        }
        for a in 0..l {
            s.add(dist.v[l * l + a] * p0[a]);
        }
        Ok(s.value())
    }

    /// Marginal law of the pair block (unmerged mass), row-major L x L.
    pub fn pair_block<'a>(&self, dist: &'a PairDistribution) -> &'a [f64] {
        &dist.v[..self.l * self.l]
    }

    /// Sparse indicator of the together (diagonal) pair states.
    pub fn together_indicator(&self) -> Vec<(usize, f64)> {
        (0..self.l).map(|a| (a * self.l + a, 1.0)).collect()
    }

    /// Together indicator weighted by 1/N(x): the coalescence-clock
    /// integrand.
    pub fn together_inv_size(&self, env: &Environment) -> Vec<(usize, f64)> {
        (0..self.l)
            .map(|a| (a * self.l + a, 1.0 / env.size_wrapped(a as i64)))
            .collect()
    }

    /// Constant-1 weight over all states (occupation of anything = elapsed
    /// time; used to certify the tail identity).
    pub fn unit_weight(&self) -> Vec<(usize, f64)> {
        (0..self.states()).map(|i| (i, 1.0)).collect()
    }
}
