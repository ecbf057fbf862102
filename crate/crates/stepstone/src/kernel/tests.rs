use super::*;
use crate::env::{
    effective_params, sample_environment, Boundary, Environment, EnvironmentSpec, Family,
    Migration,
};
use crate::seeds::rng_from;
use rand::Rng;

fn mig1() -> Migration {
    Migration::standard(1.0).unwrap()
}

fn ring_env(family: Family, k: f64, l: usize, seed: u64) -> Environment {
    let spec = EnvironmentSpec::new(family, k, l, Boundary::Ring).unwrap();
    sample_environment(&spec, seed).unwrap()
}

fn iid_12(l: usize, seed: u64) -> Environment {
    ring_env(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        l,
        seed,
    )
}

#[test]
fn generator_constant_ring_rates() {
    let env = ring_env(Family::Constant { size: 1.0 }, 1.0, 4, 0);
    let gen = build_generator(&env, mig1()).unwrap();
    for x in 0..4 {
        assert!((gen.rate_left()[x] - 1.0 / 3.0).abs() < 1e-15);
        assert!((gen.rate_right()[x] - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn generator_periodic_12_rates_and_flux() {
    let env = ring_env(Family::Periodic { pattern: vec![1.0, 2.0] }, 2.0, 4, 0);
    let gen = build_generator(&env, mig1()).unwrap();
    // Site 0 has N=1, N3=5; site 1 has N=2, N3=4.
    assert!((gen.rate(0, 1) - 2.0 / 5.0).abs() < 1e-15);
    assert!((gen.rate(1, 0) - 1.0 / 4.0).abs() < 1e-15);
    let pi = gen.pi();
    assert!((pi[0] * gen.rate(0, 1) - pi[1] * gen.rate(1, 0)).abs() < 1e-14);
}

#[test]
fn generator_rows_sum_to_zero() {
    let env = ring_env(Family::IidUniform { lo: 0.5, hi: 2.0 }, 2.0, 23, 5);
    let gen = build_generator(&env, mig1()).unwrap();
    let q = gen.to_dense();
    for x in 0..23 {
        let s: f64 = (0..23).map(|y| q[(x, y)]).sum();
        assert!(s.abs() < 1e-14, "row {x} sums to {s}");
    }
}

#[test]
fn generator_requires_ring() {
    let spec = EnvironmentSpec::new(Family::Constant { size: 1.0 }, 1.0, 8, Boundary::Segment)
        .unwrap();
    let env = sample_environment(&spec, 0).unwrap();
    assert!(matches!(
        build_generator(&env, mig1()),
        Err(crate::Error::RingRequired(_))
    ));
}

#[test]
fn heat_kernel_time_zero_is_identity() {
    let env = iid_12(12, 1);
    let gen = build_generator(&env, mig1()).unwrap();
    let k = heat_kernel(&gen, 0.0, Sources::All).unwrap();
    for x in 0..12 {
        for y in 0..12 {
            let want = if x == y { 1.0 } else { 0.0 };
            assert_eq!(k.g(x as i64, y as i64).unwrap(), want);
        }
    }
}

#[test]
fn heat_kernel_rows_are_stochastic_and_h_symmetric() {
    let env = iid_12(20, 3);
    let gen = build_generator(&env, mig1()).unwrap();
    let k = heat_kernel(&gen, 2.7, Sources::All).unwrap();
    assert!(k.row_sum_defect() < 1e-10, "row defect {}", k.row_sum_defect());
    assert!(k.h_symmetry_defect() < 1e-10, "h defect {}", k.h_symmetry_defect());
}

#[test]
fn heat_kernel_mixes_to_stationary() {
    let env = iid_12(16, 7);
    let gen = build_generator(&env, mig1()).unwrap();
    let sigma2 = 0.5;
    let t = 50.0 * 256.0 / sigma2;
    let k = heat_kernel(&gen, t, Sources::Sites(vec![0, 5])).unwrap();
    let target = gen.stationary();
    for &x in &[0i64, 5] {
        let row = k.row(x).unwrap();
        let sup = row
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-8, "sup distance {sup}");
    }
}

#[test]
fn heat_kernel_semigroup_property() {
    let env = iid_12(12, 11);
    let gen = build_generator(&env, mig1()).unwrap();
    let mut rng = rng_from(2);
    for _ in 0..3 {
        let t: f64 = rng.random_range(0.2..1.5);
        let s: f64 = rng.random_range(0.2..1.5);
        let kt = heat_kernel(&gen, t, Sources::All).unwrap();
        let ks = heat_kernel(&gen, s, Sources::All).unwrap();
        let kts = heat_kernel(&gen, t + s, Sources::All).unwrap();
        for x in 0..12i64 {
            for y in 0..12i64 {
                let mut prod = 0.0;
                for z in 0..12i64 {
                    prod += kt.g(x, z).unwrap() * ks.g(z, y).unwrap();
                }
                assert!((prod - kts.g(x, y).unwrap()).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn heat_kernel_continuation_matches_direct() {
    let env = iid_12(16, 13);
    let gen = build_generator(&env, mig1()).unwrap();
    let mut k = heat_kernel(&gen, 0.8, Sources::Sites(vec![4])).unwrap();
    k.continue_to(&gen, 2.0).unwrap();
    let direct = heat_kernel(&gen, 2.0, Sources::Sites(vec![4])).unwrap();
    for y in 0..16i64 {
        assert!((k.g(4, y).unwrap() - direct.g(4, y).unwrap()).abs() < 1e-11);
    }
}

#[test]
fn poisson_weights_sum_to_one() {
    for mu in [0.0, 0.3, 7.0, 500.0, 20_000.0] {
        let w = poisson_weights(mu, 1e-12).unwrap();
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-11, "mu={mu}: sum {sum}");
        let tails = poisson_tails(mu, 1e-12).unwrap();
        // T_0 = 1 - p_0.
        assert!((tails[0] - (1.0 - w[0])).abs() < 1e-11);
    }
}

#[test]
fn pair_chain_factorizes_without_merging() {
    let env = iid_12(10, 17);
    let mig = mig1();
    let gen = build_generator(&env, mig).unwrap();
    let chain = PairChain::new(&env, mig, None).unwrap();
    let t = 1.3;
    let (x0, y0) = (2i64, 7i64);
    let mut dist = chain.delta(x0, y0);
    chain.evolve(&mut dist, t).unwrap();
    assert_eq!(chain.coalesced_mass(&dist), 0.0);

    let k = heat_kernel(&gen, t, Sources::Sites(vec![x0, y0])).unwrap();
    let block = chain.pair_block(&dist);
    let l = 10usize;
    let mut worst = 0.0f64;
    for a in 0..l {
        for b in 0..l {
            let want = k.g(x0, a as i64).unwrap() * k.g(y0, b as i64).unwrap();
            worst = worst.max((block[a * l + b] - want).abs());
        }
    }
    assert!(worst < 1e-10, "product defect {worst}");
}

#[test]
fn pair_chain_occupation_of_unit_weight_is_elapsed_time() {
    let env = iid_12(8, 23);
    let chain = PairChain::new(&env, mig1(), Some(3.0)).unwrap();
    let unit = chain.unit_weight();
    let mut dist = chain.delta(0, 0);
    let occ = chain.evolve_weighted(&mut dist, 4.5, &[&unit]).unwrap();
    assert!((occ[0] - 4.5).abs() < 1e-9, "occupation {}", occ[0]);
    // Mass is conserved across pair + single blocks.
    let total: f64 = chain.pair_block(&dist).iter().sum::<f64>() + chain.coalesced_mass(&dist);
    assert!((total - 1.0).abs() < 1e-10);
    assert!(chain.coalesced_mass(&dist) > 0.05);
}

#[test]
fn pair_chain_merge_rate_matches_short_time_expansion() {
    // From (x,x), P(merged by dt) = kill(x) dt + O(dt^2).
    let env = ring_env(Family::Constant { size: 2.0 }, 2.0, 8, 0);
    let lam = 5.0;
    let chain = PairChain::new(&env, mig1(), Some(lam)).unwrap();
    let dt = 1e-4;
    let mut dist = chain.delta(3, 3);
    chain.evolve(&mut dist, dt).unwrap();
    let got = chain.coalesced_mass(&dist);
    let want = dt / (lam * 2.0);
    assert!((got - want).abs() < want * 0.01, "got {got}, want ~{want}");
}

#[test]
fn meeting_chain_constant_env_is_translation_invariant() {
    let env = ring_env(Family::Constant { size: 1.5 }, 1.5, 8, 0);
    let mc = meeting_chain(&env, mig1()).unwrap();
    assert!(mc.db_residual <= 1e-10, "db residual {}", mc.db_residual);
    assert!(mc.hitting_defect <= 1e-10);
    assert!(mc.stationary_residual <= 1e-10);
    for x in 0..8usize {
        for y in 0..8usize {
            let shift = mc.q[((x + 1) % 8, (y + 1) % 8)];
            assert!((mc.q[(x, y)] - shift).abs() < 1e-10);
        }
    }
}

#[test]
fn meeting_chain_periodic_12_detailed_balance() {
    let env = ring_env(Family::Periodic { pattern: vec![1.0, 2.0] }, 2.0, 8, 0);
    let mc = meeting_chain(&env, mig1()).unwrap();
    assert!(mc.db_residual <= 1e-8, "db residual {}", mc.db_residual);
    assert!(mc.hitting_defect <= 1e-8);
    assert!(mc.stationary_residual <= 1e-8);
}

#[test]
fn meeting_chain_random_env_pi2_reversible() {
    let env = ring_env(Family::IidUniform { lo: 0.5, hi: 2.0 }, 2.0, 12, 31);
    let mc = meeting_chain(&env, Migration::standard(0.7).unwrap()).unwrap();
    assert!(mc.db_residual <= 1e-8, "db residual {}", mc.db_residual);
    assert!(mc.stationary_residual <= 1e-8);
}

#[test]
fn dirichlet_bound_constant_env() {
    let env = ring_env(Family::Constant { size: 1.0 }, 1.0, 32, 0);
    let gen = build_generator(&env, mig1()).unwrap();
    for x in [0usize, 7, 19] {
        let chk = dirichlet_form_check(&gen, 1.0, x).unwrap();
        assert!(chk.holds(1e-12));
        assert!(chk.q_value < chk.bound, "ratio {}", chk.q_value / chk.bound);
    }
}

#[test]
fn dirichlet_bound_random_draws() {
    let mut rng = rng_from(77);
    for i in 0..10 {
        let env = ring_env(Family::IidUniform { lo: 0.5, hi: 2.0 }, 2.0, 24, 100 + i);
        let m: f64 = rng.random_range(0.2..1.5);
        let gen = build_generator(&env, Migration::standard(m).unwrap()).unwrap();
        let t: f64 = rng.random_range(0.05..30.0);
        let x: usize = rng.random_range(0..24);
        let chk = dirichlet_form_check(&gen, t, x).unwrap();
        assert!(chk.holds(1e-12), "env {i}: Q {} vs bound {}", chk.q_value, chk.bound);
    }
}

#[test]
fn dirichlet_form_of_flat_kernel_vanishes() {
    // Near stationarity h is constant, so the form is ~0 and the bound holds.
    let env = iid_12(16, 41);
    let gen = build_generator(&env, mig1()).unwrap();
    let chk = dirichlet_form_check(&gen, 5000.0, 3).unwrap();
    assert!(chk.q_value.abs() < 1e-12);
    assert!(chk.holds(1e-12));
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

#[test]
fn kernel_bounds_constant_env_explicit_constant() {
    let env = ring_env(Family::Constant { size: 1.0 }, 1.0, 128, 0);
    let gen = build_generator(&env, mig1()).unwrap();
    let grid = log_grid(0.5, 50.0, 9);
    let report = kernel_bound_check(&gen, &grid, &[(10, 20), (63, 64), (5, 5)]).unwrap();
    assert!((report.on_diag_bound - 9.0 * (-0.5f64).exp()).abs() < 1e-12);
    assert!(report.on_diag_ok, "sup {} vs bound {}", report.on_diag_sup, report.on_diag_bound);
    assert!(report.passed());
}

#[test]
fn kernel_bounds_iid_env_monitors_stay_bounded() {
    let env = iid_12(128, 19);
    let gen = build_generator(&env, mig1()).unwrap();
    let grid = log_grid(0.5, 50.0, 9);
    let report = kernel_bound_check(&gen, &grid, &[(0, 13), (40, 41)]).unwrap();
    assert!((report.on_diag_bound - 9.0 * 16.0 * (-0.5f64).exp()).abs() < 1e-10);
    assert!(report.on_diag_ok);
    assert!(report.on_diag_sup < 10.0, "measured sup {}", report.on_diag_sup);
    assert!(!report.holder_growth);
    assert!(!report.integrated_growth);
}

#[test]
fn kernel_bounds_rejects_short_grid_and_beyond_horizon() {
    let env = iid_12(64, 3);
    let gen = build_generator(&env, mig1()).unwrap();
    assert!(kernel_bound_check(&gen, &log_grid(1.0, 10.0, 5), &[]).is_err());
    let horizon_breaker = log_grid(1.0, 1e6, 7);
    assert!(matches!(
        kernel_bound_check(&gen, &horizon_breaker, &[]),
        Err(crate::Error::BeyondHorizon { .. })
    ));
}

#[test]
fn gaussian_reference_value() {
    // sigma2 = 2/3, t = 1: G_1(0) = (2 pi 2/3)^{-1/2}.
    let g = gaussian_kernel(0.0, 2.0 / 3.0);
    assert!((g - 0.4886025119029199).abs() < 1e-12);
}

#[test]
fn lclt_constant_env_is_classical() {
    let spec = EnvironmentSpec::new(Family::Constant { size: 1.0 }, 1.0, 8, Boundary::Ring)
        .unwrap();
    let rows = local_clt_error(&spec, mig1(), &[400.0], 0.5, 2.0, 4, 2.0, 5).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].sup_error < 0.02, "error {}", rows[0].sup_error);
    let needed = anti_wrap_ring(2.0 / 3.0, 400.0, 2.0, 2.0);
    assert!(rows[0].ring_len >= needed);
}

/// Rescaled expected together-time of two independent walks started at the
/// same site, against the two candidate closed forms kappa sqrt(t/(pi s2))
/// with kappa = 1 or kappa = <pi^2>. A sampled heterogeneous window is tiled
/// into an exactly periodic ring so the window brackets are exact; a
/// constant-size control (where the candidates coincide) validates the
/// harness itself.
#[test]
#[ignore = "scaling survey; run with --ignored --nocapture"]
fn together_time_scaling_survey() {
    let mig = mig1();
    let w = 64usize;
    let window_spec = EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        w,
        Boundary::Ring,
    )
    .unwrap();
    let pattern = sample_environment(&window_spec, 9001).unwrap().sizes().to_vec();

    let cases: [(Vec<f64>, f64, usize); 3] = [
        (vec![1.0], 625.0, 512),
        (pattern.clone(), 625.0, 512),
        (pattern, 2500.0, 1024),
    ];
    for (pat, n, l) in cases {
        let period = pat.len();
        let ring_spec =
            EnvironmentSpec::new(Family::Periodic { pattern: pat }, 2.0, l, Boundary::Ring)
                .unwrap();
        let params = effective_params(&ring_spec, mig).unwrap();
        let sigma2 = params.sigma2;
        let gamma = params.gamma;
        let pi2 = params.mean_n_n3_all_sq / (params.mean_n_n3 * params.mean_n_n3);
        let env = sample_environment(&ring_spec, 0).unwrap();
        let chain = PairChain::new(&env, mig, None).unwrap();
        let starts: Vec<((i64, i64), f64)> = (0..period as i64)
            .map(|x| ((x, x), 1.0 / period as f64))
            .collect();
        let mut dist = chain.mixture(&starts);
        let together = chain.together_indicator();
        let weighted = chain.together_inv_size(&env);
        println!(
            "period={period} L={l} n={n}  sigma2={sigma2:.6} gamma={gamma:.6} <pi^2>={pi2:.6}"
        );
        let (mut cum_a, mut cum_b, mut t_done) = (0.0, 0.0, 0.0);
        for t in [0.5, 1.0, 2.0] {
            let occ = chain
                .evolve_weighted(&mut dist, (t - t_done) * n, &[&together, &weighted])
                .unwrap();
            cum_a += occ[0];
            cum_b += occ[1];
            t_done = t;
            let ell = (t / (std::f64::consts::PI * sigma2)).sqrt();
            let ratio_a = cum_a / n.sqrt() / ell;
            let ratio_b = cum_b / n.sqrt() / (gamma * ell);
            println!(
                "  t={t:.1}  plain/ell = {ratio_a:.4}   weighted/(gamma ell) = {ratio_b:.4}   candidates 1.0000 | {pi2:.4}"
            );
        }
    }
}

#[test]
fn lclt_error_decreases_with_scale() {
    let spec = EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        8,
        Boundary::Ring,
    )
    .unwrap();
    let rows = local_clt_error(&spec, mig1(), &[100.0, 1000.0], 0.5, 2.0, 4, 2.0, 5).unwrap();
    assert!(rows[1].sup_error < rows[0].sup_error, "{} -> {}", rows[0].sup_error, rows[1].sup_error);
}
