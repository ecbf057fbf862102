use super::*;
use crate::env::{sample_environment, EnvironmentSpec, Family, Migration};
use crate::forward::InitialProfile;
use crate::seeds::child_seed;

fn mig1() -> Migration {
    Migration::standard(1.0).unwrap()
}

fn ring_env(family: Family, k: f64, l: usize, seed: u64) -> Environment {
    let spec = EnvironmentSpec::new(family, k, l, Boundary::Ring).unwrap();
    sample_environment(&spec, seed).unwrap()
}

fn iid_12(l: usize, seed: u64) -> Environment {
    ring_env(Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] }, 2.0, l, seed)
}

#[test]
fn merge_law_matches_the_frozen_table() {
    // reference values from 1 - e^{b^2/2} erfc(b/sqrt(2)) at high precision
    let table = [
        (0.25, 0.171935794104529161),
        (0.5, 0.30076233055920386),
        (1.0, 0.476843416269753257),
        (2.0, 0.663795997553658787),
        (4.0, 0.811178717396062127),
    ];
    // with sigma2 = 0.5 and t = 1 the exponent b equals gamma
    for (gamma, want) in table {
        let got = merge_law_quadrature(gamma, 0.5, 1.0).unwrap();
        assert!((got - want).abs() < 1e-11, "b={gamma}: {got} vs {want}");
    }
    let got = merge_law_quadrature(0.5, 2.0 / 3.0, 1.0).unwrap();
    assert!((got - 0.269634294886991177).abs() < 1e-11);

    assert_eq!(merge_law_quadrature(0.0, 0.5, 1.0).unwrap(), 0.0);
    assert_eq!(merge_law_quadrature(0.7, 0.5, 0.0).unwrap(), 0.0);
    assert!(merge_law_quadrature(0.7, 0.0, 1.0).is_err());
    assert!(merge_law_quadrature(-0.1, 0.5, 1.0).is_err());
}

#[test]
fn exact_merge_chain_has_the_right_small_time_rate() {
    // co-located pair on flat sizes 2: merge rate 1/(lambda N) = 0.5, so
    // P(merge by t) = 0.5 t + O(t^2)
    let env = ring_env(Family::Constant { size: 2.0 }, 2.0, 8, 0);
    let t = 1e-4;
    let p = exact_merge_probability(&env, mig1(), 1.0, t, 4, 4).unwrap();
    assert!((p / (0.5 * t) - 1.0).abs() <= 1e-3, "small-time rate {p}");

    assert_eq!(exact_merge_probability(&env, mig1(), 1.0, 0.0, 4, 4).unwrap(), 0.0);

    // rotation symmetry of the flat ring
    let a = exact_merge_probability(&env, mig1(), 2.0, 1.5, 0, 2).unwrap();
    let b = exact_merge_probability(&env, mig1(), 2.0, 1.5, 3, 5).unwrap();
    assert!((a - b).abs() < 1e-12);

    // monotone in t
    let later = exact_merge_probability(&env, mig1(), 2.0, 3.0, 0, 2).unwrap();
    assert!(later > a);

    let seg =
        EnvironmentSpec::new(Family::Constant { size: 1.0 }, 1.0, 8, Boundary::Segment).unwrap();
    let seg_env = sample_environment(&seg, 0).unwrap();
    assert!(matches!(
        exact_merge_probability(&seg_env, mig1(), 1.0, 1.0, 0, 2),
        Err(Error::RingRequired(_))
    ));
    let big = iid_12(128, 4);
    assert!(matches!(
        exact_merge_probability(&big, mig1(), 1.0, 1.0, 0, 2),
        Err(Error::RingTooLarge { .. })
    ));
    assert!(exact_merge_probability(&env, mig1(), 0.0, 1.0, 0, 2).is_err());
}

#[test]
fn exact_merge_chain_agrees_with_pair_simulation() {
    let env = ring_env(Family::Periodic { pattern: vec![1.0, 2.0] }, 2.0, 8, 0);
    let mig = mig1();
    let (lambda, t) = (2.0, 3.0);
    let exact = exact_merge_probability(&env, mig, lambda, t, 1, 4).unwrap();

    let reps = 4000u64;
    let merged = (0..reps)
        .filter(|rep| {
            simulate_pair(&env, 1, 4, lambda, mig, t, child_seed(5, "chain-mc", *rep))
                .unwrap()
                .0
                .coalesced_at
                .is_some()
        })
        .count();
    let p_hat = merged as f64 / reps as f64;
    let se = (exact * (1.0 - exact) / reps as f64).sqrt();
    assert!(
        (p_hat - exact).abs() <= 3.5 * se,
        "chain {exact} vs simulation {p_hat} (se {se})"
    );
}

#[test]
fn flow_reference_matches_the_closed_law_from_coinciding_starts() {
    let params = BrownianFlowParams {
        sigma2: 2.0 / 3.0,
        gamma: 0.5,
        x1: 0.0,
        x2: 0.0,
        t_end: 1.0,
        dt_b: 5e-5,
        replicates: 2000,
    };
    let flow = brownian_flow_reference(&params, 31).unwrap();
    assert!(flow.refinement_ok, "refinement delta {}", flow.refinement_delta);
    assert_eq!(flow.convention, LOCAL_TIME_CONVENTION);
    assert!(flow.times.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(flow.merged, flow.times.len());

    for t in [0.25, 0.5, 1.0] {
        let want = merge_law_quadrature(params.gamma, params.sigma2, t).unwrap();
        let got = flow.cdf_at(t);
        let se = (want * (1.0 - want) / params.replicates as f64).sqrt();
        assert!(
            (got - want).abs() <= 3.5 * se + 0.012,
            "t={t}: flow {got} vs law {want} (se {se})"
        );
    }
}

#[test]
fn flow_merges_monotonically_in_gamma() {
    let base = BrownianFlowParams {
        sigma2: 0.5,
        gamma: 0.3,
        x1: 0.0,
        x2: 0.0,
        t_end: 1.0,
        dt_b: 2e-4,
        replicates: 400,
    };
    let slow = brownian_flow_reference(&base, 77).unwrap();
    let fast =
        brownian_flow_reference(&BrownianFlowParams { gamma: 1.2, ..base }, 77).unwrap();
    // same threshold and same increments per replicate: a larger rate can
    // only cross earlier
    for (s, f) in slow.raw_times.iter().zip(&fast.raw_times) {
        let s = s.unwrap_or(f64::INFINITY);
        let f = f.unwrap_or(f64::INFINITY);
        assert!(f <= s, "gamma monotonicity broken: {f} > {s}");
    }
    assert!(fast.merged >= slow.merged);
}

#[test]
fn flow_reference_validates_and_reproduces() {
    let good = BrownianFlowParams {
        sigma2: 0.5,
        gamma: 0.4,
        x1: 2.0,
        x2: 0.0,
        t_end: 0.01,
        dt_b: 1e-4,
        replicates: 200,
    };
    // distant starts and a tiny horizon: nobody merges
    let flow = brownian_flow_reference(&good, 3).unwrap();
    assert_eq!(flow.merged, 0);

    let again = brownian_flow_reference(&good, 3).unwrap();
    assert_eq!(flow.times, again.times);
    assert_eq!(flow.merged, again.merged);

    for bad in [
        BrownianFlowParams { sigma2: 0.0, ..good },
        BrownianFlowParams { gamma: -1.0, ..good },
        BrownianFlowParams { dt_b: 0.0, ..good },
        BrownianFlowParams { dt_b: 1.0, ..good },
        BrownianFlowParams { replicates: 50, ..good },
        BrownianFlowParams { t_end: f64::INFINITY, ..good },
    ] {
        assert!(brownian_flow_reference(&bad, 3).is_err(), "{bad:?} accepted");
    }
}

#[test]
fn first_moment_duality_is_tight_on_a_flat_profile() {
    let env = iid_12(16, 9);
    let params = SdeParams::new(mig1(), 5.0, 0.00625, 0.5, env.k()).unwrap();
    let p0 = vec![0.4; 16];
    let report = duality_k1(&env, &p0, &params, &[0, 4, 8, 12], 64, 21).unwrap();
    assert!(report.pass);
    assert_eq!(report.checks.len(), 4);
    for check in &report.checks {
        // the kernel side is c times a row sum, which is 1 up to truncation
        assert!((check.dual - 0.4).abs() < 1e-10);
        assert!(check.z.abs() <= 3.0);
    }

    assert!(duality_k1(&env, &p0, &params, &[], 64, 21).is_err());
    assert!(duality_k1(&env, &p0, &params, &[0], 8, 21).is_err());
    assert!(duality_k1(&env, &[0.4; 7], &params, &[0], 64, 21).is_err());
}

#[test]
fn first_moment_duality_matches_the_kernel_on_step_profiles() {
    let p0_of = |l: usize| {
        InitialProfile::SmoothedStep { lo: 0.2, hi: 0.8, budget: 0.1 }.instantiate(l, 1.0).unwrap()
    };
    let probes: [i64; 5] = [0, 6, 12, 18, 21];

    for (label, env) in [
        ("flat", ring_env(Family::Constant { size: 1.0 }, 1.0, 24, 0)),
        ("iid", iid_12(24, 13)),
    ] {
        let params = SdeParams::new(mig1(), 40.0, 0.025, 1.0, env.k()).unwrap();
        let report = duality_k1(&env, &p0_of(24), &params, &probes, 400, 43).unwrap();
        assert!(report.pass, "{label}: {:?}", report.checks);
    }
}

#[test]
fn second_moment_duality_against_the_exact_chain() {
    // flat profile c: the dual side collapses to c^2 + c(1-c) P(merged)
    let env = ring_env(Family::Constant { size: 2.0 }, 2.0, 12, 0);
    let params = SdeParams::new(mig1(), 1.5, 0.001875, 1.5, env.k()).unwrap();
    let p0 = vec![0.3; 12];

    let merged = exact_merge_probability(&env, params.mig, params.lambda, params.t_end, 5, 5)
        .unwrap();
    let report =
        duality_k2(&env, &p0, &params, 5, 5, DualSide::ExactPairChain, 3000, 71).unwrap();
    let check = &report.checks[0];
    assert!((check.dual - (0.09 + 0.21 * merged)).abs() < 1e-12);
    assert_eq!(check.dual_se, 0.0);
    assert!(report.pass, "z = {}", check.z);

    // all-ones profile: the forward field is absorbed, both sides exactly 1
    let ones = vec![1.0; 12];
    let report =
        duality_k2(&env, &ones, &params, 2, 7, DualSide::ExactPairChain, 64, 71).unwrap();
    let check = &report.checks[0];
    assert_eq!(check.forward, 1.0);
    assert_eq!(check.forward_se, 0.0);
    assert_eq!(check.dual, 1.0);
    assert!(report.pass);

    let step = InitialProfile::SmoothedStep { lo: 0.2, hi: 0.8, budget: 0.1 }
        .instantiate(12, 1.0)
        .unwrap();
    assert!(duality_k2(&env, &step, &params, 5, 5, DualSide::ExactPairChain, 64, 71).is_err());
}

#[test]
fn second_moment_duality_monte_carlo_both_sides() {
    let env = iid_12(16, 17);
    let params = SdeParams::new(mig1(), 2.0, 0.000625, 1.0, env.k()).unwrap();
    let p0 = InitialProfile::SmoothedStep { lo: 0.2, hi: 0.8, budget: 0.1 }
        .instantiate(16, 1.0)
        .unwrap();
    let report = duality_k2(
        &env,
        &p0,
        &params,
        5,
        9,
        DualSide::MonteCarlo { replicates: 2500 },
        2500,
        83,
    )
    .unwrap();
    let check = &report.checks[0];
    assert!(check.dual_se > 0.0);
    assert!(report.pass, "z = {}", check.z);

    assert!(duality_k2(
        &env,
        &p0,
        &params,
        5,
        9,
        DualSide::MonteCarlo { replicates: 8 },
        100,
        83
    )
    .is_err());
}

#[test]
fn universality_report_wires_every_column() {
    let specs = vec![
        (
            "flat".to_string(),
            EnvironmentSpec::new(Family::Constant { size: 1.0 }, 1.0, 3, Boundary::Ring).unwrap(),
        ),
        (
            "iid-12".to_string(),
            EnvironmentSpec::new(
                Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
                2.0,
                3,
                Boundary::Ring,
            )
            .unwrap(),
        ),
    ];
    let settings = UniversalitySettings {
        n: 400,
        offset: 1.0,
        t_max: 1.0,
        replicates: 600,
        reference_replicates: 1200,
        dt_b: 2e-4,
        msd_paths: 400,
        control_index: Some(1),
        alpha: 0.01,
    };
    let report = universality_report(&specs, mig1(), &settings, 57).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.convention, LOCAL_TIME_CONVENTION);

    let flat = &report.rows[0];
    assert!((flat.sigma2 - 2.0 / 3.0).abs() < 1e-12);
    assert!((flat.gamma - 1.0).abs() < 1e-12);
    assert!((flat.pair_weight_factor - 1.0).abs() < 1e-12);
    assert!(flat.ks < flat.band, "flat env ks {} band {}", flat.ks, flat.band);
    assert!(flat.refinement_ok);

    let iid = &report.rows[1];
    // enumeration oracles: sigma2, gamma, and <(N N3)^2>/<N N3>^2 = 59.25/49
    assert!((iid.sigma2 - 0.5079365079365079).abs() < 1e-12);
    assert!((iid.gamma - 0.569620253164557).abs() < 1e-12);
    assert!((iid.pair_weight_factor - 59.25 / 49.0).abs() < 1e-12);
    assert!(iid.ks >= 0.0 && iid.band > 0.0);
    assert!(iid.msd_ratio.is_finite() && iid.msd_se_ratio > 0.0);

    let control = report.control.as_ref().expect("control requested");
    assert!((control.gamma_naive - 1.0 / 1.5).abs() < 1e-12);
    assert!(control.ks >= 0.0 && control.band > 0.0);

    // full determinism of the report as data
    let again = universality_report(&specs, mig1(), &settings, 57).unwrap();
    assert_eq!(
        serde_json::to_string(&report).unwrap(),
        serde_json::to_string(&again).unwrap()
    );

    assert!(universality_report(&[], mig1(), &settings, 57).is_err());
    let bad = UniversalitySettings { control_index: Some(9), ..settings };
    assert!(universality_report(&specs, mig1(), &bad, 57).is_err());
    let bad = UniversalitySettings { alpha: 0.0, ..settings };
    assert!(universality_report(&specs, mig1(), &bad, 57).is_err());
    let bad = UniversalitySettings { offset: -1.0, ..settings };
    assert!(universality_report(&specs, mig1(), &bad, 57).is_err());
}
