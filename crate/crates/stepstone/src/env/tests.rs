use super::*;
use crate::error::Error;
use proptest::prelude::*;

fn iid_12() -> EnvironmentSpec {
    EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        16,
        Boundary::Ring,
    )
    .unwrap()
}

fn periodic_12(len: usize) -> EnvironmentSpec {
    EnvironmentSpec::new(Family::Periodic { pattern: vec![1.0, 2.0] }, 2.0, len, Boundary::Ring)
        .unwrap()
}

fn constant(size: f64, len: usize) -> EnvironmentSpec {
    EnvironmentSpec::new(Family::Constant { size }, size.max(1.0 / size), len, Boundary::Ring)
        .unwrap()
}

#[test]
fn constant_family_is_flat() {
    let env = sample_environment(&constant(1.0, 10), 7).unwrap();
    assert_eq!(env.sizes(), &[1.0; 10]);
}

#[test]
fn periodic_family_tiles_pattern() {
    let env = sample_environment(&periodic_12(6), 3).unwrap();
    assert_eq!(env.sizes(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
}

#[test]
fn ring_length_must_fit_period() {
    let err = EnvironmentSpec::new(
        Family::Periodic { pattern: vec![1.0, 2.0] },
        2.0,
        7,
        Boundary::Ring,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidSpec(_)));
}

#[test]
fn iid_sampling_matches_law_of_large_numbers() {
    let spec = EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        1_000_000,
        Boundary::Ring,
    )
    .unwrap();
    let env = sample_environment(&spec, 42).unwrap();
    let mean = env.sizes().iter().sum::<f64>() / env.len() as f64;
    assert!((mean - 1.5).abs() < 0.01, "empirical mean {mean}");
}

#[test]
fn sampling_is_deterministic_in_seed() {
    let spec = iid_12();
    let a = sample_environment(&spec, 5).unwrap();
    let b = sample_environment(&spec, 5).unwrap();
    let c = sample_environment(&spec, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.sizes(), c.sizes());
}

#[test]
fn uniform_family_respects_bounds() {
    let spec = EnvironmentSpec::new(
        Family::IidUniform { lo: 0.5, hi: 2.0 },
        2.0,
        1000,
        Boundary::Ring,
    )
    .unwrap();
    let env = sample_environment(&spec, 1).unwrap();
    assert!(env.sizes().iter().all(|v| (0.5..=2.0).contains(v)));
}

#[test]
fn ellipticity_violation_is_rejected() {
    let err = EnvironmentSpec::new(
        Family::Constant { size: 3.0 },
        2.0,
        10,
        Boundary::Ring,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Ellipticity { .. }));
}

#[test]
fn markov_needs_irreducibility() {
    let err = EnvironmentSpec::new(
        Family::MarkovChain {
            states: vec![1.0, 2.0],
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        },
        2.0,
        10,
        Boundary::Ring,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidSpec(_)));
}

#[test]
fn markov_sampling_hits_stationary_frequencies() {
    // Asymmetric chain: stationary law rho = (2/3, 1/3).
    let spec = EnvironmentSpec::new(
        Family::MarkovChain {
            states: vec![1.0, 2.0],
            rows: vec![vec![0.8, 0.2], vec![0.4, 0.6]],
        },
        2.0,
        200_000,
        Boundary::Ring,
    )
    .unwrap();
    let env = sample_environment(&spec, 9).unwrap();
    let frac2 = env.sizes().iter().filter(|v| **v == 2.0).count() as f64 / env.len() as f64;
    assert!((frac2 - 1.0 / 3.0).abs() < 0.01, "state-2 fraction {frac2}");
}

#[test]
fn n3_examples() {
    let env = Environment::from_sizes(vec![1.0, 2.0, 3.0]).unwrap();
    let std = Migration::standard(0.5).unwrap();
    let cons = Migration::conservative(0.5).unwrap();
    assert_eq!(env.n3(1, std).unwrap(), 6.0);
    assert!((env.n3(1, cons).unwrap() - 2.0).abs() < 1e-15);
    // Ring wrap at the edge site.
    assert_eq!(env.n3(0, std).unwrap(), 6.0);

    let flat = sample_environment(&constant(1.5, 8), 0).unwrap();
    assert!((flat.n3(3, std).unwrap() - 4.5).abs() < 1e-15);
}

#[test]
fn n3_segment_rejects_boundary_sites() {
    let spec = EnvironmentSpec::new(
        Family::Periodic { pattern: vec![1.0, 2.0, 3.0] },
        3.0,
        3,
        Boundary::Segment,
    )
    .unwrap();
    let env = sample_environment(&spec, 0).unwrap();
    let mig = Migration::standard(1.0).unwrap();
    assert!(matches!(env.n3(0, mig), Err(Error::OutOfWindow { .. })));
    assert!(matches!(env.n3(2, mig), Err(Error::OutOfWindow { .. })));
    assert!(env.n3(1, mig).is_ok());
}

#[test]
fn reversible_pi_constant_is_one() {
    let env = sample_environment(&constant(2.0, 12), 0).unwrap();
    let pi = env.reversible_pi(Migration::standard(1.0).unwrap());
    assert!(pi.iter().all(|p| (p - 1.0).abs() < 1e-15));
}

#[test]
fn reversible_pi_periodic_12_alternates() {
    let env = sample_environment(&periodic_12(8), 0).unwrap();
    let pi = env.reversible_pi(Migration::standard(1.0).unwrap());
    for (x, p) in pi.iter().enumerate() {
        let want = if x % 2 == 0 { 5.0 / 6.5 } else { 8.0 / 6.5 };
        assert!((p - want).abs() < 1e-14, "pi[{x}] = {p}");
    }
}

#[test]
fn ensemble_average_oracles() {
    let c1 = constant(1.0, 4);
    assert_eq!(ensemble_average(&c1, Functional::NTimesN3).unwrap(), 3.0);

    let iid = iid_12();
    let cases = [
        (Functional::InvPairProduct, 0.5625),
        (Functional::NTimesN3, 7.0),
        (Functional::NTimesN3Sq, 33.75),
        (Functional::NTimesN3AllSq, 59.25),
        (Functional::MeanSize, 1.5),
    ];
    for (f, want) in cases {
        let got = ensemble_average(&iid, f).unwrap();
        assert!((got - want).abs() < 1e-13, "{}: got {got}, want {want}", f.name());
    }

    let per = periodic_12(8);
    assert!((ensemble_average(&per, Functional::NTimesN3).unwrap() - 6.5).abs() < 1e-13);
    assert!((ensemble_average(&per, Functional::InvPairProduct).unwrap() - 0.5).abs() < 1e-14);
}

#[test]
fn functional_names_parse() {
    for f in Functional::ALL {
        assert_eq!(Functional::from_name(f.name()).unwrap(), f);
    }
    // Typeset forms with middle dots and super/subscripts.
    assert_eq!(Functional::from_name("1/(N\u{00b7}T\u{00b9}N)").unwrap(), Functional::InvPairProduct);
    assert_eq!(Functional::from_name("N\u{00b7}N\u{2083}").unwrap(), Functional::NTimesN3);
    assert_eq!(Functional::from_name("N\u{00b7}N\u{2083}\u{00b2}").unwrap(), Functional::NTimesN3Sq);
    assert_eq!(
        Functional::from_name("(N\u{00b7}N\u{2083})\u{00b2}").unwrap(),
        Functional::NTimesN3AllSq
    );
    assert!(matches!(
        Functional::from_name("N^5"),
        Err(Error::UnknownFunctional(_))
    ));
}

#[test]
fn effective_params_constant_closed_form() {
    for (n0, m) in [(1.0, 1.0), (2.0, 0.7), (5.0, 1.3)] {
        let spec = constant(n0, 4);
        let p = effective_params(&spec, Migration::standard(m).unwrap()).unwrap();
        assert!((p.sigma2 - 2.0 * m / 3.0).abs() < 1e-14, "sigma2 {}", p.sigma2);
        assert!((p.gamma - 1.0 / n0).abs() < 1e-14, "gamma {}", p.gamma);
    }
    // Conservative flat case: sigma2 = m exactly, gamma unchanged.
    let p = effective_params(&constant(2.0, 4), Migration::conservative(0.5).unwrap()).unwrap();
    assert!((p.sigma2 - 0.5).abs() < 1e-14);
    assert!((p.gamma - 0.5).abs() < 1e-14);
}

#[test]
fn effective_params_iid_12_oracle() {
    let p = effective_params(&iid_12(), Migration::standard(1.0).unwrap()).unwrap();
    assert!((p.c - 0.5625).abs() < 1e-14);
    assert!((p.mean_n_n3 - 7.0).abs() < 1e-13);
    assert!((p.mean_n_n3_sq - 33.75).abs() < 1e-13);
    assert!((p.mean_n_n3_all_sq - 59.25).abs() < 1e-13);
    assert!((p.sigma2 - 2.0 / 3.9375).abs() < 1e-13);
    assert!((p.gamma - 33.75 / 59.25).abs() < 1e-13);
    // Frozen decimals.
    assert!((p.sigma2 - 0.5079365079365079).abs() < 1e-12);
    assert!((p.gamma - 0.569620253164557).abs() < 1e-12);
}

#[test]
fn effective_params_periodic_12_oracle() {
    let p = effective_params(&periodic_12(8), Migration::standard(1.0).unwrap()).unwrap();
    assert!((p.c - 0.5).abs() < 1e-14);
    assert!((p.mean_n_n3 - 6.5).abs() < 1e-13);
    assert!((p.mean_n_n3_sq - 28.5).abs() < 1e-13);
    assert!((p.mean_n_n3_all_sq - 44.5).abs() < 1e-13);
    assert!((p.sigma2 - 0.6153846153846154).abs() < 1e-13);
    assert!((p.gamma - 28.5 / 44.5).abs() < 1e-13);
    assert!((p.gamma - 0.6404494382022472).abs() < 1e-12);
}

#[test]
fn uniform_family_quadrature_matches_moment_formulas() {
    let spec = EnvironmentSpec::new(
        Family::IidUniform { lo: 1.0, hi: 2.0 },
        2.0,
        8,
        Boundary::Ring,
    )
    .unwrap();
    let p = effective_params(&spec, Migration::standard(1.0).unwrap()).unwrap();
    // Moments of Uniform[1,2].
    let (mu, mu2, mu3, mu4) = (1.5, 7.0 / 3.0, 15.0 / 4.0, 31.0 / 5.0);
    let c = 2.0f64.ln() * 2.0f64.ln();
    assert!((p.c - c).abs() < 1e-12, "c {}", p.c);
    assert!((p.mean_n_n3 - (2.0 * mu * mu + mu2)).abs() < 1e-12);
    assert!((p.mean_n_n3_sq - (mu3 + 6.0 * mu * mu2 + 2.0 * mu * mu * mu)).abs() < 1e-12);
    let all_sq = mu4 + 2.0 * mu2 * mu2 + 4.0 * mu3 * mu + 2.0 * mu2 * mu * mu;
    assert!((p.mean_n_n3_all_sq - all_sq).abs() < 1e-11);
    assert!(p.gamma <= 1.0 / mu + 1e-12);
}

#[test]
fn markov_symmetric_chain_reduces_to_iid() {
    // Rows (1/2, 1/2) make consecutive sites independent fair draws.
    let spec = EnvironmentSpec::new(
        Family::MarkovChain {
            states: vec![1.0, 2.0],
            rows: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        },
        2.0,
        10,
        Boundary::Ring,
    )
    .unwrap();
    let p = effective_params(&spec, Migration::standard(1.0).unwrap()).unwrap();
    assert!((p.sigma2 - 2.0 / 3.9375).abs() < 1e-13);
    assert!((p.gamma - 33.75 / 59.25).abs() < 1e-13);
}

#[test]
fn empirical_brackets_approach_exact_on_long_windows() {
    let spec = EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        400_000,
        Boundary::Ring,
    )
    .unwrap();
    let mig = Migration::standard(1.0).unwrap();
    let exact = effective_params(&spec, mig).unwrap();
    let env = sample_environment(&spec, 11).unwrap();
    let emp = effective_params_empirical(&env, mig).unwrap();
    assert_eq!(emp.path, BracketPath::Empirical { window: 400_000 });
    assert!((emp.sigma2 - exact.sigma2).abs() / exact.sigma2 < 0.01);
    assert!((emp.gamma - exact.gamma).abs() / exact.gamma < 0.01);
}

#[test]
fn scale_function_examples() {
    let mig = Migration::standard(1.0).unwrap();
    let flat = sample_environment(&constant(1.0, 10), 0).unwrap();
    let sf = scale_function(&flat, mig).unwrap();
    for k in 0..10 {
        assert!((sf.eval(k).unwrap() - k as f64).abs() < 1e-15);
    }
    // Tiling beyond the window and below zero.
    assert!((sf.eval(25).unwrap() - 25.0).abs() < 1e-12);
    assert!((sf.eval(-3).unwrap() + 3.0).abs() < 1e-12);

    let spec = EnvironmentSpec::new(
        Family::Periodic { pattern: vec![1.0, 2.0, 1.0] },
        2.0,
        3,
        Boundary::Segment,
    )
    .unwrap();
    let seg = sample_environment(&spec, 0).unwrap();
    let sf = scale_function(&seg, mig).unwrap();
    assert!((sf.eval(2).unwrap() - 1.0).abs() < 1e-15);
    assert!(sf.eval(3).is_err());
}

#[test]
fn scale_slope_estimates_reciprocal_pair_bracket() {
    let spec = EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        1_000_000,
        Boundary::Ring,
    )
    .unwrap();
    let env = sample_environment(&spec, 3).unwrap();
    let sf = scale_function(&env, Migration::standard(1.0).unwrap()).unwrap();
    assert!((sf.slope - 0.5625).abs() < 0.01, "slope {}", sf.slope);
}

#[test]
fn scale_martingale_residual_vanishes() {
    let mig_s = Migration::standard(0.8).unwrap();
    let mig_c = Migration::conservative(0.6).unwrap();
    for seed in 0..20 {
        let spec = EnvironmentSpec::new(
            Family::IidUniform { lo: 0.5, hi: 2.0 },
            2.0,
            257,
            Boundary::Ring,
        )
        .unwrap();
        let env = sample_environment(&spec, seed).unwrap();
        for mig in [mig_s, mig_c] {
            let sf = scale_function(&env, mig).unwrap();
            assert!(sf.max_residual <= 1e-12, "seed {seed}: residual {}", sf.max_residual);
        }
    }
}

#[test]
fn coupling_check_examples() {
    // X uniform on {1,2}, Y = X: E[XY] = 2.5 >= 2.25.
    let r = coupling_check(&[1.0, 2.0], |x| x, 1000, 1).unwrap();
    assert!((r.e_xy - 2.5).abs() < 1e-14);
    assert!((r.e_x_e_y - 2.25).abs() < 1e-14);
    assert!(r.passed());
    assert!(r.min_gap >= 0.0);

    // Constant X: equality.
    let r = coupling_check(&[3.0, 3.0], |x| x * x, 100, 2).unwrap();
    assert!((r.e_xy - r.e_x_e_y).abs() < 1e-12);
    assert!(r.passed());

    // X uniform on {1,2,3}, g = x^2: 12 >= 28/3.
    let r = coupling_check(&[1.0, 2.0, 3.0], |x| x * x, 10_000, 3).unwrap();
    assert!((r.e_xy - 12.0).abs() < 1e-13);
    assert!((r.e_x_e_y - 28.0 / 3.0).abs() < 1e-13);
    assert!(r.passed());
    assert_eq!(r.domination_failures, 0);

    // Decreasing map is rejected.
    assert!(matches!(
        coupling_check(&[1.0, 2.0], |x| -x, 10, 4),
        Err(Error::NonMonotone { .. })
    ));
}

#[test]
fn pi_window_average_constant_is_exactly_one() {
    let env = sample_environment(&constant(3.0, 64), 0).unwrap();
    let mig = Migration::standard(1.0).unwrap();
    for (n, delta, x) in [(100.0, 1.0, 0.0), (100.0, 2.5, 0.13), (30.0, 0.7, -0.4)] {
        let v = pi_window_average(&env, mig, n, delta, x).unwrap();
        assert_eq!(v, 1.0, "n={n} delta={delta} x={x}");
    }
}

#[test]
fn pi_window_average_iid_concentrates() {
    let spec = EnvironmentSpec::new(
        Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
        2.0,
        4000,
        Boundary::Ring,
    )
    .unwrap();
    let env = sample_environment(&spec, 17).unwrap();
    let mig = Migration::standard(1.0).unwrap();
    let mut rng = crate::seeds::rng_from(99);
    for _ in 0..10 {
        let x: f64 = rng.random_range(0.0..40.0);
        let v = pi_window_average(&env, mig, 1e4, 1.0, x).unwrap();
        assert!((v - 1.0).abs() <= 0.05, "x={x}: {v}");
    }
}

#[test]
fn pi_window_average_rejects_oversized_window() {
    let env = sample_environment(&constant(1.0, 32), 0).unwrap();
    let mig = Migration::standard(1.0).unwrap();
    assert!(matches!(
        pi_window_average(&env, mig, 100.0, 5.0, 0.0),
        Err(Error::RingTooSmall { .. })
    ));
}

#[test]
fn serialization_round_trips_all_families() {
    let mig_specs = vec![
        constant(1.5, 6),
        iid_12(),
        EnvironmentSpec::new(Family::IidUniform { lo: 0.5, hi: 2.0 }, 2.0, 9, Boundary::Segment)
            .unwrap(),
        periodic_12(10),
        EnvironmentSpec::new(
            Family::MarkovChain {
                states: vec![1.0, 2.0],
                rows: vec![vec![0.8, 0.2], vec![0.4, 0.6]],
            },
            2.0,
            12,
            Boundary::Ring,
        )
        .unwrap(),
    ];
    for spec in mig_specs {
        let env = sample_environment(&spec, 123).unwrap();
        let mut buf = Vec::new();
        env.write_to(&mut buf).unwrap();
        let back = Environment::read_from(&buf[..]).unwrap();
        assert_eq!(env, back, "family {:?}", spec.family);
    }
}

#[test]
fn plain_column_loads_as_ring() {
    let text = "1.5\n2\n0.5\n1\n";
    let env = Environment::read_from(text.as_bytes()).unwrap();
    assert_eq!(env.sizes(), &[1.5, 2.0, 0.5, 1.0]);
    assert_eq!(env.boundary(), Boundary::Ring);
    assert_eq!(env.k(), 2.0);
    assert!(matches!(env.spec().family, Family::Periodic { .. }));
}

#[test]
fn serialization_errors() {
    // Header/body length mismatch.
    let text = "# stepstone-env family=constant(1) K=1 L=5 seed=0 boundary=ring\n1\n1\n1\n";
    assert!(matches!(
        Environment::read_from(text.as_bytes()),
        Err(Error::LengthMismatch { expected: 5, got: 3 })
    ));
    // Unknown header key.
    let text = "# stepstone-env family=constant(1) K=1 L=3 seed=0 flavor=ring\n1\n1\n1\n";
    assert!(matches!(Environment::read_from(text.as_bytes()), Err(Error::EnvFormat(_))));
    // Body violating the declared ellipticity bound.
    let text = "# stepstone-env family=constant(1) K=1 L=3 seed=0 boundary=ring\n1\n4\n1\n";
    assert!(matches!(Environment::read_from(text.as_bytes()), Err(Error::Ellipticity { .. })));
    // Garbage size entry.
    assert!(matches!(
        Environment::read_from("1\nxyz\n2\n".as_bytes()),
        Err(Error::EnvFormat(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pi_mean_is_one(seed in 0u64..1000, m in 0.1f64..1.0) {
        let spec = EnvironmentSpec::new(
            Family::IidUniform { lo: 0.5, hi: 2.0 }, 2.0, 101, Boundary::Ring,
        ).unwrap();
        let env = sample_environment(&spec, seed).unwrap();
        let pi = env.reversible_pi(Migration::standard(m).unwrap());
        let mean = pi.iter().sum::<f64>() / pi.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_iid_specs_satisfy_parameter_inequalities(
        vals in proptest::collection::vec(0.5f64..3.0, 2..5),
        raw_probs in proptest::collection::vec(0.05f64..1.0, 2..5),
        m in 0.05f64..2.0,
    ) {
        let k = vals.len().min(raw_probs.len());
        let values: Vec<f64> = vals[..k].to_vec();
        let total: f64 = raw_probs[..k].iter().sum();
        let probs: Vec<f64> = raw_probs[..k].iter().map(|p| p / total).collect();
        let kk = values.iter().fold(1.0f64, |acc, v| acc.max(*v).max(1.0 / *v));
        let spec = EnvironmentSpec::new(
            Family::IidDiscrete { values, probs }, kk, 8, Boundary::Ring,
        ).unwrap();
        let p = effective_params(&spec, Migration::standard(m).unwrap()).unwrap();
        prop_assert!(p.sigma2 <= 2.0 * m / 3.0 + 1e-12);
        prop_assert!(p.gamma <= 1.0 / p.mean_n + 1e-12);
        if m <= 1.0 {
            let pc = effective_params(&spec, Migration::conservative(m).unwrap()).unwrap();
            prop_assert!(pc.sigma2 <= m + 1e-12);
            prop_assert!(pc.gamma <= 1.0 / pc.mean_n + 1e-12);
        }
    }

    #[test]
    fn scale_cocycle_is_exact(seed in 0u64..500, k in 0i64..40, l in 0i64..40) {
        let spec = EnvironmentSpec::new(
            Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
            2.0, 41, Boundary::Ring,
        ).unwrap();
        let env = sample_environment(&spec, seed).unwrap();
        let mig = Migration::standard(1.0).unwrap();
        let sf = scale_function(&env, mig).unwrap();
        // Shifted window: rotate the sizes by k and rebuild.
        let len = env.len() as i64;
        let rotated: Vec<f64> = (0..len)
            .map(|i| env.sizes()[((i + k).rem_euclid(len)) as usize])
            .collect();
        let shifted = scale_function(&Environment::from_sizes(rotated).unwrap(), mig).unwrap();
        let lhs = sf.eval(k + l).unwrap() - sf.eval(k).unwrap();
        let rhs = shifted.eval(l).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn window_average_is_lipschitz(seed in 0u64..200, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let spec = EnvironmentSpec::new(
            Family::IidDiscrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
            2.0, 512, Boundary::Ring,
        ).unwrap();
        let env = sample_environment(&spec, seed).unwrap();
        let mig = Migration::standard(1.0).unwrap();
        let (n, delta) = (900.0, 1.5);
        let k4 = env.k().powi(4);
        let vx = pi_window_average(&env, mig, n, delta, x).unwrap();
        let vy = pi_window_average(&env, mig, n, delta, y).unwrap();
        prop_assert!((vx - vy).abs() <= k4 / delta * (x - y).abs() + 1e-12);
    }
}
