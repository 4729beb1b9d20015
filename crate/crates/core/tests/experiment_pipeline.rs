use chaoskit_core::dynamics::{InitialLaw, SimParams};
use chaoskit_core::error::Error;
use chaoskit_core::experiments::{
    bound_curves, dt_halving, exceedance_grid, fit_rate, kernel_certificates, leg, run_chaos, validate_fg,
    CertificateConfig, Center, ChaosExperiment, Exceedance, ExperimentParams, FgConfig, Regime, SampleSpace,
};
use chaoskit_core::kernels::KernelSpec;
use chaoskit_core::rng::{NoiseKey, Role};
use proptest::prelude::*;

fn small(n_grid: Vec<usize>) -> ChaosExperiment {
    ChaosExperiment {
        params: ExperimentParams {
            n_grid,
            replicas: 4,
            times: vec![0.05, 0.1],
            p: 1.0,
            q: 4.0,
            epsilon: 1.0,
            gamma: Some(0.2),
            ell: None,
            pilot_factor: 2,
            fine_pilot: false,
        },
        kernel: KernelSpec::newtonian_cutoff(2, 0.3, 1).unwrap(),
        sim: SimParams::new(0.25, 0.05, 0.1, 3).unwrap(),
        init: InitialLaw::standard_gaussian(),
    }
}

#[test]
fn single_grid_point_gives_a_degenerate_fit() {
    let r = run_chaos(&small(vec![16])).unwrap();
    assert!(r.fit.degenerate);
    assert!(r.fit.slope.is_none());
    assert!(r.warnings.iter().any(|w| w.contains("degenerate")));
}

#[test]
fn report_layout_and_exceedance() {
    let r = run_chaos(&small(vec![16, 32, 64])).unwrap();
    for l in [leg::COUPLED_SUP, leg::J, leg::NU_FN, leg::MU_F] {
        for t in [0.05, 0.1] {
            for n in [16, 32, 64] {
                let s = r.sample(l, n, t).unwrap();
                assert_eq!(s.values.len(), 4);
                assert!(s.exceedance.is_monotone());
            }
        }
    }
    assert!(r.sample(leg::J_MAX, 64, 0.1).is_some());
    assert!(!r.fit.degenerate);
    assert_eq!(r.metadata["headline_leg"], leg::MU_F);
    assert!(r.failures.is_empty());
    // The coupling starts at zero and grows, the running max dominates.
    for n in [16, 32, 64] {
        let j = &r.sample(leg::J, n, 0.1).unwrap().values;
        let jm = &r.sample(leg::J_MAX, n, 0.1).unwrap().values;
        assert!(j.iter().zip(jm).all(|(a, b)| a <= b));
    }
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let e = small(vec![16, 32]);
    let run = |k: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .unwrap()
            .install(|| run_chaos(&e).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn fine_pilot_adds_the_cutoff_bias_leg() {
    let mut e = small(vec![16]);
    e.params.fine_pilot = true;
    let r = run_chaos(&e).unwrap();
    let s = r.sample(leg::FN_F, 16, 0.1).unwrap();
    assert_eq!(s.values.len(), 1);
    assert!(s.values[0] > 0.0);
}

#[test]
fn halving_compares_matching_medians() {
    let (a, b, h) = dt_halving(&small(vec![16, 32])).unwrap();
    assert_eq!(a.metadata["noise_substeps"], "2");
    assert_eq!(b.metadata["dt"], "0.025");
    assert_eq!(h.rows.len(), 4);
    assert!(h.rows.iter().all(|r| r.rel_change.is_finite()));
}

#[test]
fn one_dimensional_concentration_rate() {
    let cfg = FgConfig {
        law: InitialLaw::standard_gaussian(),
        d: 1,
        space: SampleSpace::Spatial,
        n_grid: vec![64, 128, 256, 512, 1024],
        p: 1.0,
        replicas: 30,
        seed: 5,
        reference_size: 100_000,
        exact_cap: 8192,
    };
    let r = validate_fg(&cfg).unwrap();
    let s = r.fit.slope.unwrap();
    assert!((s + 0.5).abs() < 0.15, "slope {s}");
    assert_eq!(r.metadata["expected_slope"], "-0.5");
}

#[test]
fn heavy_tails_limit_the_order() {
    let cfg = FgConfig {
        law: InitialLaw::PolyDecay {
            gamma_v: 6.0,
            box_half_width: 1.0,
        },
        d: 2,
        space: SampleSpace::Phase,
        n_grid: vec![16, 32, 64],
        p: 2.0,
        replicas: 2,
        seed: 5,
        reference_size: 1000,
        exact_cap: 8192,
    };
    match validate_fg(&cfg) {
        Err(Error::InvalidParameter { reason, .. }) => assert!(reason.contains("< q/2")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn certificates_pass_for_both_families() {
    for kernel in [
        KernelSpec::newtonian_cutoff(2, 0.3, 1).unwrap(),
        KernelSpec::power_cutoff(3, 0.5, 0.25, 1).unwrap(),
    ] {
        let c = kernel_certificates(&CertificateConfig {
            kernel,
            big_n: vec![16, 256, 4096],
            pairs: 5000,
            seed: 2,
        })
        .unwrap();
        assert!(c.passed(2.0, 8.0), "{c:?}");
    }
}

#[test]
fn bound_curve_examples() {
    let b = bound_curves(1e3, 0.1, 3.0, 2, 8.0, 1.0, 0.1);
    assert_eq!(b.regime, Regime::PAboveD);
    assert!((b.neg_log_a - 10.0).abs() < 1e-12);
    let c = bound_curves(1e2, 0.1, 2.0, 1, 8.0, 1.0, 0.0);
    assert!((c.neg_log_cn - 50.0).abs() < 1e-12);
    // p = d routes to the logarithmic branch even when the log is near one.
    let e = bound_curves(1e3, 0.1, 2.0, 2, 8.0, 1.0, 0.1);
    assert_eq!(e.regime, Regime::PEqualsD);
    assert!((e.neg_log_a - 1e3 * (0.1 / 12f64.ln()).powi(2)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn fit_recovers_exact_power_laws(slope in -2.0f64..1.0, c in 0.01f64..100.0) {
        let s: Vec<(usize, Vec<f64>)> = [32usize, 64, 128, 256, 512]
            .iter()
            .map(|&n| (n, vec![c * (n as f64).powf(slope); 3]))
            .collect();
        let f = fit_rate(&s, Center::Median, 20, &NoiseKey::new(1, Role::Bootstrap, 0));
        prop_assert!((f.slope.unwrap() - slope).abs() < 1e-10);
        prop_assert!((f.intercept.unwrap() - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn exceedance_is_monotone(values in prop::collection::vec(0.0f64..10.0, 1..60), n in 1usize..5000, gamma in 0.0f64..1.0) {
        prop_assert!(Exceedance::compute(&values, n, gamma, &exceedance_grid()).is_monotone());
    }
}
