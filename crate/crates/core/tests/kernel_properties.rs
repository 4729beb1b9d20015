use chaoskit_core::kernels::{KernelFamily, KernelSpec};
use proptest::prelude::*;

fn cutoff_spec() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (2usize..=3, 0.05f64..0.3, 1u64..100_000).prop_map(|(d, delta, n)| KernelSpec::newtonian_cutoff(d, delta, n).unwrap()),
        (2usize..=3, 0.0f64..1.0, 0.05f64..0.3, 1u64..100_000)
            .prop_map(|(d, a, delta, n)| KernelSpec::power_cutoff(d, a * (d as f64 - 1.0) * 0.99, delta, n).unwrap()),
    ]
}

fn exact_twin(spec: &KernelSpec) -> KernelSpec {
    let family = match spec.family {
        KernelFamily::NewtonianCutoff => KernelFamily::NewtonianExact,
        _ => KernelFamily::PowerExact,
    };
    KernelSpec { family, ..*spec }
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0f64..1.0, d), -4.0f64..1.0).prop_map(|(u, e)| {
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        u.iter().map(|x| x / n * 10f64.powf(e)).collect()
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn antisymmetric_for_every_family(spec in cutoff_spec(), x in point(3), xi in prop_oneof![Just(1.0), Just(-1.0)]) {
        let spec = spec.with_xi(xi).unwrap();
        let x = &x[..spec.d];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        for s in [spec, exact_twin(&spec)] {
            let f = s.force(x).unwrap();
            let g = s.force(&neg).unwrap();
            for (a, b) in f.iter().zip(&g) {
                prop_assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn cutoff_coincides_with_exact_outside_the_radius(spec in cutoff_spec(), x in point(3), stretch in 1.0f64..50.0) {
        let x = &x[..spec.d];
        let r = spec.cutoff_radius();
        let y: Vec<f64> = x.iter().map(|v| v / norm(x) * r * stretch).collect();
        prop_assume!(norm(&y) >= r);
        prop_assert_eq!(spec.force(&y).unwrap(), exact_twin(&spec).force(&y).unwrap());
    }

    #[test]
    fn magnitude_never_exceeds_the_cap(spec in cutoff_spec(), x in point(3)) {
        let f = spec.force(&x[..spec.d]).unwrap();
        prop_assert!(norm(&f) <= spec.magnitude_cap() * (1.0 + 1e-12));
    }

    #[test]
    fn continuous_across_the_cutoff_sphere(spec in cutoff_spec(), x in point(3)) {
        let x = &x[..spec.d];
        let r = spec.cutoff_radius();
        let u: Vec<f64> = x.iter().map(|v| v / norm(x)).collect();
        let inner: Vec<f64> = u.iter().map(|v| v * r * (1.0 - 1e-10)).collect();
        let outer: Vec<f64> = u.iter().map(|v| v * r * (1.0 + 1e-10)).collect();
        let (a, b) = (spec.force(&inner).unwrap(), spec.force(&outer).unwrap());
        let gap = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-8 * spec.magnitude_cap());
    }

    #[test]
    fn cap_is_attained_just_inside_the_radius(spec in cutoff_spec()) {
        let mut x = vec![0.0; spec.d];
        x[0] = spec.cutoff_radius() * (1.0 - 1e-12);
        let f = spec.force(&x).unwrap();
        prop_assert!((norm(&f) / spec.magnitude_cap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn envelope_is_comparable_to_the_capped_power(spec in cutoff_spec(), x in point(3)) {
        let x = &x[..spec.d];
        let l = spec.envelope(x).unwrap();
        let a1 = spec.exponent_alpha() + 1.0;
        let direct = 1.0 / norm(x).max(spec.cutoff_radius()).powf(a1);
        prop_assert!(l >= direct * (1.0 - 1e-12));
        prop_assert!(l <= a1.powf(a1) * direct * (1.0 + 1e-12));
    }

    #[test]
    fn lipschitz_ratio_is_bounded(delta in 0.05f64..0.45, n in 1u64..1_000_000, x in point(2), y in point(2)) {
        let spec = KernelSpec::newtonian_cutoff(2, delta, n).unwrap();
        let b = spec.lipschitz_bound(&x, &y).unwrap();
        let fx = spec.force(&x).unwrap();
        let fy = spec.force(&y).unwrap();
        let diff = norm(&[fx[0] - fy[0], fx[1] - fy[1]]);
        prop_assert!(diff <= 8.0 * b + 1e-12);
    }
}

#[test]
fn newtonian_families_carry_alpha_d_minus_one() {
    for d in 2..=4 {
        let s = KernelSpec::newtonian_cutoff(d, 0.1, 64).unwrap();
        assert_eq!(s.exponent_alpha(), d as f64 - 1.0);
        let p = KernelSpec::power_cutoff(d, d as f64 - 1.5, 0.1, 64).unwrap();
        assert_eq!(p.exponent_alpha(), d as f64 - 1.5);
    }
}

#[test]
fn sign_parameter_only_takes_unit_values() {
    let s = KernelSpec::newtonian_cutoff(2, 0.3, 64).unwrap();
    assert!(s.with_xi(0.5).is_err());
    assert!(s.with_xi(-1.0).is_ok());
}
