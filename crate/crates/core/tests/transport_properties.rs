use chaoskit_core::dynamics::Ensemble;
use chaoskit_core::measures::{phase_space, EmpiricalMeasure};
use chaoskit_core::rng::{NoiseKey, Role};
use chaoskit_core::transport::{coupled_sup, j_functional, wp_1d, wp_exact, wp_sliced};
use proptest::prelude::*;

fn cloud(n: usize, m: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    prop::collection::vec(-3.0f64..3.0, n * m).prop_map(move |v| EmpiricalMeasure::new(m, v).unwrap())
}

fn w(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> f64 {
    wp_exact(a, b, p).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn metric_axioms(n in 1usize..9, m in 1usize..4, seed in any::<u64>(), p in prop_oneof![Just(1.0), Just(2.0), 1.0f64..4.0]) {
        let mut s = NoiseKey::new(seed, Role::Validation, 0).stream(0, 0);
        let mut mk = || EmpiricalMeasure::new(m, (0..n * m).map(|_| s.gaussian()).collect()).unwrap();
        let (a, b, c) = (mk(), mk(), mk());
        let (ab, ba, bc, ac) = (w(&a, &b, p), w(&b, &a, p), w(&b, &c, p), w(&a, &c, p));
        let scale = ab.max(bc).max(ac).max(1.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * scale);
        prop_assert!(ac <= ab + bc + 1e-12 * scale);
        prop_assert_eq!(w(&a, &a, p), 0.0);
        if ab == 0.0 {
            let mut x: Vec<Vec<f64>> = a.rows().map(|r| r.to_vec()).collect();
            let mut y: Vec<Vec<f64>> = b.rows().map(|r| r.to_vec()).collect();
            x.sort_by(|u, v| u.partial_cmp(v).unwrap());
            y.sort_by(|u, v| u.partial_cmp(v).unwrap());
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn order_monotone(a in cloud(12, 2), b in cloud(12, 2)) {
        prop_assert!(w(&a, &b, 1.0) <= w(&a, &b, 2.0) * (1.0 + 1e-12));
    }

    #[test]
    fn permutation_invariant(a in cloud(10, 2), b in cloud(10, 2), shift in 0usize..10) {
        let idx: Vec<usize> = (0..10).map(|i| (i + shift) % 10).collect();
        let rolled = a.select(&idx).unwrap();
        let (x, y) = (w(&a, &b, 1.5), w(&rolled, &b, 1.5));
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn one_dimensional_quantile_equals_assignment(a in cloud(16, 1), b in cloud(16, 1), p in 1.0f64..3.0) {
        let q = wp_1d(a.points(), b.points(), p).unwrap().value;
        let e = w(&a, &b, p);
        prop_assert!((q - e).abs() <= 1e-12 * e.max(1.0));
        let key = NoiseKey::new(1, Role::Projection, 0);
        let s = wp_sliced(&a, &b, p, 3, &key).unwrap().value;
        prop_assert!((s - e).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn sliced_never_exceeds_exact(a in cloud(20, 3), b in cloud(20, 3)) {
        let key = NoiseKey::new(7, Role::Projection, 0);
        let s = wp_sliced(&a, &b, 2.0, 32, &key).unwrap().value;
        prop_assert!(s <= w(&a, &b, 2.0) * (1.0 + 1e-12));
    }

    #[test]
    fn domination_chain_on_coupled_states(
        x in prop::collection::vec(-2.0f64..2.0, 16),
        v in prop::collection::vec(-2.0f64..2.0, 16),
        dx in prop::collection::vec(-0.1f64..0.1, 16),
        dv in prop::collection::vec(-0.1f64..0.1, 16),
    ) {
        let a = Ensemble::new(2, x.clone(), v.clone(), 0.0).unwrap();
        let b = Ensemble::new(
            2,
            x.iter().zip(&dx).map(|(p, q)| p + q).collect(),
            v.iter().zip(&dv).map(|(p, q)| p + q).collect(),
            0.0,
        ).unwrap();
        let (pa, pb) = (phase_space(&a), phase_space(&b));
        let (w1, w2) = (w(&pa, &pb, 1.0), w(&pa, &pb, 2.0));
        let cs = coupled_sup(&a, &b, false, 8.0).unwrap().value;
        prop_assert!(w1 <= w2 * (1.0 + 1e-12));
        prop_assert!(w2 <= cs * (1.0 + 1e-12));
    }

    #[test]
    fn small_j_bounds_the_weighted_coupling(
        x in prop::collection::vec(-2.0f64..2.0, 16),
        dx in prop::collection::vec(-0.05f64..0.05, 16),
        delta in 0.05f64..0.45,
        n in 2u64..100_000,
    ) {
        let a = Ensemble::new(2, x.clone(), x.clone(), 0.0).unwrap();
        let shifted: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + q).collect();
        let b = Ensemble::new(2, shifted.clone(), shifted, 0.0).unwrap();
        let big_n = n as f64;
        let j = j_functional(&a, &b, delta, big_n).unwrap();
        let cs = coupled_sup(&a, &b, true, big_n).unwrap().value;
        prop_assert!(j <= 1.0);
        if j < 1.0 {
            prop_assert!(cs * big_n.powf(delta) < 1.0);
        }
    }
}

#[test]
fn unequal_sizes_in_higher_dimension_are_refused() {
    let a = EmpiricalMeasure::new(2, vec![0.0; 6]).unwrap();
    let b = EmpiricalMeasure::new(2, vec![0.0; 8]).unwrap();
    assert!(wp_exact(&a, &b, 1.0).is_err());
}
