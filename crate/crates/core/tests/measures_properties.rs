use chaoskit_core::measures::{kde_sup_norm, lp_norm_estimate, moment, DensityEstimate, EmpiricalMeasure};
use proptest::prelude::*;

fn cloud(m: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    (20usize..200).prop_flat_map(move |n| {
        prop::collection::vec(-5.0f64..5.0, n * m).prop_map(move |v| EmpiricalMeasure::new(m, v).unwrap())
    })
}

proptest! {
    #[test]
    fn moment_is_homogeneous(a in cloud(3), q in 1.0f64..6.0, k in -4i32..5, lambda in 0.1f64..10.0) {
        // Powers of two scale without rounding.
        let two = 2f64.powi(k);
        let b = EmpiricalMeasure::new(3, a.points().iter().map(|x| x * two).collect()).unwrap();
        prop_assert_eq!(moment(&b, 2.0).unwrap(), moment(&a, 2.0).unwrap() * two * two);
        let c = EmpiricalMeasure::new(3, a.points().iter().map(|x| x * lambda).collect()).unwrap();
        let (mc, ma) = (moment(&c, q).unwrap(), moment(&a, q).unwrap());
        prop_assert!((mc - ma * lambda.powf(q)).abs() <= 1e-12 * mc.max(1e-300));
    }

    #[test]
    fn kde_has_unit_mass(a in cloud(2)) {
        let dens = DensityEstimate::new(&a).unwrap();
        let mass = dens.mass();
        prop_assert!((0.98..=1.02).contains(&mass), "mass {}", mass);
        prop_assert!(kde_sup_norm(&dens) > 0.0);
    }

    #[test]
    fn lp_norms_interpolate(a in cloud(1)) {
        // Hölder: ||ρ||_2^2 <= ||ρ||_1 ||ρ||_∞.
        let dens = DensityEstimate::new(&a).unwrap();
        let l1 = lp_norm_estimate(&dens, 1.0).unwrap();
        let l2 = lp_norm_estimate(&dens, 2.0).unwrap();
        prop_assert!(l2 * l2 <= l1 * kde_sup_norm(&dens) * (1.0 + 1e-9));
    }
}

#[test]
fn moment_order_below_one_is_refused() {
    let a = EmpiricalMeasure::new(1, vec![1.0, 2.0]).unwrap();
    assert!(moment(&a, 0.5).is_err());
}
