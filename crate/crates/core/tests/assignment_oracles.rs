//! The assignment solver against independent oracles.

use chaoskit_core::measures::EmpiricalMeasure;
use chaoskit_core::rng::{NoiseKey, Role};
use chaoskit_core::transport::{cost_matrix, lapjv, wp_exact};
use itertools::Itertools;

fn cloud(n: usize, m: usize, seed: u64, k: u32) -> Vec<f64> {
    let mut s = NoiseKey::new(seed, Role::Validation, k).stream(0, 0);
    (0..n * m).map(|_| s.gaussian()).collect()
}

fn brute_force(cost: &[f64], n: usize) -> f64 {
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

// Textbook O(n³) Hungarian method with potentials (1-based arrays).
fn hungarian(cost: &[f64], n: usize) -> f64 {
    let inf = f64::INFINITY;
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let (mut p, mut way) = (vec![0usize; n + 1], vec![0usize; n + 1]);
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[(p[j] - 1) * n + (j - 1)]).sum()
}

fn total(cost: &[f64], n: usize, plan: &[usize]) -> f64 {
    plan.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum()
}

fn is_permutation(plan: &[usize]) -> bool {
    let mut s = plan.to_vec();
    s.sort_unstable();
    s.iter().enumerate().all(|(i, &j)| i == j)
}

#[test]
fn matches_brute_force_on_small_instances() {
    for trial in 0..200u32 {
        let n = 1 + (trial as usize % 7);
        let m = 1 + (trial as usize % 3);
        let a = EmpiricalMeasure::new(m, cloud(n, m, 1, trial)).unwrap();
        let b = EmpiricalMeasure::new(m, cloud(n, m, 2, trial)).unwrap();
        for p in [1.0, 2.0] {
            let cost = cost_matrix(&a, &b, p);
            let plan = lapjv(&cost, n);
            assert!(is_permutation(&plan));
            let best = brute_force(&cost, n);
            assert!((total(&cost, n, &plan) - best).abs() <= 1e-12 * best.max(1.0), "trial {trial}");
            let w = wp_exact(&a, &b, p).unwrap().value;
            assert!((w - (best / n as f64).powf(1.0 / p)).abs() <= 1e-12);
        }
    }
}

#[test]
fn matches_hungarian_on_medium_instances() {
    for trial in 0..20u32 {
        let n = 20 + 9 * trial as usize;
        let a = EmpiricalMeasure::new(2, cloud(n, 2, 3, trial)).unwrap();
        let b = EmpiricalMeasure::new(2, cloud(n, 2, 4, trial)).unwrap();
        let cost = cost_matrix(&a, &b, 1.0);
        let plan = lapjv(&cost, n);
        assert!(is_permutation(&plan));
        let h = hungarian(&cost, n);
        assert!((total(&cost, n, &plan) - h).abs() <= 1e-9 * h, "trial {trial}: {} vs {h}", total(&cost, n, &plan));
    }
}

#[test]
fn handles_ties_and_integer_costs() {
    // Heavily tied costs stress the reduction phases.
    for trial in 0..50u32 {
        let n = 3 + trial as usize % 6;
        let mut s = NoiseKey::new(9, Role::Validation, trial).stream(0, 0);
        let cost: Vec<f64> = (0..n * n).map(|_| s.below(3) as f64).collect();
        let plan = lapjv(&cost, n);
        assert!(is_permutation(&plan));
        assert_eq!(total(&cost, n, &plan), brute_force(&cost, n));
    }
}
