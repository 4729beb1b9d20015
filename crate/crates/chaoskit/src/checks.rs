//! Transport correctness checks against permutation brute force.

use anyhow::Result;
use chaoskit_core::measures::EmpiricalMeasure;
use chaoskit_core::rng::{lane, CounterStream, NoiseKey, Role};
use chaoskit_core::transport::{cost_matrix, wp_exact, wp_exact_with_plan, wp_sliced};
use itertools::Itertools;
use serde::Serialize;

use crate::config::OtCheck;

const ORDERS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceCheck {
    pub instances: usize,
    /// Instances whose optimal cost matches brute force bit for bit.
    pub bitwise_equal: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OneDimCheck {
    pub instances: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricCheck {
    pub triples: usize,
    pub max_asymmetry: f64,
    pub triangle_violations: usize,
    pub identity_failures: usize,
    pub permutation_failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OtReport {
    pub brute_force: BruteForceCheck,
    pub one_dim: OneDimCheck,
    pub metric: MetricCheck,
    pub tolerance: f64,
}

impl OtReport {
    pub fn passed(&self) -> bool {
        let m = &self.metric;
        self.brute_force.max_rel_error <= self.tolerance
            && self.one_dim.max_rel_error <= self.tolerance
            && m.max_asymmetry <= self.tolerance
            && m.triangle_violations == 0
            && m.identity_failures == 0
            && m.permutation_failures == 0
    }
}

fn cloud(s: &mut CounterStream, n: usize, m: usize) -> Result<EmpiricalMeasure> {
    Ok(EmpiricalMeasure::new(m, (0..n * m).map(|_| s.gaussian()).collect())?)
}

fn brute_force_total(cost: &[f64], n: usize) -> f64 {
    (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn ot_checks(cfg: &OtCheck, seed: u64) -> Result<OtReport> {
    let key = |k: usize| NoiseKey::new(seed, Role::Validation, k as u32);

    let mut brute = BruteForceCheck {
        instances: cfg.instances,
        bitwise_equal: 0,
        max_rel_error: 0.0,
    };
    for k in 0..cfg.instances {
        let mut s = key(k).stream(0, lane::AUX);
        let n = 1 + s.below(cfg.max_n);
        let m = 1 + s.below(3);
        let p = ORDERS[s.below(ORDERS.len())];
        let (a, b) = (cloud(&mut s, n, m)?, cloud(&mut s, n, m)?);
        let cost = cost_matrix(&a, &b, p);
        let (_, plan) = wp_exact_with_plan(&a, &b, p)?;
        let lap: f64 = plan.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        let best = brute_force_total(&cost, n);
        if lap == best {
            brute.bitwise_equal += 1;
        }
        brute.max_rel_error = brute.max_rel_error.max(rel(lap, best));
    }

    let mut one_dim = OneDimCheck {
        instances: cfg.instances,
        max_rel_error: 0.0,
    };
    for k in 0..cfg.instances {
        let mut s = key(k).stream(1, lane::AUX);
        let n = 1 + s.below(64);
        let p = ORDERS[s.below(ORDERS.len())];
        let (a, b) = (cloud(&mut s, n, 1)?, cloud(&mut s, n, 1)?);
        let exact = wp_exact(&a, &b, p)?.value;
        let sliced = wp_sliced(&a, &b, p, 4, &key(k))?.value;
        one_dim.max_rel_error = one_dim.max_rel_error.max(rel(exact, sliced));
    }

    let mut metric = MetricCheck {
        triples: cfg.triples,
        max_asymmetry: 0.0,
        triangle_violations: 0,
        identity_failures: 0,
        permutation_failures: 0,
    };
    for k in 0..cfg.triples {
        let mut s = key(k).stream(2, lane::AUX);
        let n = 1 + s.below(cfg.max_n);
        let m = 1 + s.below(3);
        let p = ORDERS[s.below(ORDERS.len())];
        let (a, b, c) = (cloud(&mut s, n, m)?, cloud(&mut s, n, m)?, cloud(&mut s, n, m)?);
        let w = |x: &EmpiricalMeasure, y: &EmpiricalMeasure| wp_exact(x, y, p).map(|r| r.value);
        let (ab, ba, bc, ac) = (w(&a, &b)?, w(&b, &a)?, w(&b, &c)?, w(&a, &c)?);
        let scale = ab.max(bc).max(ac).max(1.0);
        metric.max_asymmetry = metric.max_asymmetry.max((ab - ba).abs() / scale);
        if ac > ab + bc + cfg.tolerance * scale {
            metric.triangle_violations += 1;
        }
        if w(&a, &a)? != 0.0 {
            metric.identity_failures += 1;
        }
        let shift = s.below(n);
        let idx: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        if w(&a.select(&idx)?, &a)? != 0.0 {
            metric.permutation_failures += 1;
        }
    }

    Ok(OtReport {
        brute_force: brute,
        one_dim,
        metric,
        tolerance: cfg.tolerance,
    })
}
