//! Theoretical tail bounds with every unspecified constant set to 1.

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Regime of the concentration estimate, by comparing `p` with `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PAboveD,
    PEqualsD,
    PBelowD,
}

impl Regime {
    pub fn of(p: f64, d: usize) -> Self {
        let d = d as f64;
        if p > d {
            Regime::PAboveD
        } else if p == d {
            Regime::PEqualsD
        } else {
            Regime::PBelowD
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCurves {
    pub regime: Regime,
    /// `N (N x)^(-(q-ε)/p)`.
    pub fg_moment_term: f64,
    /// `-log a(N, x)`; the exponential term only applies for `x <= 1`.
    pub neg_log_a: f64,
    /// `N^((1/p)(1 - (1-pγ)(q-ε)/p))`.
    pub chaos_moment_term: f64,
    /// `-log C_N`.
    pub neg_log_cn: f64,
}

/// `-log a(N, x)`.
pub fn neg_log_a(big_n: f64, x: f64, p: f64, d: usize) -> f64 {
    match Regime::of(p, d) {
        Regime::PAboveD => big_n * x * x,
        Regime::PEqualsD => {
            let r = x / Float::ln(2.0 + 1.0 / x);
            big_n * r * r
        }
        Regime::PBelowD => big_n * Float::powf(x, 2.0 * d as f64 / p),
    }
}

/// `-log C_N` of the chaos estimate at threshold exponent `γ`.
pub fn neg_log_cn(big_n: f64, p: f64, d: usize, gamma: f64) -> f64 {
    match Regime::of(p, d) {
        Regime::PAboveD => Float::powf(big_n, 1.0 - 2.0 * p * gamma) / p,
        Regime::PEqualsD => {
            let l = Float::ln(2.0 + Float::powf(big_n, p * gamma));
            Float::powf(big_n, 1.0 - 2.0 * p * gamma) / (p * l * l)
        }
        Regime::PBelowD => Float::powf(big_n, 1.0 - 2.0 * d as f64 * gamma) / p,
    }
}

pub fn bound_curves(big_n: f64, x: f64, p: f64, d: usize, q: f64, epsilon: f64, gamma: f64) -> BoundCurves {
    let e = q - epsilon;
    BoundCurves {
        regime: Regime::of(p, d),
        fg_moment_term: big_n * Float::powf(big_n * x, -e / p),
        neg_log_a: neg_log_a(big_n, x, p, d),
        chaos_moment_term: Float::powf(big_n, (1.0 - (1.0 - p * gamma) * e / p) / p),
        neg_log_cn: neg_log_cn(big_n, p, d, gamma),
    }
}
