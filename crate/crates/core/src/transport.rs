//! Wasserstein distances between uniform empirical measures.
//!
//! Equal-size measures in any dimension go through an exact dense
//! linear-assignment solver (Jonker–Volgenant column reduction followed by
//! shortest augmenting paths; the augmenting row reduction is left out
//! because it crawls on continuous costs). One
//! dimensional measures use the quantile coupling, which also handles
//! unequal sizes. The sliced estimator averages one dimensional costs over
//! random directions.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dynamics::Ensemble;
use crate::error::{invalid, Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::par;
use crate::rng::NoiseKey;

/// Largest problem the exact solver accepts.
pub const MAX_EXACT: usize = 4096;
pub const DEFAULT_PROJECTIONS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    ExactAssignment,
    Sliced,
    CoupledSup,
    Quantile,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactAssignment => "EXACT_ASSIGNMENT",
            Method::Sliced => "SLICED",
            Method::CoupledSup => "COUPLED_SUP",
            Method::Quantile => "QUANTILE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub method: Method,
    pub p: f64,
    pub n_projections: Option<usize>,
    pub stderr: Option<f64>,
}

impl DistanceResult {
    fn plain(value: f64, method: Method, p: f64) -> Self {
        Self {
            value,
            method,
            p,
            n_projections: None,
            stderr: None,
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid("p", "must be in [1, inf)"))
    }
}

#[inline]
fn cost_pow(d2: f64, p: f64) -> f64 {
    if p == 2.0 {
        d2
    } else if p == 1.0 {
        Float::sqrt(d2)
    } else {
        Float::powf(d2, 0.5 * p)
    }
}

/// Minimum-cost perfect matching of a dense `n × n` cost matrix (row
/// major). Returns `x` with row `i` assigned to column `x[i]`.
pub fn lapjv(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let c = |i: usize, j: usize| cost[i * n + j];
    const NONE: usize = usize::MAX;
    let mut x = vec![NONE; n];
    let mut y = vec![NONE; n];
    let mut v = vec![f64::INFINITY; n];

    // Column reduction and reduction transfer.
    for i in 0..n {
        for j in 0..n {
            let cij = c(i, j);
            if cij < v[j] {
                v[j] = cij;
                y[j] = i;
            }
        }
    }
    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = y[j];
        if x[i] == NONE {
            x[i] = j;
        } else {
            unique[i] = false;
            y[j] = NONE;
        }
    }
    let mut free = Vec::with_capacity(n);
    for i in 0..n {
        if x[i] == NONE {
            free.push(i);
        } else if unique[i] {
            let j = x[i];
            let mut min = f64::INFINITY;
            for j2 in 0..n {
                if j2 != j {
                    min = min.min(c(i, j2) - v[j2]);
                }
            }
            v[j] -= min;
        }
    }

    // Shortest augmenting paths for the rows still free. Columns are
    // scanned in natural order so each row is read sequentially.
    const TODO: u8 = 0;
    const SCAN: u8 = 1;
    const READY: u8 = 2;
    let mut d = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut state = vec![TODO; n];
    let mut scan: Vec<usize> = Vec::new();
    let mut ready: Vec<usize> = Vec::new();
    for &fi in &free {
        let row = &cost[fi * n..(fi + 1) * n];
        for j in 0..n {
            d[j] = row[j] - v[j];
            pred[j] = fi;
            state[j] = TODO;
        }
        ready.clear();
        let mut final_j = NONE;
        let mut mind = 0.0;
        while final_j == NONE {
            // New minimum among the unscanned columns.
            mind = f64::INFINITY;
            for j in 0..n {
                if state[j] == TODO && d[j] < mind {
                    mind = d[j];
                }
            }
            scan.clear();
            for j in 0..n {
                if state[j] == TODO && d[j] == mind {
                    state[j] = SCAN;
                    scan.push(j);
                    if y[j] == NONE {
                        final_j = j;
                    }
                }
            }
            if final_j != NONE {
                break;
            }
            'scan: while let Some(j0) = scan.pop() {
                state[j0] = READY;
                ready.push(j0);
                let i = y[j0];
                let row = &cost[i * n..(i + 1) * n];
                let h = row[j0] - v[j0] - mind;
                for j in 0..n {
                    if state[j] != TODO {
                        continue;
                    }
                    let red = row[j] - v[j] - h;
                    if red < d[j] {
                        d[j] = red;
                        pred[j] = i;
                        if red == mind {
                            if y[j] == NONE {
                                final_j = j;
                                break 'scan;
                            }
                            state[j] = SCAN;
                            scan.push(j);
                        }
                    }
                }
            }
        }
        for &j in &ready {
            v[j] += d[j] - mind;
        }
        let mut j = final_j;
        loop {
            let i = pred[j];
            y[j] = i;
            core::mem::swap(&mut j, &mut x[i]);
            if i == fi {
                break;
            }
        }
    }
    x
}

/// Cost matrix `|a_i - b_j|^p`.
pub fn cost_matrix(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Vec<f64> {
    let n = a.len();
    let nb = b.len();
    let m = a.dim();
    let mut cost = vec![0.0; n * nb];
    par::for_each_chunk(&mut cost, nb, |i, row| {
        let ai = a.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            let bj = b.point(j);
            let mut d2 = 0.0;
            for k in 0..m {
                let t = ai[k] - bj[k];
                d2 += t * t;
            }
            *c = cost_pow(d2, p);
        }
    });
    cost
}

/// Exact `W_p` between two equal-size measures, with the optimal matching.
pub fn wp_exact_with_plan(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<(DistanceResult, Vec<usize>)> {
    exact_capped(a, b, p, MAX_EXACT)
}

/// [`wp_exact`] with a caller-chosen size cap instead of [`MAX_EXACT`].
/// The dense cost matrix takes `8 n²` bytes.
pub fn wp_exact_capped(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64, cap: usize) -> Result<DistanceResult> {
    exact_capped(a, b, p, cap).map(|r| r.0)
}

fn exact_capped(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64, cap: usize) -> Result<(DistanceResult, Vec<usize>)> {
    check_p(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::Unbalanced);
    }
    let n = a.len();
    if n > cap {
        return Err(Error::AssignmentTooLarge(n));
    }
    let cost = cost_matrix(a, b, p);
    let plan = lapjv(&cost, n);
    let total: f64 = plan.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    let value = Float::powf((total / n as f64).max(0.0), 1.0 / p);
    Ok((DistanceResult::plain(value, Method::ExactAssignment, p), plan))
}

/// Exact `W_p` between two equal-size measures.
pub fn wp_exact(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<DistanceResult> {
    wp_exact_with_plan(a, b, p).map(|r| r.0)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|x, y| x.total_cmp(y));
    s
}

/// `W_p^p` between two sorted samples on the line through the quantile
/// coupling; the sizes may differ.
pub fn wpp_1d_sorted(a: &[f64], b: &[f64], p: f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == m {
        let s: f64 = a.iter().zip(b).map(|(x, y)| Float::powf(Float::abs(x - y), p)).sum();
        return s / n as f64;
    }
    // Merge the breakpoints i/n and j/m of the two quantile functions.
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut s = 0.0;
    while i < n && j < m {
        let ui = (i + 1) as f64 / n as f64;
        let uj = (j + 1) as f64 / m as f64;
        let next = ui.min(uj);
        s += (next - u) * Float::powf(Float::abs(a[i] - b[j]), p);
        u = next;
        // Advance both when breakpoints coincide: (i+1) m == (j+1) n.
        let adv_i = (i + 1) * m <= (j + 1) * n;
        let adv_j = (j + 1) * n <= (i + 1) * m;
        if adv_i {
            i += 1;
        }
        if adv_j {
            j += 1;
        }
    }
    s
}

/// `W_p` on the line; the sizes may differ.
pub fn wp_1d(a: &[f64], b: &[f64], p: f64) -> Result<DistanceResult> {
    check_p(p)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = wpp_1d_sorted(&sorted(a), &sorted(b), p);
    Ok(DistanceResult::plain(Float::powf(v, 1.0 / p), Method::Quantile, p))
}

/// Sliced `W_p`: mean of one dimensional `W_p^p` over `n_projections`
/// directions drawn uniformly from the sphere, then the `p`-th root. The
/// standard error is propagated to the root by the delta method.
pub fn wp_sliced(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    p: f64,
    n_projections: usize,
    key: &NoiseKey,
) -> Result<DistanceResult> {
    check_p(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if n_projections == 0 {
        return Err(invalid("n_projections", "must be >= 1"));
    }
    let m = a.dim();
    let per: Vec<f64> = par::map_range(n_projections, |k| {
        let mut dir = vec![0.0; m];
        if m == 1 {
            dir[0] = 1.0;
        } else {
            let mut s = key.stream(k as u32, crate::rng::lane::AUX);
            loop {
                dir.iter_mut().for_each(|c| *c = s.gaussian());
                let norm = Float::sqrt(dir.iter().map(|c| c * c).sum::<f64>());
                if norm > 1e-12 {
                    dir.iter_mut().for_each(|c| *c /= norm);
                    break;
                }
            }
        }
        let proj = |mu: &EmpiricalMeasure| -> Vec<f64> {
            sorted(&mu.rows().map(|r| r.iter().zip(&dir).map(|(x, w)| x * w).sum()).collect::<Vec<f64>>())
        };
        wpp_1d_sorted(&proj(a), &proj(b), p)
    });
    let k = per.len() as f64;
    let mean = per.iter().sum::<f64>() / k;
    let var = if per.len() > 1 {
        per.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let se_mean = Float::sqrt(var / k);
    let value = Float::powf(mean, 1.0 / p);
    let stderr = if mean > 0.0 {
        se_mean * Float::powf(mean, 1.0 / p - 1.0) / p
    } else {
        0.0
    };
    Ok(DistanceResult {
        value,
        method: Method::Sliced,
        p,
        n_projections: Some(n_projections),
        stderr: Some(stderr),
    })
}

fn check_coupled(a: &Ensemble, b: &Ensemble) -> Result<()> {
    if a.d != b.d {
        return Err(Error::DimensionMismatch {
            expected: a.d,
            found: b.d,
        });
    }
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn block_norms<'a>(a: &'a Ensemble, b: &'a Ensemble) -> impl Iterator<Item = (f64, f64)> + 'a {
    let d = a.d;
    let dist = |u: &[f64], w: &[f64]| Float::sqrt(u.iter().zip(w).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
    (0..a.len()).map(move |i| {
        let r = i * d..(i + 1) * d;
        (
            dist(&a.positions[r.clone()], &b.positions[r.clone()]),
            dist(&a.velocities[r.clone()], &b.velocities[r]),
        )
    })
}

/// `max_i sqrt(ln N) |X_i - Y_i| + |V_i - W_i|` (or without the weight):
/// the identity pairing, an upper bound on `W_∞` between the two clouds.
pub fn coupled_sup(interacting: &Ensemble, reference: &Ensemble, weighted: bool, big_n: f64) -> Result<DistanceResult> {
    check_coupled(interacting, reference)?;
    let w = if weighted {
        Float::sqrt(Float::ln(big_n).max(0.0))
    } else {
        1.0
    };
    let v = block_norms(interacting, reference).fold(0.0, |m: f64, (dx, dv)| m.max(w * dx + dv));
    Ok(DistanceResult::plain(v, Method::CoupledSup, f64::INFINITY))
}

/// Block sup norms `(max_i |X_i - Y_i|, max_i |V_i - W_i|)`.
pub fn block_sup(interacting: &Ensemble, reference: &Ensemble) -> Result<(f64, f64)> {
    check_coupled(interacting, reference)?;
    Ok(block_norms(interacting, reference).fold((0.0, 0.0), |(a, b): (f64, f64), (dx, dv)| (a.max(dx), b.max(dv))))
}

/// `min(1, sqrt(ln N) N^δ max|ΔX| + N^δ max|ΔV|)`.
pub fn j_functional(interacting: &Ensemble, reference: &Ensemble, delta: f64, big_n: f64) -> Result<f64> {
    let (sx, sv) = block_sup(interacting, reference)?;
    let nd = Float::powf(big_n, delta);
    let w = Float::sqrt(Float::ln(big_n).max(0.0));
    Ok((w * nd * sx + nd * sv).min(1.0))
}

/// The power-law counterpart of [`j_functional`], without the logarithmic
/// weight: `min(1, N^δ max|ΔX| + N^δ max|ΔV|)`.
pub fn j_functional_tilde(interacting: &Ensemble, reference: &Ensemble, delta: f64, big_n: f64) -> Result<f64> {
    let (sx, sv) = block_sup(interacting, reference)?;
    let nd = Float::powf(big_n, delta);
    Ok((nd * sx + nd * sv).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{NoiseKey, Role};
    use approx::assert_relative_eq;

    fn meas(m: usize, v: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(m, v.to_vec()).unwrap()
    }

    #[test]
    fn line_example() {
        let a = meas(1, &[0.0, 1.0]);
        let b = meas(1, &[0.5, 1.5]);
        assert_eq!(wp_exact(&a, &b, 1.0).unwrap().value, 0.5);
        assert_eq!(wp_1d(&[0.0, 1.0], &[0.5, 1.5], 1.0).unwrap().value, 0.5);
    }

    #[test]
    fn identical_multisets_are_at_distance_zero() {
        let a = meas(2, &[0.0, 1.0, 2.0, 3.0, -1.0, 0.5]);
        let b = meas(2, &[2.0, 3.0, -1.0, 0.5, 0.0, 1.0]);
        let (r, plan) = wp_exact_with_plan(&a, &b, 2.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(plan, vec![2, 0, 1]);
    }

    #[test]
    fn unbalanced_is_refused() {
        let a = meas(1, &[0.0, 1.0]);
        let b = meas(1, &[0.0]);
        assert_eq!(wp_exact(&a, &b, 1.0).unwrap_err(), Error::Unbalanced);
    }

    #[test]
    fn quantile_coupling_with_unequal_sizes() {
        // {0, 1} vs {0, 0.5, 1}: quantiles differ on (1/3, 1/2) by 0.5 and on
        // (1/2, 2/3) by 0.5.
        let v = wp_1d(&[0.0, 1.0], &[0.0, 0.5, 1.0], 1.0).unwrap().value;
        assert_relative_eq!(v, 1.0 / 6.0, max_relative = 1e-14);
        let v = wp_1d(&[0.0, 1.0], &[0.0, 0.0, 1.0, 1.0], 2.0).unwrap().value;
        assert_eq!(v, 0.0);
    }

    #[test]
    fn sliced_equals_exact_in_one_dimension() {
        let key = NoiseKey::new(3, Role::Projection, 0);
        let a = meas(1, &[0.3, -1.2, 2.5, 0.0]);
        let b = meas(1, &[1.0, 0.1, -0.4, 0.9]);
        for p in [1.0, 1.5, 2.0, 3.0] {
            let s = wp_sliced(&a, &b, p, 16, &key).unwrap();
            let e = wp_exact(&a, &b, p).unwrap();
            assert!((s.value - e.value).abs() <= 1e-12, "{p}");
        }
        let z = wp_sliced(&a, &a, 2.0, 8, &key).unwrap();
        assert_eq!((z.value, z.stderr), (0.0, Some(0.0)));
    }

    #[test]
    fn coupling_functionals() {
        let e = core::f64::consts::E;
        let a = Ensemble::new(1, vec![0.0], vec![0.0], 0.0).unwrap();
        let b = Ensemble::new(1, vec![0.1], vec![0.2], 0.0).unwrap();
        assert_relative_eq!(coupled_sup(&a, &b, true, e).unwrap().value, 0.3, max_relative = 1e-12);
        assert_eq!(coupled_sup(&a, &a, true, e).unwrap().value, 0.0);
        // N^δ = 2 with N = e.
        let delta = 2f64.ln();
        assert_relative_eq!(j_functional(&a, &b, delta, e).unwrap(), 0.6, max_relative = 1e-12);
        assert_eq!(j_functional(&a, &a, delta, e).unwrap(), 0.0);
        let far = Ensemble::new(1, vec![10.0], vec![0.0], 0.0).unwrap();
        assert_eq!(j_functional(&a, &far, delta, e).unwrap(), 1.0);
    }
}
