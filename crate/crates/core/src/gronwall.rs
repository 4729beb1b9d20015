//! Gronwall-type bounds and numeric checks against them.
//!
//! Three inequalities are covered: the linear integral form
//! `f ≤ h + ∫ g f`, the logarithmic differential form
//! `f' ≤ C f (1 - ln⁻ f)` and the superlinear integral form
//! `f ≤ C0 + C1 ∫ f^γ`. Here `ln⁻ x = min(ln x, 0)`, so `1 - ln⁻ f` is
//! `1 - ln f` below one and `1` above.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{CounterStream, NoiseKey};

/// Nonnegative samples on a sorted time grid. Repeated grid points are
/// allowed and mark a jump; evaluation there is right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPath {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl ScalarPath {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::SizeMismatch(grid.len(), values.len()));
        }
        if grid.is_empty() {
            return Err(Error::EmptySample);
        }
        if grid.windows(2).any(|w| !(w[1] >= w[0])) || grid.iter().any(|t| !t.is_finite()) {
            return Err(invalid("grid", "must be sorted and finite"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("values", "must be finite and >= 0"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Linear interpolation.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::OutsideGrid(t));
        }
        let k = self.grid.partition_point(|&s| s <= t);
        if k == self.grid.len() {
            return Ok(self.values[k - 1]);
        }
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        if t1 == t0 {
            return Ok(v1);
        }
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }
}

/// Integer grid `0, dt, 2dt, …` up to `t_end`, with `t_end` appended if the
/// last step is partial.
pub fn uniform_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let n = Float::ceil(t_end / dt - 1e-9) as usize;
    let mut g: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    g.push(t_end);
    g
}

fn same_grid(a: &ScalarPath, b: &ScalarPath) -> Result<()> {
    if a.grid == b.grid {
        Ok(())
    } else {
        Err(invalid("paths", "must share one grid"))
    }
}

/// `h(0) e^{∫_0^t g} + ∫_0^t h'(s) e^{∫_s^t g} ds` by the trapezoidal rule
/// on the common grid of `h`, `h_prime` and `g`.
pub fn gronwall1_bound(h: &ScalarPath, h_prime: &ScalarPath, g: &ScalarPath, t: f64) -> Result<f64> {
    same_grid(h, h_prime)?;
    same_grid(h, g)?;
    if !(t >= h.start() && t <= h.end()) {
        return Err(Error::OutsideGrid(t));
    }
    // Grid truncated at t. Values are read by index so that at a repeated
    // grid point the interval ending there sees the left value.
    let j = h.grid.partition_point(|&s| s < t);
    let mut ts: Vec<f64> = h.grid[..j].to_vec();
    ts.push(t);
    let at_t = |p: &ScalarPath| {
        if p.grid[j] == t {
            p.values[j]
        } else {
            let (t0, t1) = (p.grid[j - 1], p.grid[j]);
            p.values[j - 1] + (p.values[j] - p.values[j - 1]) * (t - t0) / (t1 - t0)
        }
    };
    let mut gv: Vec<f64> = g.values[..j].to_vec();
    gv.push(at_t(g));
    let mut hp: Vec<f64> = h_prime.values[..j].to_vec();
    hp.push(at_t(h_prime));
    let mut cum = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for k in 1..ts.len() {
        acc += 0.5 * (ts[k] - ts[k - 1]) * (gv[k] + gv[k - 1]);
        cum.push(acc);
    }
    let total = acc;
    let mut integral = 0.0;
    for k in 1..ts.len() {
        let a = hp[k - 1] * Float::exp(total - cum[k - 1]);
        let b = hp[k] * Float::exp(total - cum[k]);
        integral += 0.5 * (ts[k] - ts[k - 1]) * (a + b);
    }
    Ok(h.values[0] * Float::exp(total) + integral)
}

/// `exp(1 - (1 - ln f0) e^{-Ct})` for `f0 < min(exp(1 - e^{CT}), 1)`.
pub fn gronwall2_bound(f0: f64, c: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(c > 0.0 && horizon > 0.0 && f0 >= 0.0) {
        return Err(invalid("gronwall2", "needs C > 0, T > 0 and f0 >= 0"));
    }
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::OutsideGrid(t));
    }
    let limit = Float::exp(1.0 - Float::exp(c * horizon)).min(1.0);
    if !(f0 < limit) {
        return Err(Error::InitialDatumTooLarge);
    }
    if f0 == 0.0 {
        return Ok(0.0);
    }
    Ok(Float::exp(1.0 - (1.0 - Float::ln(f0)) * Float::exp(-c * t)))
}

/// Which constant multiplies `t` in the superlinear bound
/// `(C0^{1-γ} - k t)^{1/(1-γ)}`.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuperlinearForm {
    /// `k = (γ-1) C1`, attained by `f' = C1 f^γ`.
    #[default]
    Exact,
    /// `k = C1/(γ-1)`, as written at the end of the published proof.
    Proof,
    /// `k = C1²/(γ-1)`, as written in the published statement.
    Statement,
}

impl SuperlinearForm {
    fn rate(self, c1: f64, gamma: f64) -> f64 {
        match self {
            SuperlinearForm::Exact => (gamma - 1.0) * c1,
            SuperlinearForm::Proof => c1 / (gamma - 1.0),
            SuperlinearForm::Statement => c1 * c1 / (gamma - 1.0),
        }
    }
}

/// Time at which the superlinear bound of `form` blows up.
pub fn gronwall3_blowup(c0: f64, c1: f64, gamma: f64, form: SuperlinearForm) -> f64 {
    Float::powf(c0, 1.0 - gamma) / form.rate(c1, gamma)
}

/// `(C0^{1-γ} - k t)^{1/(1-γ)}` with `k` chosen by `form`.
pub fn gronwall3_bound(c0: f64, c1: f64, gamma: f64, t: f64, form: SuperlinearForm) -> Result<f64> {
    if !(gamma > 1.0 && c0 > 0.0 && c1 > 0.0 && t >= 0.0) {
        return Err(invalid("gronwall3", "needs gamma > 1, C0 > 0, C1 > 0, t >= 0"));
    }
    let base = Float::powf(c0, 1.0 - gamma) - form.rate(c1, gamma) * t;
    if !(base > 0.0) {
        return Err(Error::BoundBlownUp);
    }
    Ok(Float::powf(base, 1.0 / (1.0 - gamma)))
}

/// Classical fourth-order Runge–Kutta for a scalar ODE, from `t0` to `t1`
/// with step at most `h`.
pub fn rk4(f: impl Fn(f64, f64) -> f64, t0: f64, y0: f64, t1: f64, h: f64) -> f64 {
    let n = Float::ceil((t1 - t0) / h - 1e-9).max(0.0) as u64;
    if n == 0 {
        return y0;
    }
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Solves `f = h + ∫_0^t g f` on the grid of `h` by the implicit
/// trapezoidal rule.
pub fn solve_linear_volterra(h: &ScalarPath, g: &ScalarPath) -> Result<Vec<f64>> {
    same_grid(h, g)?;
    let (ts, hv, gv) = (&h.grid, &h.values, &g.values);
    let mut f = Vec::with_capacity(ts.len());
    f.push(hv[0]);
    let mut integral = 0.0;
    for k in 1..ts.len() {
        let dt = ts[k] - ts[k - 1];
        let known = integral + 0.5 * dt * gv[k - 1] * f[k - 1];
        let denom = 1.0 - 0.5 * dt * gv[k];
        if !(denom > 0.0) {
            return Err(invalid("grid", "step too coarse for the implicit rule"));
        }
        let fk = (hv[k] + known) / denom;
        integral = known + 0.5 * dt * gv[k] * fk;
        f.push(fk);
    }
    Ok(f)
}

/// `1 - ln⁻ f`.
pub fn one_minus_log_minus(f: f64) -> f64 {
    if f < 1.0 {
        1.0 - Float::ln(f)
    } else {
        1.0
    }
}

/// Result of one randomized check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallTrial {
    pub lemma: u8,
    pub trial: u32,
    pub t: f64,
    pub numeric: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn uniform(s: &mut CounterStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.uniform()
}

/// Random nondecreasing piecewise-linear `h`, its piecewise-constant
/// derivative and a nonnegative piecewise-linear `g` on `[0, 1]`.
pub fn random_linear_instance(s: &mut CounterStream, knots: usize, dt: f64) -> Result<(ScalarPath, ScalarPath, ScalarPath)> {
    let kt: Vec<f64> = (0..=knots).map(|k| k as f64 / knots as f64).collect();
    let mut hk = Vec::with_capacity(knots + 1);
    hk.push(uniform(s, 0.0, 1.0));
    for _ in 0..knots {
        let last = hk[hk.len() - 1];
        hk.push(last + uniform(s, 0.0, 1.0));
    }
    let gk: Vec<f64> = (0..=knots).map(|_| uniform(s, 0.0, 2.0)).collect();
    // Each interior knot appears twice so the derivative can jump there.
    let steps_per = Float::round(1.0 / (knots as f64 * dt)) as usize;
    let mut grid = Vec::new();
    let mut hv = Vec::new();
    let mut hp = Vec::new();
    let mut gv = Vec::new();
    for seg in 0..knots {
        for k in 0..=steps_per {
            let w = k as f64 / steps_per as f64;
            let t = if k == steps_per {
                kt[seg + 1]
            } else {
                (kt[seg] + w * (kt[seg + 1] - kt[seg])).min(kt[seg + 1])
            };
            grid.push(t);
            hv.push(hk[seg] + w * (hk[seg + 1] - hk[seg]));
            hp.push((hk[seg + 1] - hk[seg]) * knots as f64);
            gv.push(gk[seg] + w * (gk[seg + 1] - gk[seg]));
        }
    }
    Ok((
        ScalarPath::new(grid.clone(), hv)?,
        ScalarPath::new(grid.clone(), hp)?,
        ScalarPath::new(grid, gv)?,
    ))
}

/// Linear-form check: the trapezoidal solution of the equality case stays
/// below the bound up to relative tolerance `1e-4` at every grid point.
pub fn check_linear(trials: u32, seed: u64) -> Result<Vec<GronwallTrial>> {
    let tol = 1e-4;
    (0..trials)
        .map(|trial| {
            let mut s = NoiseKey::new(seed, crate::rng::Role::Validation, trial).stream(1, crate::rng::lane::AUX);
            let (h, hp, g) = random_linear_instance(&mut s, 5, 1e-3)?;
            let f = solve_linear_volterra(&h, &g)?;
            let mut worst = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
            for (k, &t) in h.grid.iter().enumerate() {
                if k % 25 != 0 && k + 1 != h.grid.len() {
                    continue;
                }
                let b = gronwall1_bound(&h, &hp, &g, t)?;
                let excess = f[k] / b - 1.0;
                if excess > worst.3 {
                    worst = (t, f[k], b, excess);
                }
            }
            Ok(GronwallTrial {
                lemma: 1,
                trial,
                t: worst.0,
                numeric: worst.1,
                bound: worst.2,
                tolerance: tol,
                passed: worst.3 <= tol,
            })
        })
        .collect()
}

/// Logarithmic-form check: RK4 (step `1e-5`) of `f' = C f (1 - ln⁻ f)` from
/// an admissible `f0` never exceeds the bound by more than `1e-6`
/// (relative).
pub fn check_logarithmic(trials: u32, seed: u64) -> Result<Vec<GronwallTrial>> {
    let tol = 1e-6;
    (0..trials)
        .map(|trial| {
            let mut s = NoiseKey::new(seed, crate::rng::Role::Validation, trial).stream(2, crate::rng::lane::AUX);
            let c = uniform(&mut s, 0.2, 2.0);
            let horizon = uniform(&mut s, 0.25, 1.5);
            let limit = Float::exp(1.0 - Float::exp(c * horizon)).min(1.0);
            let f0 = limit * uniform(&mut s, 0.01, 0.99);
            let rhs = |_: f64, f: f64| c * f * one_minus_log_minus(f);
            let mut worst = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
            let (mut t, mut f) = (0.0, f0);
            let checkpoints = 10;
            for k in 1..=checkpoints {
                let t1 = if k == checkpoints {
                    horizon
                } else {
                    horizon * k as f64 / checkpoints as f64
                };
                f = rk4(rhs, t, f, t1, 1e-5);
                t = t1;
                let b = gronwall2_bound(f0, c, t, horizon)?;
                let excess = f / b - 1.0;
                if excess > worst.3 {
                    worst = (t, f, b, excess);
                }
            }
            Ok(GronwallTrial {
                lemma: 2,
                trial,
                t: worst.0,
                numeric: worst.1,
                bound: worst.2,
                tolerance: tol,
                passed: worst.3 <= tol,
            })
        })
        .collect()
}

/// Superlinear-form check: RK4 (step `1e-5`) of `f' = C1 f^γ`, `f(0) = C0`
/// agrees with the bound of `form` to `1e-6` (relative) up to 90% of the
/// blow-up time.
pub fn check_superlinear(trials: u32, seed: u64, form: SuperlinearForm) -> Result<Vec<GronwallTrial>> {
    let tol = 1e-6;
    (0..trials)
        .map(|trial| {
            let mut s = NoiseKey::new(seed, crate::rng::Role::Validation, trial).stream(3, crate::rng::lane::AUX);
            let c0 = uniform(&mut s, 0.5, 2.0);
            let c1 = uniform(&mut s, 0.5, 2.0);
            let gamma = uniform(&mut s, 1.5, 4.0);
            let t_end = 0.9 * gronwall3_blowup(c0, c1, gamma, SuperlinearForm::Exact);
            let rhs = |_: f64, f: f64| c1 * Float::powf(f, gamma);
            let mut worst = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
            let (mut t, mut f) = (0.0, c0);
            let checkpoints = 9;
            for k in 1..=checkpoints {
                let t1 = t_end * k as f64 / checkpoints as f64;
                f = rk4(rhs, t, f, t1, 1e-5);
                t = t1;
                let err = match gronwall3_bound(c0, c1, gamma, t, form) {
                    Ok(b) => (f, b, Float::abs(f / b - 1.0)),
                    Err(_) => (f, f64::INFINITY, f64::INFINITY),
                };
                if err.2 > worst.3 {
                    worst = (t, err.0, err.1, err.2);
                }
            }
            Ok(GronwallTrial {
                lemma: 3,
                trial,
                t: worst.0,
                numeric: worst.1,
                bound: worst.2,
                tolerance: tol,
                passed: worst.3 <= tol,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_examples() {
        let grid = uniform_grid(1.0, 1e-4);
        let zero = ScalarPath::from_fn(grid.clone(), |_| 0.0).unwrap();
        let one = ScalarPath::from_fn(grid.clone(), |_| 1.0).unwrap();
        let h = ScalarPath::from_fn(grid.clone(), |t| 1.0 + t * t).unwrap();
        let hp = ScalarPath::from_fn(grid.clone(), |t| 2.0 * t).unwrap();
        assert_relative_eq!(gronwall1_bound(&h, &hp, &zero, 0.7).unwrap(), 1.49, max_relative = 1e-7);
        let c = ScalarPath::from_fn(grid.clone(), |_| 3.0).unwrap();
        let g = ScalarPath::from_fn(grid.clone(), |_| 0.5).unwrap();
        assert_relative_eq!(gronwall1_bound(&c, &zero, &g, 1.0).unwrap(), 3.0 * 0.5f64.exp(), max_relative = 1e-9);
        let id = ScalarPath::from_fn(grid.clone(), |t| t).unwrap();
        let b = gronwall1_bound(&id, &one, &one, 1.0).unwrap();
        assert!((b - (core::f64::consts::E - 1.0)).abs() < 1e-6);
        assert_eq!(gronwall1_bound(&id, &one, &one, 1.5).unwrap_err(), Error::OutsideGrid(1.5));
    }

    #[test]
    fn logarithmic_examples() {
        assert_eq!(gronwall2_bound(0.0, 1.0, 0.5, 1.0).unwrap(), 0.0);
        assert_relative_eq!(gronwall2_bound(1e-3, 1.0, 0.0, 1.0).unwrap(), 1e-3, max_relative = 1e-12);
        let b = gronwall2_bound(1e-3, 1.0, 1.0, 1.0).unwrap();
        assert!((b - 0.1482).abs() < 1e-4, "{b}");
        assert_eq!(gronwall2_bound(0.5, 1.0, 0.1, 1.0).unwrap_err(), Error::InitialDatumTooLarge);
    }

    #[test]
    fn superlinear_examples() {
        use SuperlinearForm::*;
        assert_eq!(gronwall3_bound(1.7, 1.0, 2.5, 0.0, Exact).unwrap(), 1.7);
        for form in [Exact, Proof] {
            assert_relative_eq!(gronwall3_bound(1.0, 1.0, 2.0, 0.5, form).unwrap(), 2.0, max_relative = 1e-14);
        }
        let p = gronwall3_bound(1.0, 1.0, 3.0, 0.25, Proof).unwrap();
        assert!((p - 1.0690).abs() < 1e-4);
        let e = gronwall3_bound(1.0, 1.0, 3.0, 0.25, Exact).unwrap();
        assert_relative_eq!(e, 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(gronwall3_bound(1.0, 1.0, 2.0, 1.0, Exact).unwrap_err(), Error::BoundBlownUp);
        assert_relative_eq!(gronwall3_bound(1.0, 2.0, 2.0, 0.125, Statement).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn path_interpolation() {
        let p = ScalarPath::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0, 1.0, 3.0, 3.0]).unwrap();
        assert_eq!(p.value_at(0.5).unwrap(), 0.5);
        assert_eq!(p.value_at(1.0).unwrap(), 3.0);
        assert!(ScalarPath::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(ScalarPath::new(vec![0.0], vec![-1.0]).is_err());
    }
}
