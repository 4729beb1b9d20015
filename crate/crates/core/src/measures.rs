//! Empirical measures, moments and kernel density monitors.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::dynamics::Ensemble;
use crate::error::{invalid, Error, Result};

/// Uniformly weighted point cloud in `R^m`, rows stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    m: usize,
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(m: usize, points: Vec<f64>) -> Result<Self> {
        if m == 0 || points.len() % m != 0 {
            return Err(invalid("measure", "point buffer is not a whole number of rows"));
        }
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self { m, points })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.m..(i + 1) * self.m]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.m)
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut p = Vec::with_capacity(indices.len() * self.m);
        for &i in indices {
            p.extend_from_slice(self.point(i));
        }
        Self::new(self.m, p)
    }

    /// Keeps only coordinate `axis` of every row.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.rows().map(|r| r[axis]).collect()
    }
}

/// Positions of an ensemble, in particle order.
pub fn spatial_marginal(ens: &Ensemble) -> EmpiricalMeasure {
    EmpiricalMeasure {
        m: ens.d,
        points: ens.positions.clone(),
    }
}

/// Phase-space points `(x_i, v_i)` in `R^(2d)`.
pub fn phase_space(ens: &Ensemble) -> EmpiricalMeasure {
    EmpiricalMeasure {
        m: 2 * ens.d,
        points: ens.phase_rows(),
    }
}

/// `(1/n) Σ |z_i|^q`.
pub fn moment(meas: &EmpiricalMeasure, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(invalid("q", "moment order must be >= 1"));
    }
    let s: f64 = meas
        .rows()
        .map(|r| {
            let n2: f64 = r.iter().map(|c| c * c).sum();
            if q == 2.0 {
                n2
            } else {
                Float::powf(n2, 0.5 * q)
            }
        })
        .sum();
    Ok(s / meas.len() as f64)
}

/// Per-axis sample standard deviations.
pub fn axis_std(meas: &EmpiricalMeasure) -> Vec<f64> {
    let n = meas.len() as f64;
    (0..meas.dim())
        .map(|a| {
            let mean = meas.rows().map(|r| r[a]).sum::<f64>() / n;
            let var = meas.rows().map(|r| (r[a] - mean) * (r[a] - mean)).sum::<f64>() / (n - 1.0).max(1.0);
            Float::sqrt(var)
        })
        .collect()
}

/// `h_a = n^(-1/(m+4)) σ̂_a` for each axis.
pub fn silverman_bandwidth(meas: &EmpiricalMeasure) -> Vec<f64> {
    let f = Float::powf(meas.len() as f64, -1.0 / (meas.dim() as f64 + 4.0));
    axis_std(meas).into_iter().map(|s| f * s).collect()
}

/// Axis-aligned evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: usize,
}

impl Grid {
    /// `nodes` per axis spanning the sample range plus `margin` bandwidths.
    pub fn covering(meas: &EmpiricalMeasure, h: &[f64], nodes: usize, margin: f64) -> Self {
        let m = meas.dim();
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for r in meas.rows() {
            for a in 0..m {
                lo[a] = lo[a].min(r[a]);
                hi[a] = hi[a].max(r[a]);
            }
        }
        for a in 0..m {
            lo[a] -= margin * h[a];
            hi[a] += margin * h[a];
        }
        Self { lo, hi, nodes }
    }

    pub fn step(&self, a: usize) -> f64 {
        (self.hi[a] - self.lo[a]) / (self.nodes - 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.lo.len()).map(|a| self.step(a)).product()
    }

    fn total_nodes(&self) -> usize {
        self.nodes.pow(self.lo.len() as u32)
    }
}

/// Default grid resolution and margin.
pub const GRID_NODES: usize = 256;
pub const GRID_MARGIN: f64 = 3.0;

/// Gaussian product-kernel density estimate tabulated on a grid.
///
/// The sample is linearly binned onto the grid and convolved axis by axis
/// with the sampled Gaussian, truncated at five bandwidths.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub bandwidth: Vec<f64>,
    pub grid: Grid,
    values: Vec<f64>,
}

impl DensityEstimate {
    /// Silverman bandwidth and the default grid.
    pub fn new(sample: &EmpiricalMeasure) -> Result<Self> {
        let h = silverman_bandwidth(sample);
        Self::with_bandwidth(sample, h)
    }

    pub fn with_bandwidth(sample: &EmpiricalMeasure, h: Vec<f64>) -> Result<Self> {
        let grid = Grid::covering(sample, &h, GRID_NODES, GRID_MARGIN);
        Self::on_grid(sample, h, grid)
    }

    pub fn on_grid(sample: &EmpiricalMeasure, h: Vec<f64>, grid: Grid) -> Result<Self> {
        let m = sample.dim();
        if h.len() != m || grid.lo.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: h.len(),
            });
        }
        if h.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::DegenerateBandwidth);
        }
        if grid.nodes < 2 || (0..m).any(|a| !(grid.hi[a] > grid.lo[a])) {
            return Err(invalid("grid", "needs at least two nodes and positive extent"));
        }
        for r in sample.rows() {
            for a in 0..m {
                if r[a] - GRID_MARGIN * h[a] < grid.lo[a] - 1e-12 * h[a]
                    || r[a] + GRID_MARGIN * h[a] > grid.hi[a] + 1e-12 * h[a]
                {
                    return Err(Error::GridUnderflow);
                }
            }
        }
        let values = binned_kde(sample, &h, &grid);
        Ok(Self {
            bandwidth: h,
            grid,
            values,
        })
    }

    /// Density at every node, last axis fastest.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid integral of the estimate.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

fn binned_kde(sample: &EmpiricalMeasure, h: &[f64], grid: &Grid) -> Vec<f64> {
    let m = sample.dim();
    let g = grid.nodes;
    let total = grid.total_nodes();
    let mut bins = vec![0.0; total];
    let w = sample.weight();
    let steps: Vec<f64> = (0..m).map(|a| grid.step(a)).collect();
    let mut base = vec![0usize; m];
    let mut frac = vec![0.0; m];
    for r in sample.rows() {
        for a in 0..m {
            let u = (r[a] - grid.lo[a]) / steps[a];
            let k = (Float::floor(u) as isize).clamp(0, g as isize - 2) as usize;
            base[a] = k;
            frac[a] = (u - k as f64).clamp(0.0, 1.0);
        }
        for corner in 0..(1usize << m) {
            let mut idx = 0;
            let mut wt = w;
            for a in 0..m {
                let hi = (corner >> a) & 1;
                idx = idx * g + base[a] + hi;
                wt *= if hi == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            bins[idx] += wt;
        }
    }
    let mut cur = bins;
    let mut next = vec![0.0; total];
    for a in 0..m {
        let half = Float::ceil(5.0 * h[a] / steps[a]) as usize;
        let half = half.min(g - 1);
        let kern: Vec<f64> = (0..=half)
            .map(|k| {
                let z = k as f64 * steps[a] / h[a];
                Float::exp(-0.5 * z * z) / (h[a] * Float::sqrt(core::f64::consts::TAU))
            })
            .collect();
        // Axis `a` has stride g^(m-1-a).
        let stride = g.pow((m - 1 - a) as u32);
        let outer = total / (g * stride);
        for o in 0..outer {
            for s in 0..stride {
                let at = |i: usize| o * g * stride + i * stride + s;
                for i in 0..g {
                    let lo = i.saturating_sub(half);
                    let hi = (i + half).min(g - 1);
                    let mut acc = 0.0;
                    for j in lo..=hi {
                        acc += cur[at(j)] * kern[i.abs_diff(j)];
                    }
                    next[at(i)] = acc;
                }
            }
        }
        core::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Largest tabulated value of the estimate.
pub fn kde_sup_norm(dens: &DensityEstimate) -> f64 {
    dens.values.iter().cloned().fold(0.0, f64::max)
}

/// `(∫ f^ℓ)^(1/ℓ)` by grid quadrature; `ℓ = ∞` gives the sup norm.
pub fn lp_norm_estimate(dens: &DensityEstimate, ell: f64) -> Result<f64> {
    if !(ell >= 1.0) {
        return Err(invalid("ell", "must be in [1, inf]"));
    }
    if ell.is_infinite() {
        return Ok(kde_sup_norm(dens));
    }
    let s: f64 = dens.values.iter().map(|&f| Float::powf(f, ell)).sum();
    Ok(Float::powf(s * dens.grid.cell_volume(), 1.0 / ell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{NoiseKey, Role};
    use approx::assert_relative_eq;

    #[test]
    fn marginals_keep_order_and_dimension() {
        let e = Ensemble::new(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.1; 6], 0.0).unwrap();
        let s = spatial_marginal(&e);
        assert_eq!(s.len(), 3);
        assert_eq!(s.point(1), &[3.0, 4.0]);
        assert_eq!(phase_space(&e).dim(), 4);
        assert_eq!(phase_space(&e).point(0), &[1.0, 2.0, 0.1, 0.1]);
    }

    #[test]
    fn moment_examples() {
        let z = EmpiricalMeasure::new(2, vec![0.0; 6]).unwrap();
        assert_eq!(moment(&z, 2.0).unwrap(), 0.0);
        let m = EmpiricalMeasure::new(1, vec![1.0, -2.0]).unwrap();
        assert_eq!(moment(&m, 2.0).unwrap(), 2.5);
        assert!(moment(&m, 0.5).is_err());
    }

    #[test]
    fn single_bump_peak_and_l2() {
        let m = EmpiricalMeasure::new(1, vec![0.7]).unwrap();
        let k = DensityEstimate::with_bandwidth(&m, vec![1.0]).unwrap();
        assert_relative_eq!(kde_sup_norm(&k), 1.0 / (2.0 * core::f64::consts::PI).sqrt(), max_relative = 1e-3);
        let l2 = lp_norm_estimate(&k, 2.0).unwrap();
        assert_relative_eq!(l2, (0.5 / core::f64::consts::PI.sqrt()).sqrt(), max_relative = 1e-3);
        assert_eq!(lp_norm_estimate(&k, f64::INFINITY).unwrap(), kde_sup_norm(&k));
        assert_relative_eq!(lp_norm_estimate(&k, 1.0).unwrap(), 1.0, max_relative = 0.02);
    }

    #[test]
    fn coincident_samples_match_one_sample() {
        let one = EmpiricalMeasure::new(1, vec![0.2]).unwrap();
        let two = EmpiricalMeasure::new(1, vec![0.2, 0.2]).unwrap();
        let a = DensityEstimate::with_bandwidth(&one, vec![0.5]).unwrap();
        let b = DensityEstimate::with_bandwidth(&two, vec![0.5]).unwrap();
        assert_relative_eq!(kde_sup_norm(&a), kde_sup_norm(&b), max_relative = 1e-14);
    }

    #[test]
    fn mass_is_one_in_two_dimensions() {
        let key = NoiseKey::new(4, Role::Validation, 0);
        let mut s = key.stream(0, 0);
        let pts: Vec<f64> = (0..4000).map(|_| s.gaussian()).collect();
        let m = EmpiricalMeasure::new(2, pts).unwrap();
        let k = DensityEstimate::new(&m).unwrap();
        assert!((k.mass() - 1.0).abs() < 0.02, "{}", k.mass());
    }

    #[test]
    fn grid_must_cover_the_sample() {
        let m = EmpiricalMeasure::new(1, vec![0.0, 1.0]).unwrap();
        let g = Grid {
            lo: vec![0.0],
            hi: vec![1.0],
            nodes: 64,
        };
        let err = DensityEstimate::on_grid(&m, vec![0.1], g).unwrap_err();
        assert_eq!(err, Error::GridUnderflow);
    }

    #[test]
    fn degenerate_bandwidth_is_an_error() {
        let m = EmpiricalMeasure::new(1, vec![0.3, 0.3]).unwrap();
        assert_eq!(DensityEstimate::new(&m).unwrap_err(), Error::DegenerateBandwidth);
    }
}
