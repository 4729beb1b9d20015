//! Empirical checks of the concentration, law-of-large-numbers, log-Lipschitz
//! and kernel estimates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::stats::{exceedance_grid, fit_rate, Center, Exceedance, BOOTSTRAP_RESAMPLES};
use super::{leg, LegFit, LegSample, RateReport};
use crate::dynamics::{sample_initial, InitialLaw};
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::measures::EmpiricalMeasure;
use crate::par;
use crate::rng::{lane, CounterStream, NoiseKey, Role};
use crate::transport::{wp_1d, wp_exact_capped};

fn report_from(
    samples: Vec<(usize, Vec<f64>)>,
    name: &str,
    gamma: f64,
    center: Center,
    seed: u64,
    metadata: BTreeMap<String, String>,
) -> RateReport {
    let grid = exceedance_grid();
    let per_n: Vec<LegSample> = samples
        .iter()
        .map(|(n, v)| LegSample {
            n: *n,
            t: 0.0,
            leg: name.to_string(),
            replicas: (0..v.len() as u32).collect(),
            values: v.clone(),
            exceedance: Exceedance::compute(v, *n, gamma, &grid),
        })
        .collect();
    let fit = fit_rate(&samples, center, BOOTSTRAP_RESAMPLES, &NoiseKey::new(seed, Role::Bootstrap, 0));
    let mut warnings = Vec::new();
    if fit.degenerate {
        warnings.push("degenerate fit: fewer than three usable grid points".to_string());
    }
    RateReport {
        per_n,
        fits: vec![LegFit {
            leg: name.to_string(),
            t: 0.0,
            center,
            fit: fit.clone(),
        }],
        fit,
        failures: Vec::new(),
        warnings,
        metadata,
    }
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("N_grid", "must be nonempty, positive and strictly increasing"));
    }
    Ok(())
}

/// Which coordinates of the initial data are sampled.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSpace {
    /// Positions only (`m = d`).
    Spatial,
    /// Positions and velocities (`m = 2d`).
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgConfig {
    pub law: InitialLaw,
    pub d: usize,
    pub space: SampleSpace,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub p: f64,
    pub replicas: u32,
    pub seed: u64,
    /// Size of the reference sample in one dimension.
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    /// Largest exact assignment attempted in higher dimension.
    #[serde(default = "default_fg_cap")]
    pub exact_cap: usize,
}

fn default_reference_size() -> usize {
    100_000
}

fn default_fg_cap() -> usize {
    8192
}

impl FgConfig {
    pub fn dim(&self) -> usize {
        match self.space {
            SampleSpace::Spatial => self.d,
            SampleSpace::Phase => 2 * self.d,
        }
    }
}

/// Decay exponent of `E W_p(ρ_N, ρ)` for a law with enough moments:
/// `-1/(2p)` when `p > m/2`, `-1/m` when `p < m/2` (and the former, up to a
/// logarithm, at equality).
pub fn fg_expected_slope(m: usize, p: f64) -> f64 {
    let half = m as f64 / 2.0;
    if p >= half {
        -1.0 / (2.0 * p)
    } else {
        -1.0 / m as f64
    }
}

fn rows(law: &InitialLaw, n: usize, d: usize, space: SampleSpace, key: &NoiseKey) -> Result<Vec<f64>> {
    let ens = sample_initial(law, n, d, key)?;
    Ok(match space {
        SampleSpace::Spatial => ens.positions,
        SampleSpace::Phase => ens.phase_rows(),
    })
}

/// Decay of `W_p` between an i.i.d. sample and its law.
///
/// In one dimension the law is represented by an independent sample of
/// `reference_size` points and the quantile coupling is exact. In higher
/// dimension the comparison is against an independent sample of the same
/// size through exact assignment; the two-sample distance decays at the same
/// rate.
pub fn validate_fg(cfg: &FgConfig) -> Result<RateReport> {
    check_grid(&cfg.n_grid)?;
    cfg.law.validate(cfg.d)?;
    if !(cfg.p >= 1.0) {
        return Err(invalid("p", "must be >= 1"));
    }
    if cfg.replicas == 0 {
        return Err(invalid("replicas", "must be >= 1"));
    }
    if let (InitialLaw::PolyDecay { gamma_v, .. }, SampleSpace::Phase) = (cfg.law, cfg.space) {
        if !(cfg.p < (gamma_v - cfg.d as f64) / 2.0) {
            return Err(invalid("p", "must be < q/2 for the law's finite moments"));
        }
    }
    let m = cfg.dim();
    let n_max = *cfg.n_grid.last().unwrap();
    if m > 1 && n_max > cfg.exact_cap {
        return Err(Error::AssignmentTooLarge(n_max));
    }
    let per_replica = par::map_range(cfg.replicas as usize, |r| -> Result<Vec<f64>> {
        let r = r as u32;
        let sample = rows(&cfg.law, n_max, cfg.d, cfg.space, &NoiseKey::new(cfg.seed, Role::Validation, r))?;
        let rkey = NoiseKey::new(cfg.seed, Role::Reference, r);
        let reference = if m == 1 {
            rows(&cfg.law, cfg.reference_size, cfg.d, cfg.space, &rkey)?
        } else {
            rows(&cfg.law, n_max, cfg.d, cfg.space, &rkey)?
        };
        cfg.n_grid
            .iter()
            .map(|&n| {
                if m == 1 {
                    Ok(wp_1d(&sample[..n], &reference, cfg.p)?.value)
                } else {
                    let a = EmpiricalMeasure::new(m, sample[..n * m].to_vec())?;
                    let b = EmpiricalMeasure::new(m, reference[..n * m].to_vec())?;
                    Ok(wp_exact_capped(&a, &b, cfg.p, cfg.exact_cap)?.value)
                }
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(usize, Vec<f64>)> = cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| (n, per_replica.iter().map(|v| v[k]).collect()))
        .collect();
    let expected = fg_expected_slope(m, cfg.p);
    let mut md = BTreeMap::new();
    md.insert("m".into(), format!("{m}"));
    md.insert("expected_slope".into(), format!("{expected}"));
    md.insert(
        "reference".into(),
        if m == 1 {
            format!("independent sample of {} points, quantile coupling", cfg.reference_size)
        } else {
            "independent sample of the same size, exact assignment".into()
        },
    );
    Ok(report_from(samples, leg::FG, -expected, Center::Median, cfg.seed, md))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlnConfig {
    pub kappa: f64,
    pub delta: f64,
    pub d: usize,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub m_exponent: u32,
    pub replicas: u32,
    pub seed: u64,
    /// Samples are uniform on `[-a, a]^d`.
    #[serde(default = "unit")]
    pub half_width: f64,
    /// Amplitude of the test kernel; `0` switches it off.
    #[serde(default = "unit")]
    pub c0: f64,
}

fn unit() -> f64 {
    1.0
}

/// `ε = 2κδ + (1 - dδ)` when `dδ < 1`, `2κδ` otherwise.
pub fn lln_epsilon(kappa: f64, delta: f64, d: usize) -> f64 {
    let dd = d as f64 * delta;
    2.0 * kappa * delta + if dd < 1.0 { 1.0 - dd } else { 0.0 }
}

/// `γ_m = (2 - ε) m - 1`.
pub fn lln_gamma(eps: f64, m: u32) -> f64 {
    (2.0 - eps) * m as f64 - 1.0
}

/// Radial test kernel `c0 min(N^(κδ), r^(-κ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestKernel {
    pub c0: f64,
    pub kappa: f64,
    /// Radius `N^(-δ)` where the two branches meet.
    pub rc: f64,
}

impl TestKernel {
    pub fn new(c0: f64, kappa: f64, delta: f64, big_n: usize) -> Self {
        Self {
            c0,
            kappa,
            rc: Float::powf(big_n as f64, -delta),
        }
    }

    #[inline]
    pub fn at(&self, r: f64) -> f64 {
        let r = r.max(self.rc);
        self.c0 * if self.kappa == 1.0 { 1.0 / r } else { Float::powf(r, -self.kappa) }
    }

    /// `∫_0^L h(r) dr`.
    fn primitive(&self, l: f64) -> f64 {
        let cap = self.at(0.0);
        if l <= self.rc {
            return cap * l;
        }
        let tail = if self.kappa == 1.0 {
            Float::ln(l / self.rc)
        } else {
            (Float::powf(l, 1.0 - self.kappa) - Float::powf(self.rc, 1.0 - self.kappa)) / (1.0 - self.kappa)
        };
        cap * self.rc + self.c0 * tail
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = Float::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if Float::abs(dz) < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Angle (radians) of the circle of radius `r` about `y` lying inside
/// `[-a, a]²`.
pub fn arc_inside_square(y: [f64; 2], r: f64, a: f64) -> f64 {
    let tau = 2.0 * PI;
    if r == 0.0 {
        return if y[0].abs() <= a && y[1].abs() <= a { tau } else { 0.0 };
    }
    let wrap = |t: f64| {
        let t = t % tau;
        if t < 0.0 {
            t + tau
        } else {
            t
        }
    };
    let mut cuts: Vec<f64> = vec![0.0, tau];
    for b in [-a, a] {
        let c = (b - y[0]) / r;
        if c.abs() <= 1.0 {
            let t = Float::acos(c);
            cuts.push(t);
            cuts.push(tau - t);
        }
        let s = (b - y[1]) / r;
        if s.abs() <= 1.0 {
            let t = Float::asin(s);
            cuts.push(wrap(t));
            cuts.push(wrap(PI - t));
        }
    }
    cuts.sort_by(|p, q| p.total_cmp(q));
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let px = y[0] + r * Float::cos(mid);
        let py = y[1] + r * Float::sin(mid);
        if px.abs() <= a && py.abs() <= a {
            total += w[1] - w[0];
        }
    }
    total
}

/// `h * ρ(y)` for `ρ` uniform on `[-a, a]^d`, `d ∈ {1, 2}`.
///
/// In one dimension the radial primitive is closed form. In two, the
/// integral is taken in polar coordinates about `y`: `∫ h(r) A(r) r dr`
/// with `A` the angle inside the square, by Gauss–Legendre on pieces
/// separated by the kinks of `h` and `A`.
pub fn box_convolution(h: &TestKernel, y: &[f64], a: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    match y.len() {
        1 => (h.primitive(a - y[0]) + h.primitive(a + y[0])) / (2.0 * a),
        2 => {
            let yy = [y[0], y[1]];
            let mut breaks = vec![0.0, h.rc];
            for k in 0..2 {
                breaks.push(a - yy[k]);
                breaks.push(a + yy[k]);
            }
            for sx in [-a, a] {
                for sy in [-a, a] {
                    breaks.push(Float::sqrt((sx - yy[0]) * (sx - yy[0]) + (sy - yy[1]) * (sy - yy[1])));
                }
            }
            let rmax = breaks[2..].iter().cloned().fold(0.0, f64::max);
            breaks.retain(|b| *b >= 0.0 && *b <= rmax);
            breaks.sort_by(|p, q| p.total_cmp(q));
            breaks.dedup();
            let (xs, ws) = nodes;
            let mut total = 0.0;
            for w in breaks.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                if hi <= lo {
                    continue;
                }
                const PIECES: usize = 2;
                let len = (hi - lo) / PIECES as f64;
                for k in 0..PIECES {
                    let a0 = lo + k as f64 * len;
                    let (mid, half) = (a0 + 0.5 * len, 0.5 * len);
                    for (x, wt) in xs.iter().zip(ws) {
                        let r = mid + half * x;
                        total += half * wt * h.at(r) * arc_inside_square(yy, r, a) * r;
                    }
                }
            }
            total / (4.0 * a * a)
        }
        _ => f64::NAN,
    }
}

/// `max_i |h*ρ_N(Y_i) - h*ρ(Y_i)|^(2m)` for one sample.
pub fn lln_statistic(h: &TestKernel, ys: &[f64], d: usize, a: f64, m: u32, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let n = ys.len() / d;
    let worst = par::map_range(n, |i| {
        let yi = &ys[i * d..(i + 1) * d];
        let mut s = 0.0;
        for j in 0..n {
            let yj = &ys[j * d..(j + 1) * d];
            let mut r2 = 0.0;
            for k in 0..d {
                let t = yi[k] - yj[k];
                r2 += t * t;
            }
            s += h.at(Float::sqrt(r2));
        }
        Float::abs(s / n as f64 - box_convolution(h, yi, a, nodes))
    })
    .into_iter()
    .fold(0.0, f64::max);
    Float::powi(worst, 2 * m as i32)
}

/// Decay of the sup-over-samples deviation of `h * ρ_N` from `h * ρ`,
/// averaged over replicas.
pub fn validate_lln(cfg: &LlnConfig) -> Result<RateReport> {
    check_grid(&cfg.n_grid)?;
    if !(1..=2).contains(&cfg.d) {
        return Err(invalid("d", "quadrature is available for d = 1 and d = 2"));
    }
    if !(cfg.kappa > 0.0 && cfg.delta > 0.0) {
        return Err(invalid("kappa", "kappa and delta must be > 0"));
    }
    let eps = lln_epsilon(cfg.kappa, cfg.delta, cfg.d);
    if !(eps > 0.0 && eps < 2.0) {
        return Err(Error::HypothesisViolated(
            "epsilon = 2 kappa delta + (1 - d delta)^+ must lie in (0, 2)".into(),
        ));
    }
    if !(cfg.m_exponent as f64 > 1.0 / (2.0 - eps)) {
        return Err(invalid("m_exponent", "must be > 1/(2 - epsilon)"));
    }
    if cfg.replicas == 0 {
        return Err(invalid("replicas", "must be >= 1"));
    }
    let law = InitialLaw::UniformBox {
        half_width: cfg.half_width,
    };
    law.validate(cfg.d)?;
    let nodes = gauss_legendre(16);
    let samples: Vec<(usize, Vec<f64>)> = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let h = TestKernel::new(cfg.c0, cfg.kappa, cfg.delta, n);
            let values = (0..cfg.replicas)
                .map(|r| {
                    let key = NoiseKey::new(cfg.seed ^ (n as u64).rotate_left(32), Role::Validation, r);
                    let ens = sample_initial(&law, n, cfg.d, &key)?;
                    Ok(lln_statistic(&h, &ens.positions, cfg.d, cfg.half_width, cfg.m_exponent, &nodes))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((n, values))
        })
        .collect::<Result<_>>()?;
    let gm = lln_gamma(eps, cfg.m_exponent);
    let mut md = BTreeMap::new();
    md.insert("epsilon".into(), format!("{eps}"));
    md.insert("gamma_m".into(), format!("{gm}"));
    md.insert("expected_slope".into(), format!("{}", -gm));
    Ok(report_from(samples, leg::LLN, gm, Center::Mean, cfg.seed, md))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoglipConfig {
    pub d: usize,
    /// Law of `(X, V)`; `(Y, W)` adds independent Gaussian noise of each
    /// scale to both coordinates.
    pub law: InitialLaw,
    pub p: f64,
    pub scales: Vec<f64>,
    pub samples: usize,
    /// Particle counts for the cut-off variant.
    pub big_n: Vec<u64>,
    pub delta: f64,
    pub seed: u64,
}

impl LoglipConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            d: 2,
            law: InitialLaw::standard_gaussian(),
            p: 1.0,
            scales: vec![1e-4, 1e-3, 1e-2, 1e-1],
            samples: 1_000_000,
            big_n: vec![256, 4096],
            delta: 0.3,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglipRow {
    pub variant: String,
    pub big_n: Option<u64>,
    pub scale: f64,
    pub lhs: f64,
    /// `E[G^p]` (or `E[G_N^p]`).
    pub moment: f64,
    /// `1 - ln⁻(E[G^p]) / p` for the exact kernel, `sqrt(ln N)` for the
    /// cut-off kernel.
    pub log_factor: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglipReport {
    pub rows: Vec<LoglipRow>,
    pub fitted_constant_exact: f64,
    pub fitted_constant_cutoff: f64,
    /// Largest over smallest ratio, per variant.
    pub spread_exact: f64,
    pub spread_cutoff: f64,
}

impl LoglipReport {
    pub fn passed(&self, spread_tol: f64) -> bool {
        self.spread_exact <= spread_tol && self.spread_cutoff <= spread_tol
    }
}

fn gaussian_sup_norm(law: &InitialLaw, d: usize, extra: f64) -> Result<f64> {
    match *law {
        InitialLaw::Gaussian { position_scale, .. } => {
            let var = position_scale * position_scale + extra * extra;
            Ok(Float::powf(2.0 * PI * var, -(d as f64) / 2.0))
        }
        _ => Err(Error::AnalyticSupNormRequired),
    }
}

fn norm(v: &[f64]) -> f64 {
    Float::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

/// Monte Carlo check of the log-Lipschitz estimate and its cut-off
/// counterpart over a family of perturbation scales.
pub fn validate_loglip(cfg: &LoglipConfig) -> Result<LoglipReport> {
    let d = cfg.d;
    cfg.law.validate(d)?;
    gaussian_sup_norm(&cfg.law, d, 0.0)?;
    if !(cfg.p >= 1.0) {
        return Err(invalid("p", "must be >= 1"));
    }
    if cfg.samples == 0 || cfg.scales.iter().any(|s| !(*s >= 0.0)) {
        return Err(invalid("scales", "need samples > 0 and scales >= 0"));
    }
    let (sx, sv) = match cfg.law {
        InitialLaw::Gaussian {
            position_scale,
            velocity_scale,
        } => (position_scale, velocity_scale),
        _ => unreachable!(),
    };
    let exact = KernelSpec::newtonian_exact(d)?;
    let cut: Vec<KernelSpec> = cfg
        .big_n
        .iter()
        .map(|&n| KernelSpec::newtonian_cutoff(d, cfg.delta, n))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = cfg.big_n.iter().map(|&n| Float::sqrt(Float::ln(n as f64))).collect();
    let ns = cfg.scales.len();
    let nk = 1 + cut.len();
    // Per scale and kernel: sums of the left side and of G^p.
    const CHUNK: usize = 4096;
    let chunks = cfg.samples.div_ceil(CHUNK);
    let key = NoiseKey::new(cfg.seed, Role::Validation, 0);
    let partial = par::map_range(chunks, |c| {
        let mut lhs = vec![0.0; ns * nk];
        let mut mom = vec![0.0; ns * nk];
        let mut s: CounterStream = key.stream(c as u32, lane::AUX);
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| s.gaussian()).collect() };
        let (mut f1, mut f2) = (vec![0.0; d], vec![0.0; d]);
        let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
        for _ in (c * CHUNK)..((c + 1) * CHUNK).min(cfg.samples) {
            let x: Vec<f64> = draw(d).iter().map(|v| v * sx).collect();
            let xb: Vec<f64> = draw(d).iter().map(|v| v * sx).collect();
            let zx = draw(d);
            let zxb = draw(d);
            let zv = draw(d);
            let _ = sv;
            let (nzx, nzv) = (norm(&zx), norm(&zv));
            for (si, &scale) in cfg.scales.iter().enumerate() {
                for k in 0..d {
                    a[k] = x[k] - xb[k];
                    b[k] = a[k] + scale * (zx[k] - zxb[k]);
                }
                for ki in 0..nk {
                    let (spec, w) = if ki == 0 { (&exact, 1.0) } else { (&cut[ki - 1], weights[ki - 1]) };
                    spec.force_into(&a, &mut f1).unwrap();
                    spec.force_into(&b, &mut f2).unwrap();
                    let df = Float::sqrt(f1.iter().zip(&f2).map(|(p, q)| (p - q) * (p - q)).sum::<f64>());
                    let g = scale * (w * nzx + nzv);
                    lhs[si * nk + ki] += df * Float::powf(g, cfg.p - 1.0);
                    mom[si * nk + ki] += Float::powf(g, cfg.p);
                }
            }
        }
        (lhs, mom)
    });
    let mut lhs = vec![0.0; ns * nk];
    let mut mom = vec![0.0; ns * nk];
    for (l, m) in &partial {
        for i in 0..ns * nk {
            lhs[i] += l[i];
            mom[i] += m[i];
        }
    }
    let total = cfg.samples as f64;
    let rho1 = gaussian_sup_norm(&cfg.law, d, 0.0)?;
    let mut rows = Vec::new();
    for (si, &scale) in cfg.scales.iter().enumerate() {
        let rho = rho1 + gaussian_sup_norm(&cfg.law, d, scale)?;
        for ki in 0..nk {
            let l = lhs[si * nk + ki] / total;
            let m = mom[si * nk + ki] / total;
            let (variant, big_n, factor) = if ki == 0 {
                let ln_minus = if m > 0.0 { Float::ln(m).min(0.0) } else { f64::NEG_INFINITY };
                ("exact", None, 1.0 - ln_minus / cfg.p)
            } else {
                ("cutoff", Some(cfg.big_n[ki - 1]), weights[ki - 1])
            };
            let rhs = if m > 0.0 { rho * m * factor } else { 0.0 };
            rows.push(LoglipRow {
                variant: variant.into(),
                big_n,
                scale,
                lhs: l,
                moment: m,
                log_factor: factor,
                rhs,
                ratio: (rhs > 0.0).then(|| l / rhs),
            });
        }
    }
    let stats = |v: &str| {
        let r: Vec<f64> = rows.iter().filter(|x| x.variant == v).filter_map(|x| x.ratio).collect();
        let hi = r.iter().cloned().fold(0.0, f64::max);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi, if r.is_empty() { 1.0 } else { hi / lo })
    };
    let (ce, se) = stats("exact");
    let (cc, sc) = stats("cutoff");
    Ok(LoglipReport {
        rows,
        fitted_constant_exact: ce,
        fitted_constant_cutoff: cc,
        spread_exact: se,
        spread_cutoff: sc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    /// Cut-off kernel; its `big_n` is replaced by each entry of `big_n`.
    pub kernel: KernelSpec,
    pub big_n: Vec<u64>,
    pub pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NCertificate {
    pub big_n: u64,
    /// `max |F(-x) + F(x)|`.
    pub antisymmetry: f64,
    /// Points outside the cut-off radius where the cut-off and exact forces
    /// differ in any bit.
    pub coincidence_mismatches: usize,
    /// `max |F(x)| / N^(αδ)`.
    pub cap_ratio: f64,
    /// Largest jump of `F` across the cut-off sphere relative to the cap.
    pub continuity_gap: f64,
    /// `max |F(x) - F(x+z)| / (l^N(x) |z|)` over `|z| <= α N^(-δ)`.
    pub envelope_constant: f64,
    /// `max |F(x) - F(y)| / lipschitz_bound(x, y)` (Newtonian only).
    pub lipschitz_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCertificate {
    pub per_n: Vec<NCertificate>,
    /// Largest over smallest envelope constant across `N`.
    pub envelope_spread: f64,
    pub lipschitz_max: Option<f64>,
}

impl KernelCertificate {
    pub fn passed(&self, spread_tol: f64, lipschitz_tol: f64) -> bool {
        self.per_n.iter().all(|c| {
            c.antisymmetry == 0.0 && c.coincidence_mismatches == 0 && c.cap_ratio <= 1.0 + 1e-12 && c.continuity_gap <= 1e-6
        }) && self.envelope_spread <= spread_tol
            && self.lipschitz_max.is_none_or(|l| l <= lipschitz_tol)
    }
}

fn unit_vector(s: &mut CounterStream, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| s.gaussian()).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    Float::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

/// Antisymmetry, cut-off coincidence, magnitude cap, continuity, the
/// weak-strong envelope estimate and (Newtonian) the Lipschitz estimate,
/// each over `pairs` random points per `N`.
pub fn kernel_certificates(cfg: &CertificateConfig) -> Result<KernelCertificate> {
    let base = cfg.kernel.validated()?;
    if !base.family.is_cutoff() {
        return Err(Error::EnvelopeWithoutCutoff);
    }
    let d = base.d;
    let exact_family = match base.family {
        KernelFamily::NewtonianCutoff => KernelFamily::NewtonianExact,
        _ => KernelFamily::PowerExact,
    };
    let mut per_n = Vec::new();
    for (ni, &big_n) in cfg.big_n.iter().enumerate() {
        let spec = base.with_big_n(big_n)?;
        let exact = KernelSpec {
            family: exact_family,
            ..spec
        };
        let rc = spec.cutoff_radius();
        let cap = spec.magnitude_cap();
        let a_eff = spec.exponent_alpha();
        let z_radius = if a_eff > 0.0 { a_eff * rc } else { rc };
        let mut s = NoiseKey::new(cfg.seed, Role::Validation, ni as u32).stream(0, lane::AUX);
        let mut c = NCertificate {
            big_n,
            antisymmetry: 0.0,
            coincidence_mismatches: 0,
            cap_ratio: 0.0,
            continuity_gap: 0.0,
            envelope_constant: 0.0,
            lipschitz_constant: (spec.family == KernelFamily::NewtonianCutoff).then_some(0.0),
        };
        for _ in 0..cfg.pairs {
            let u = unit_vector(&mut s, d);
            let r = rc * Float::powf(10.0, -1.0 + 3.0 * s.uniform());
            let x: Vec<f64> = u.iter().map(|v| v * r).collect();
            let fx = spec.force(&x)?;
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let fneg = spec.force(&neg)?;
            c.antisymmetry = c.antisymmetry.max(fx.iter().zip(&fneg).map(|(a, b)| Float::abs(a + b)).fold(0.0, f64::max));
            if r >= rc && exact.force(&x)? != fx {
                c.coincidence_mismatches += 1;
            }
            c.cap_ratio = c.cap_ratio.max(norm(&fx) / cap);
            let inner: Vec<f64> = u.iter().map(|v| v * rc * (1.0 - 1e-9)).collect();
            let outer: Vec<f64> = u.iter().map(|v| v * rc * (1.0 + 1e-9)).collect();
            c.continuity_gap = c.continuity_gap.max(dist(&spec.force(&inner)?, &spec.force(&outer)?) / cap);
            // Weak-strong estimate.
            let zu = unit_vector(&mut s, d);
            let zr = z_radius * Float::powf(s.uniform(), 1.0 / d as f64);
            let xz: Vec<f64> = x.iter().zip(&zu).map(|(a, b)| a + zr * b).collect();
            if zr > 0.0 {
                let ratio = dist(&fx, &spec.force(&xz)?) / (spec.envelope(&x)? * zr);
                c.envelope_constant = c.envelope_constant.max(ratio);
            }
            if let Some(l) = c.lipschitz_constant.as_mut() {
                let wu = unit_vector(&mut s, d);
                let wr = rc * Float::powf(10.0, -2.0 + 4.0 * s.uniform());
                let y: Vec<f64> = x.iter().zip(&wu).map(|(a, b)| a + wr * b).collect();
                let bound = spec.lipschitz_bound(&x, &y)?;
                if bound > 0.0 {
                    *l = l.max(dist(&fx, &spec.force(&y)?) / bound);
                }
            }
        }
        per_n.push(c);
    }
    let hi = per_n.iter().map(|c| c.envelope_constant).fold(0.0, f64::max);
    let lo = per_n.iter().map(|c| c.envelope_constant).fold(f64::INFINITY, f64::min);
    let lipschitz_max = per_n
        .iter()
        .filter_map(|c| c.lipschitz_constant)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    Ok(KernelCertificate {
        per_n,
        envelope_spread: hi / lo,
        lipschitz_max,
    })
}
