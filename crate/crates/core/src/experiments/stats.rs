//! Rate fitting and exceedance curves.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rng::{lane, NoiseKey};

/// Median, averaging the two middle values for even sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Linear-interpolation quantile of sorted data, `q ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = Float::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / Float::sqrt(sxx * syy))
}

/// Spearman rank correlation, `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Least-squares `(slope, intercept)` of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    (sxx > 0.0).then(|| {
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    })
}

/// Which location statistic a fit is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    #[default]
    Median,
    Mean,
}

impl Center {
    pub fn of(self, v: &[f64]) -> Option<f64> {
        match self {
            Center::Median => median(v),
            Center::Mean => mean(v),
        }
    }
}

/// Fitted log-log slope with a bootstrap confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub spearman: Option<f64>,
    /// Grid points that entered the fit.
    pub points: usize,
    /// Fewer than three usable grid points.
    pub degenerate: bool,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const MIN_FIT_POINTS: usize = 3;

/// Fits `log center(values) = a + slope · log N`.
///
/// Non-positive values carry no scale and are left out; grid points with no
/// values left are dropped. The interval comes from resampling the values
/// of every grid point independently.
pub fn fit_rate(samples: &[(usize, Vec<f64>)], center: Center, resamples: usize, key: &NoiseKey) -> RateFit {
    let usable: Vec<(f64, Vec<f64>)> = samples
        .iter()
        .map(|(n, v)| (*n as f64, v.iter().cloned().filter(|x| *x > 0.0 && x.is_finite()).collect::<Vec<_>>()))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    let mut distinct: Vec<f64> = usable.iter().map(|u| u.0).collect();
    distinct.dedup();
    let degenerate = distinct.len() < MIN_FIT_POINTS;
    let mut fit = RateFit {
        slope: None,
        intercept: None,
        ci_low: None,
        ci_high: None,
        spearman: None,
        points: usable.len(),
        degenerate,
    };
    if degenerate {
        return fit;
    }
    let xs: Vec<f64> = usable.iter().map(|u| Float::ln(u.0)).collect();
    let centers: Vec<f64> = usable.iter().map(|u| center.of(&u.1).unwrap()).collect();
    let ys: Vec<f64> = centers.iter().map(|c| Float::ln(*c)).collect();
    if let Some((s, a)) = ols(&xs, &ys) {
        fit.slope = Some(s);
        fit.intercept = Some(a);
    }
    fit.spearman = spearman(&xs, &centers);
    if resamples > 0 {
        let mut slopes = Vec::with_capacity(resamples);
        let mut buf = Vec::new();
        for b in 0..resamples {
            let mut s = key.stream(b as u32, lane::AUX);
            let ys: Vec<f64> = usable
                .iter()
                .map(|(_, v)| {
                    buf.clear();
                    buf.extend((0..v.len()).map(|_| v[s.below(v.len())]));
                    Float::ln(center.of(&buf).unwrap())
                })
                .collect();
            if let Some((sl, _)) = ols(&xs, &ys) {
                slopes.push(sl);
            }
        }
        slopes.sort_by(|a, b| a.total_cmp(b));
        if !slopes.is_empty() {
            fit.ci_low = Some(quantile_sorted(&slopes, 0.025));
            fit.ci_high = Some(quantile_sorted(&slopes, 0.975));
        }
    }
    fit
}

/// Threshold coefficients `c = 10^(k/8)`, `k = -24..=16`.
pub fn exceedance_grid() -> Vec<f64> {
    (-24..=16).map(|k| Float::powf(10.0, k as f64 / 8.0)).collect()
}

/// Empirical `P(value ≥ c N^(-γ))` on a grid of `c`, in grid order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Exceedance(pub Vec<(f64, f64)>);

impl Exceedance {
    pub fn compute(values: &[f64], big_n: usize, gamma: f64, grid: &[f64]) -> Self {
        if values.is_empty() {
            return Exceedance(Vec::new());
        }
        let scale = Float::powf(big_n as f64, -gamma);
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len() as f64;
        Exceedance(
            grid.iter()
                .map(|&c| {
                    let thr = c * scale;
                    let below = sorted.partition_point(|&v| v < thr);
                    (c, (sorted.len() - below) as f64 / n)
                })
                .collect(),
        )
    }

    /// Nonincreasing in `c` and within `[0, 1]`.
    pub fn is_monotone(&self) -> bool {
        self.0.iter().all(|&(_, f)| (0.0..=1.0).contains(&f)) && self.0.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

fn key_of(c: f64) -> String {
    alloc::format!("{c:.6e}")
}

impl Serialize for Exceedance {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (c, f) in &self.0 {
            m.serialize_entry(&key_of(*c), f)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for Exceedance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Exceedance;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from threshold coefficient to frequency")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut a: A) -> core::result::Result<Exceedance, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = a.next_entry::<String, f64>()? {
                    let c: f64 = k.parse().map_err(serde::de::Error::custom)?;
                    out.push((c, v));
                }
                out.sort_by(|x, y| x.0.total_cmp(&y.0));
                Ok(Exceedance(out))
            }
        }
        d.deserialize_map(V)
    }
}
