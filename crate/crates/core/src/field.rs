//! Direct-summation force fields `(1/M) Σ_j F(x_i - y_j)`.
//!
//! Sources are transposed into one contiguous array per coordinate and each
//! target accumulates into `LANES` independent partial sums that are folded
//! in a fixed order at the end. The summation order is therefore a function
//! of the source index alone: results do not depend on the worker count,
//! and the loop vectorizes without reassociating floating-point adds.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::{InversePower, PairKernel};
use crate::par;

const LANES: usize = 8;

/// Source positions stored coordinate-major.
#[derive(Debug, Clone)]
pub struct SourceCloud {
    d: usize,
    n: usize,
    coords: Vec<Vec<f64>>,
}

impl SourceCloud {
    /// Builds from a flat row-major `n × d` position array.
    pub fn from_rows(positions: &[f64], d: usize) -> Self {
        let n = positions.len() / d;
        let mut coords = vec![Vec::with_capacity(n); d];
        for row in positions.chunks_exact(d) {
            for (c, &v) in coords.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Self { d, n, coords }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

/// Radial factor with the exponent fixed at compile time where possible.
trait Radial: Copy + Send + Sync {
    fn eval(&self, r2: f64) -> f64;
}

#[derive(Clone, Copy)]
struct Fixed<const P: u8> {
    amplitude: f64,
    floor2: f64,
}

impl<const P: u8> Radial for Fixed<P> {
    // Same arithmetic as `PairKernel::radial`, so results agree bitwise.
    #[inline(always)]
    fn eval(&self, r2: f64) -> f64 {
        let m = if r2 > self.floor2 { r2 } else { self.floor2 };
        let pos = m > 0.0;
        let m = if pos { m } else { 1.0 };
        let amp = if pos { self.amplitude } else { 0.0 };
        let den = match P {
            0 => num_traits::Float::sqrt(m),
            1 => m,
            2 => m * num_traits::Float::sqrt(m),
            _ => {
                let s = num_traits::Float::sqrt(m);
                s * num_traits::Float::sqrt(s)
            }
        };
        amp / den
    }
}

#[derive(Clone, Copy)]
struct Dynamic(PairKernel);

impl Radial for Dynamic {
    #[inline(always)]
    fn eval(&self, r2: f64) -> f64 {
        self.0.radial(r2)
    }
}

#[inline(always)]
fn field_at<const D: usize, R: Radial>(target: &[f64], src: &[&[f64]; D], n: usize, k: R) -> [f64; D] {
    let mut t = [0.0; D];
    t.copy_from_slice(&target[..D]);
    let mut acc = [[0.0f64; LANES]; D];
    let full = n / LANES * LANES;
    let mut j0 = 0;
    while j0 < full {
        let mut blk: [&[f64; LANES]; D] = [&[0.0; LANES]; D];
        for c in 0..D {
            blk[c] = src[c][j0..j0 + LANES].try_into().unwrap();
        }
        let mut dx = [[0.0; LANES]; D];
        let mut r2 = [0.0; LANES];
        for c in 0..D {
            for l in 0..LANES {
                dx[c][l] = t[c] - blk[c][l];
                r2[l] += dx[c][l] * dx[c][l];
            }
        }
        let mut s = [0.0; LANES];
        for l in 0..LANES {
            s[l] = k.eval(r2[l]);
        }
        for c in 0..D {
            for l in 0..LANES {
                acc[c][l] += dx[c][l] * s[l];
            }
        }
        j0 += LANES;
    }
    for j in full..n {
        let l = j - full;
        let mut dx = [0.0; D];
        let mut r2 = 0.0;
        for c in 0..D {
            dx[c] = t[c] - src[c][j];
            r2 += dx[c] * dx[c];
        }
        let s = k.eval(r2);
        for c in 0..D {
            acc[c][l] += dx[c] * s;
        }
    }
    let mut out = [0.0; D];
    for c in 0..D {
        let mut s = 0.0;
        for l in 0..LANES {
            s += acc[c][l];
        }
        out[c] = s;
    }
    out
}

fn field_at_dyn(target: &[f64], src: &SourceCloud, k: &PairKernel, out: &mut [f64]) {
    let d = src.d;
    let mut acc = vec![[0.0f64; LANES]; d];
    let mut dx = vec![0.0; d];
    for j in 0..src.n {
        let l = j % LANES;
        let mut r2 = 0.0;
        for c in 0..d {
            dx[c] = target[c] - src.coords[c][j];
            r2 += dx[c] * dx[c];
        }
        let s = k.radial(r2);
        for c in 0..d {
            acc[c][l] += dx[c] * s;
        }
    }
    for c in 0..d {
        let mut s = 0.0;
        for l in 0..LANES {
            s += acc[c][l];
        }
        out[c] = s;
    }
}

fn run<const D: usize, R: Radial>(targets: &[f64], src: &SourceCloud, k: R, norm: f64, out: &mut [f64]) {
    let mut cols: [&[f64]; D] = [&[]; D];
    for (c, col) in cols.iter_mut().enumerate() {
        *col = &src.coords[c];
    }
    let n = src.n;
    par::for_each_chunk(out, D, |i, o| {
        let f = field_at::<D, R>(&targets[i * D..(i + 1) * D], &cols, n, k);
        for c in 0..D {
            o[c] = f[c] / norm;
        }
    });
}

fn dispatch<const D: usize>(targets: &[f64], src: &SourceCloud, k: &PairKernel, norm: f64, out: &mut [f64]) {
    let (a, f) = (k.amplitude, k.floor2);
    match k.power {
        InversePower::Half => run::<D, _>(targets, src, Fixed::<0> { amplitude: a, floor2: f }, norm, out),
        InversePower::One => run::<D, _>(targets, src, Fixed::<1> { amplitude: a, floor2: f }, norm, out),
        InversePower::ThreeHalves => {
            run::<D, _>(targets, src, Fixed::<2> { amplitude: a, floor2: f }, norm, out)
        }
        InversePower::ThreeQuarters => {
            run::<D, _>(targets, src, Fixed::<3> { amplitude: a, floor2: f }, norm, out)
        }
        _ => run::<D, _>(targets, src, Dynamic(*k), norm, out),
    }
}

/// Writes `(1/norm) Σ_j F(x_i - y_j)` for every target row `x_i` into the
/// matching row of `out`. `targets` and `out` are flat row-major `n × d`.
pub fn accumulate(targets: &[f64], src: &SourceCloud, kernel: &PairKernel, norm: f64, out: &mut [f64]) {
    debug_assert_eq!(targets.len(), out.len());
    let d = src.d;
    if src.n == 0 || targets.is_empty() {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    match d {
        1 => dispatch::<1>(targets, src, kernel, norm, out),
        2 => dispatch::<2>(targets, src, kernel, norm, out),
        3 => dispatch::<3>(targets, src, kernel, norm, out),
        _ => par::for_each_chunk(out, d, |i, o| {
            field_at_dyn(&targets[i * d..(i + 1) * d], src, kernel, o);
            for v in o.iter_mut() {
                *v /= norm;
            }
        }),
    }
}

/// Single-target version, mainly for tests and diagnostics.
pub fn field_at_point(target: &[f64], src: &SourceCloud, kernel: &PairKernel, norm: f64) -> Vec<f64> {
    let mut out = vec![0.0; src.d];
    accumulate(target, src, kernel, norm, &mut out);
    out
}
