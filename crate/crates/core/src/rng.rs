//! Counter-based random numbers.
//!
//! Every random quantity in a simulation is a pure function of a 64-bit
//! seed, a [`Role`], a replica index and a 128-bit counter built from the
//! particle index, the (fine) step index and a lane tag. Two runs that share
//! a [`NoiseKey`] therefore see identical increments no matter how the work
//! is scheduled, which is what makes synchronous coupling exact.
//!
//! The block function is Philox4x32-10.

use num_traits::Float;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Which part of an experiment a stream feeds. Streams with different roles
/// never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u32)]
pub enum Role {
    /// Shared by the interacting system and its reference copies.
    Coupled = 1,
    /// Pilot cloud standing in for the mean-field law.
    Pilot = 2,
    Subsample = 4,
    Projection = 5,
    Bootstrap = 6,
    Validation = 7,
    Reference = 8,
}

/// Lane tags separating the uses of one key.
pub mod lane {
    pub const DYNAMICS: u32 = 0;
    pub const INIT_POSITION: u32 = 1;
    pub const INIT_VELOCITY: u32 = 2;
    pub const INIT_RADIUS: u32 = 3;
    pub const AUX: u32 = 4;
}

/// Key of a family of counter-based streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseKey {
    pub seed: u64,
    pub role: Role,
    pub replica: u32,
}

/// Uniform on the open interval (0, 1) from the top 52 of 64 random bits.
#[inline(always)]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[inline(always)]
fn join(hi: u32, lo: u32) -> u64 {
    ((hi as u64) << 32) | lo as u64
}

impl NoiseKey {
    pub fn new(seed: u64, role: Role, replica: u32) -> Self {
        Self {
            seed,
            role,
            replica,
        }
    }

    #[inline]
    fn philox_key(&self) -> [u32; 2] {
        let k = splitmix64(self.seed ^ splitmix64(self.role as u64));
        [k as u32, (k >> 32) as u32]
    }

    /// Raw 128-bit block for `(particle, step, lane, pair)`.
    #[inline]
    pub fn block(&self, particle: u32, step: u32, lane: u32, pair: u32) -> [u32; 4] {
        let tag = (lane << 24) | (pair & 0x00FF_FFFF);
        philox4x32_10([particle, step, tag, self.replica], self.philox_key())
    }

    /// Two independent uniforms on (0, 1).
    #[inline]
    pub fn uniform_pair(&self, particle: u32, step: u32, lane: u32, pair: u32) -> (f64, f64) {
        let b = self.block(particle, step, lane, pair);
        (open_unit(join(b[0], b[1])), open_unit(join(b[2], b[3])))
    }

    /// Two independent standard Gaussians by Box–Muller on one block.
    #[inline]
    pub fn gaussian_pair(&self, particle: u32, step: u32, lane: u32, pair: u32) -> (f64, f64) {
        let (u1, u2) = self.uniform_pair(particle, step, lane, pair);
        let r = Float::sqrt(-2.0 * Float::ln(u1));
        let (s, c) = Float::sin_cos(core::f64::consts::TAU * u2);
        (r * c, r * s)
    }

    /// Fills `out` with i.i.d. standard Gaussians for one particle and step.
    #[inline]
    pub fn fill_gaussians(&self, particle: u32, step: u32, lane: u32, out: &mut [f64]) {
        let mut pair = 0u32;
        let mut chunks = out.chunks_exact_mut(2);
        for c in &mut chunks {
            let (a, b) = self.gaussian_pair(particle, step, lane, pair);
            c[0] = a;
            c[1] = b;
            pair += 1;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.gaussian_pair(particle, step, lane, pair).0;
        }
    }

    /// A sequential stream for samplers that consume a variable number of
    /// draws (rejection samplers, shuffles, bootstrap resampling).
    pub fn stream(&self, particle: u32, lane: u32) -> CounterStream {
        CounterStream::new(self.philox_key(), [particle, (lane << 24) ^ self.replica])
    }
}

/// Sequential view of a counter-based stream; implements [`RngCore`].
#[derive(Debug, Clone)]
pub struct CounterStream {
    key: [u32; 2],
    prefix: [u32; 2],
    index: u64,
    buf: [u32; 4],
    pos: usize,
}

impl CounterStream {
    pub fn new(key: [u32; 2], prefix: [u32; 2]) -> Self {
        Self {
            key,
            prefix,
            index: 0,
            buf: [0; 4],
            pos: 4,
        }
    }

    fn refill(&mut self) {
        self.buf = philox4x32_10(
            [
                self.prefix[0],
                self.prefix[1],
                self.index as u32,
                (self.index >> 32) as u32,
            ],
            self.key,
        );
        self.index += 1;
        self.pos = 0;
    }

    pub fn uniform(&mut self) -> f64 {
        open_unit(self.next_u64())
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        Float::sqrt(-2.0 * Float::ln(u1)) * Float::cos(core::f64::consts::TAU * u2)
    }

    /// Uniform index in `0..n` by rejection (no modulo bias).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }
}

impl RngCore for CounterStream {
    fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.refill();
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32();
        let lo = self.next_u32();
        join(hi, lo)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

impl SeedableRng for CounterStream {
    type Seed = [u8; 16];

    fn from_seed(seed: Self::Seed) -> Self {
        let w = |i: usize| u32::from_le_bytes([seed[i], seed[i + 1], seed[i + 2], seed[i + 3]]);
        Self::new([w(0), w(4)], [w(8), w(12)])
    }
}

/// First `k` entries of a uniformly random permutation of `0..n`
/// (partial Fisher–Yates).
pub fn sample_indices(stream: &mut CounterStream, n: usize, k: usize) -> alloc::vec::Vec<usize> {
    let k = k.min(n);
    let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + stream.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors distributed with the Random123 library.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn open_unit_never_hits_endpoints() {
        assert!(open_unit(0) > 0.0);
        assert!(open_unit(u64::MAX) < 1.0);
    }

    #[test]
    fn roles_give_disjoint_streams() {
        let a = NoiseKey::new(7, Role::Coupled, 0).block(3, 4, lane::DYNAMICS, 0);
        let b = NoiseKey::new(7, Role::Pilot, 0).block(3, 4, lane::DYNAMICS, 0);
        let c = NoiseKey::new(7, Role::Coupled, 1).block(3, 4, lane::DYNAMICS, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_moments() {
        let key = NoiseKey::new(11, Role::Validation, 0);
        let n = 200_000u32;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let (a, b) = key.gaussian_pair(i, 0, lane::AUX, 0);
            s1 += a + b;
            s2 += a * a + b * b;
        }
        let m = 2.0 * n as f64;
        assert!((s1 / m).abs() < 4.0 / m.sqrt());
        assert!((s2 / m - 1.0).abs() < 0.02);
    }

    #[test]
    fn sample_indices_are_distinct() {
        let mut s = NoiseKey::new(1, Role::Subsample, 0).stream(0, lane::AUX);
        let mut idx = sample_indices(&mut s, 100, 40);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 40);
        assert!(idx.iter().all(|&i| i < 100));
    }
}
