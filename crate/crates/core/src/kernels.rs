//! Interaction forces: the Newtonian force `ξ x/|x|^d`, the power-law
//! representative `ξ x/|x|^(α+1)`, and their versions flattened inside the
//! cut-off radius `r_N = N^(-δ)`.
//!
//! All four families share one radial form `ξ x · max(|x|², r²)^(-(α+1)/2)`
//! with `r = 0` for the exact families and `α = d - 1` for the Newtonian
//! ones. The pairwise loops in [`crate::field`] evaluate the same
//! [`PairKernel`], so a single [`KernelSpec::force`] call and an `N`-body
//! sum agree bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KernelFamily {
    NewtonianExact,
    NewtonianCutoff,
    PowerExact,
    PowerCutoff,
}

impl KernelFamily {
    pub fn is_cutoff(self) -> bool {
        matches!(self, KernelFamily::NewtonianCutoff | KernelFamily::PowerCutoff)
    }

    pub fn is_newtonian(self) -> bool {
        matches!(self, KernelFamily::NewtonianExact | KernelFamily::NewtonianCutoff)
    }
}

/// Which interaction force to use, with its parameters.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub d: usize,
    /// Cut-off exponent; ignored by the exact families.
    #[serde(default)]
    pub delta: f64,
    /// Singularity exponent; ignored by the Newtonian families.
    #[serde(default)]
    pub alpha: f64,
    /// Sign of the interaction, `+1` (repulsive) or `-1` (attractive).
    #[serde(default = "unit")]
    pub xi: f64,
    /// Particle count entering only through `N^(-δ)`. Experiments set it
    /// from their grid.
    #[serde(default = "one", rename = "bigN")]
    pub big_n: u64,
    /// Amplitude multiplier; `0` switches the interaction off.
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

fn one() -> u64 {
    1
}

impl KernelSpec {
    pub fn newtonian_cutoff(d: usize, delta: f64, big_n: u64) -> Result<Self> {
        Self {
            family: KernelFamily::NewtonianCutoff,
            d,
            delta,
            alpha: 0.0,
            xi: 1.0,
            big_n,
            scale: 1.0,
        }
        .validated()
    }

    pub fn newtonian_exact(d: usize) -> Result<Self> {
        Self {
            family: KernelFamily::NewtonianExact,
            d,
            delta: 0.0,
            alpha: 0.0,
            xi: 1.0,
            big_n: 1,
            scale: 1.0,
        }
        .validated()
    }

    pub fn power_cutoff(d: usize, alpha: f64, delta: f64, big_n: u64) -> Result<Self> {
        Self {
            family: KernelFamily::PowerCutoff,
            d,
            delta,
            alpha,
            xi: 1.0,
            big_n,
            scale: 1.0,
        }
        .validated()
    }

    pub fn power_exact(d: usize, alpha: f64) -> Result<Self> {
        Self {
            family: KernelFamily::PowerExact,
            d,
            delta: 0.0,
            alpha,
            xi: 1.0,
            big_n: 1,
            scale: 1.0,
        }
        .validated()
    }

    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        self.xi = xi;
        self.validated()
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_big_n(mut self, big_n: u64) -> Result<Self> {
        self.big_n = big_n;
        self.validated()
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validated()
    }

    /// Checks that the force is well defined and returns the spec unchanged.
    ///
    /// The upper bounds on `delta` that the convergence results need
    /// (`δ < 1/d`, `δ < 1/(1+α)`) are experiment hypotheses and are checked
    /// by [`KernelSpec::check_rate_hypotheses`], not here.
    pub fn validated(self) -> Result<Self> {
        if self.d == 0 {
            return Err(invalid("kernel.d", "spatial dimension must be >= 1"));
        }
        if self.xi != 1.0 && self.xi != -1.0 {
            return Err(invalid("kernel.xi", "must be +1 or -1"));
        }
        if !self.scale.is_finite() {
            return Err(invalid("kernel.scale", "must be finite"));
        }
        let d = self.d as f64;
        if !self.family.is_newtonian() {
            if !(self.alpha >= 0.0 && self.alpha < d - 1.0) {
                return Err(invalid("kernel.alpha", "must lie in [0, d-1)"));
            }
        }
        if self.family.is_cutoff() {
            if self.big_n == 0 {
                return Err(invalid("kernel.big_n", "must be >= 1"));
            }
            if !(self.delta > 0.0 && self.delta.is_finite()) {
                return Err(invalid("kernel.delta", "must be positive and finite"));
            }
        }
        Ok(self)
    }

    /// `δ < 1/(1+α)` (which is `δ < 1/d` for Newtonian kernels).
    pub fn check_rate_hypotheses(&self) -> Result<()> {
        if self.family.is_cutoff() {
            let upper = 1.0 / (1.0 + self.exponent_alpha());
            if !(self.delta < upper) {
                let reason = if self.family.is_newtonian() {
                    "must be < 1/d"
                } else {
                    "must be < 1/(1+alpha)"
                };
                return Err(invalid("kernel.delta", reason));
            }
        }
        Ok(())
    }

    /// The exponent `α` actually used by the radial form (`d - 1` for the
    /// Newtonian families).
    pub fn exponent_alpha(&self) -> f64 {
        if self.family.is_newtonian() {
            self.d as f64 - 1.0
        } else {
            self.alpha
        }
    }

    /// Cut-off radius `N^(-δ)`, or `0` for the exact families.
    pub fn cutoff_radius(&self) -> f64 {
        if self.family.is_cutoff() {
            Float::powf(self.big_n as f64, -self.delta)
        } else {
            0.0
        }
    }

    /// Bound on `|force|` for the cut-off families: `N^(αδ)`.
    pub fn magnitude_cap(&self) -> f64 {
        Float::powf(self.big_n as f64, self.exponent_alpha() * self.delta)
    }

    pub fn pair_kernel(&self) -> PairKernel {
        let rc = self.cutoff_radius();
        PairKernel {
            amplitude: self.xi * self.scale,
            floor2: rc * rc,
            power: InversePower::from_exponent(0.5 * (self.exponent_alpha() + 1.0)),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint);
        }
        Ok(())
    }

    /// Writes the force at `x` into `out`.
    pub fn force_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(x)?;
        let k = self.pair_kernel();
        let s = k.radial(norm2(x));
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi * s;
        }
        Ok(())
    }

    pub fn force(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.force_into(x, &mut out)?;
        Ok(out)
    }

    /// The envelope `l^N(x)`: `1/|x|^(α+1)` when `|x| >= (α+1) N^(-δ)`,
    /// `N^((α+1)δ)` otherwise.
    pub fn envelope(&self, x: &[f64]) -> Result<f64> {
        if !self.family.is_cutoff() {
            return Err(Error::EnvelopeWithoutCutoff);
        }
        self.check_point(x)?;
        Ok(self.envelope_at_radius(Float::sqrt(norm2(x))))
    }

    pub(crate) fn envelope_at_radius(&self, r: f64) -> f64 {
        let a1 = self.exponent_alpha() + 1.0;
        let rc = self.cutoff_radius();
        if r >= a1 * rc {
            Float::powf(r, -a1)
        } else {
            Float::powf(self.big_n as f64, a1 * self.delta)
        }
    }

    /// Right-hand side of the cut-off Lipschitz estimate with unit constant:
    /// `|x-y| (1/max(|x|,r)^d + 1/max(|y|,r)^d)`.
    pub fn lipschitz_bound(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if self.family != KernelFamily::NewtonianCutoff {
            return Err(invalid(
                "kernel.family",
                "lipschitz bound requires NEWTONIAN_CUTOFF",
            ));
        }
        self.check_point(x)?;
        self.check_point(y)?;
        let rc = self.cutoff_radius();
        let d = self.d as i32;
        let dist = Float::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        let wx = Float::powi(Float::max(Float::sqrt(norm2(x)), rc), d);
        let wy = Float::powi(Float::max(Float::sqrt(norm2(y)), rc), d);
        Ok(dist * (1.0 / wx + 1.0 / wy))
    }
}

#[inline(always)]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in x {
        s += v * v;
    }
    s
}

/// `m ↦ m^e`, the denominator of the radial factor, with cheap special cases for the exponents that show up in
/// practice (`d/2` for Newtonian kernels, quarter powers for power laws).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InversePower {
    Half,
    One,
    ThreeHalves,
    ThreeQuarters,
    Quarters(i32),
    General(f64),
}

impl InversePower {
    pub fn from_exponent(e: f64) -> Self {
        if e == 0.5 {
            InversePower::Half
        } else if e == 1.0 {
            InversePower::One
        } else if e == 1.5 {
            InversePower::ThreeHalves
        } else if e == 0.75 {
            InversePower::ThreeQuarters
        } else if (4.0 * e).fract() == 0.0 && 4.0 * e <= 64.0 {
            InversePower::Quarters((4.0 * e) as i32)
        } else {
            InversePower::General(e)
        }
    }

    #[inline(always)]
    pub fn denominator(self, m: f64) -> f64 {
        match self {
            InversePower::Half => Float::sqrt(m),
            InversePower::One => m,
            InversePower::ThreeHalves => m * Float::sqrt(m),
            InversePower::ThreeQuarters => {
                let s = Float::sqrt(m);
                s * Float::sqrt(s)
            }
            InversePower::Quarters(q) => Float::powi(Float::sqrt(Float::sqrt(m)), q),
            InversePower::General(e) => Float::powf(m, e),
        }
    }

    #[inline(always)]
    pub fn apply(self, m: f64) -> f64 {
        1.0 / self.denominator(m)
    }
}

/// Radial factor of a force, `amplitude · max(r², floor²)^(-e)` with the
/// convention that the factor is zero at the origin of an exact kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairKernel {
    pub amplitude: f64,
    pub floor2: f64,
    pub power: InversePower,
}

impl PairKernel {
    // Selects on the inputs rather than the result so that loops over this
    // function vectorize.
    #[inline(always)]
    pub fn radial(&self, r2: f64) -> f64 {
        let m = if r2 > self.floor2 { r2 } else { self.floor2 };
        let pos = m > 0.0;
        let m = if pos { m } else { 1.0 };
        let amp = if pos { self.amplitude } else { 0.0 };
        amp / self.power.denominator(m)
    }
}
