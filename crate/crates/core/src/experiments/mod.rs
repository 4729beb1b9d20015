//! Propagation-of-chaos harness, empirical validators for the probabilistic
//! estimates, and theoretical bound curves.
//!
//! Constants in the estimates are unknown, so nothing here asserts an
//! absolute probability. Reports carry full distance samples, exceedance
//! curves in the threshold coefficient and fitted log-log slopes.

mod bounds;
mod chaos;
mod stats;
mod validators;

pub use bounds::*;
pub use chaos::*;
pub use stats::*;
pub use validators::*;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::{InitialLaw, SimParams};
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};

/// Experiment-level parameters; the kernel, time stepping and initial law
/// live in their own sections of a run configuration.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub replicas: u32,
    /// Observation times in `[0, T]`.
    pub times: Vec<f64>,
    /// Wasserstein order.
    pub p: f64,
    /// Finite moment order of the initial law.
    pub q: f64,
    pub epsilon: f64,
    /// Rate exponent of the threshold `c N^(-γ)`. Required for the Newtonian
    /// family; for the power-law family it defaults to `δ`.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Integrability exponent of the spatial densities (power-law family);
    /// absent means `∞`.
    #[serde(default)]
    pub ell: Option<f64>,
    /// Pilot size as a multiple of the largest `N`.
    #[serde(default = "default_pilot_factor")]
    pub pilot_factor: usize,
    /// Also evolve a pilot with cut-off exponent `2δ` from the same data and
    /// noise, to measure the cut-off bias leg directly.
    #[serde(default)]
    pub fine_pilot: bool,
}

fn default_pilot_factor() -> usize {
    8
}

/// Everything a chaos run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosExperiment {
    pub params: ExperimentParams,
    pub kernel: KernelSpec,
    pub sim: SimParams,
    pub init: InitialLaw,
}

/// Hölder conjugate of `ell`.
pub fn conjugate(ell: f64) -> f64 {
    if ell.is_infinite() {
        1.0
    } else if ell == 1.0 {
        f64::INFINITY
    } else {
        ell / (ell - 1.0)
    }
}

fn reject(field: &'static str, reason: &str) -> Error {
    invalid(field, reason)
}

impl ChaosExperiment {
    /// Checks every parameter constraint and every hypothesis of the rate
    /// estimate for the chosen kernel family.
    pub fn validated(self) -> Result<Self> {
        // The integrability gate on alpha is tighter than the kernel's own
        // range, so it goes first to name the rule that actually binds.
        if self.kernel.family == KernelFamily::PowerCutoff {
            let ell = self.params.ell.unwrap_or(f64::INFINITY);
            if !(ell >= 1.0) {
                return Err(reject("experiment.ell", "must be >= 1"));
            }
            if !(self.kernel.alpha < self.kernel.d as f64 / conjugate(ell) - 1.0) {
                return Err(reject("kernel.alpha", "must be < d/ell' - 1"));
            }
        }
        let kernel = self.kernel.validated()?;
        let sim = self.sim.validated()?;
        let d = kernel.d;
        if d < 2 {
            return Err(reject("kernel.d", "must be > 1"));
        }
        if !kernel.family.is_cutoff() {
            return Err(reject("kernel.family", "must be a cut-off family"));
        }
        self.init.validate(d)?;
        let e = &self.params;
        if e.n_grid.is_empty() {
            return Err(reject("experiment.N_grid", "must not be empty"));
        }
        if e.n_grid[0] < 2 {
            return Err(reject("experiment.N_grid", "entries must be >= 2"));
        }
        if e.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(reject("experiment.N_grid", "must be strictly increasing"));
        }
        if u32::try_from(*e.n_grid.last().unwrap()).is_err() {
            return Err(reject("experiment.N_grid", "entries must fit in 32 bits"));
        }
        if e.replicas == 0 {
            return Err(reject("experiment.replicas", "must be >= 1"));
        }
        if e.times.is_empty() {
            return Err(reject("experiment.times", "must not be empty"));
        }
        if e.times.iter().any(|t| !(*t >= 0.0 && *t <= sim.horizon)) {
            return Err(reject("experiment.times", "must lie in [0, T]"));
        }
        if e.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(reject("experiment.times", "must be strictly increasing"));
        }
        if e.pilot_factor < 2 {
            return Err(reject("experiment.pilot_factor", "must be >= 2"));
        }
        // Moment and order constraints shared by both families.
        if !(e.q >= 2.0) {
            return Err(reject("experiment.q", "must be >= 2"));
        }
        if !(e.p >= 1.0) {
            return Err(reject("experiment.p", "must be >= 1"));
        }
        if !(e.p < 2.0 * e.q) {
            return Err(reject("experiment.p", "must be < 2q"));
        }
        if !(e.epsilon > 0.0) {
            return Err(reject("experiment.epsilon", "must be > 0"));
        }
        let df = d as f64;
        let delta = kernel.delta;
        match kernel.family {
            KernelFamily::NewtonianCutoff => {
                if e.ell.is_some() {
                    return Err(reject("experiment.ell", "applies only to the power-law family"));
                }
                if !(delta < 1.0 / df) {
                    return Err(reject("kernel.delta", "must be < 1/d"));
                }
                let gamma = e
                    .gamma
                    .ok_or_else(|| reject("experiment.gamma", "is required for the Newtonian family"))?;
                if !(gamma >= 0.0) {
                    return Err(reject("experiment.gamma", "must be >= 0"));
                }
                if !(gamma < 1.0 / (2.0 * df.max(e.p))) {
                    return Err(reject("experiment.gamma", "must be < 1/(2 max(d, p))"));
                }
                if !(gamma < delta) {
                    return Err(reject("experiment.gamma", "must be < delta"));
                }
                if !(e.epsilon < e.q - e.p / (1.0 - e.p * gamma)) {
                    return Err(reject("experiment.epsilon", "must be < q - p/(1 - p gamma)"));
                }
            }
            KernelFamily::PowerCutoff => {
                let alpha = kernel.alpha;
                let ellp = conjugate(e.ell.unwrap_or(f64::INFINITY));
                let upper_branch = ellp / df <= delta && delta < 1.0 / (1.0 + alpha);
                let lower_branch = ellp > df / (2.0 * (1.0 + alpha)) && delta < ellp / df;
                if !(upper_branch || lower_branch) {
                    return Err(reject(
                        "kernel.delta",
                        "must satisfy ell'/d <= delta < 1/(1+alpha), or delta < ell'/d with ell' > d/(2(1+alpha))",
                    ));
                }
                if !(e.p * delta < 1.0) {
                    return Err(reject("experiment.p", "p delta must be < 1"));
                }
                if !(e.epsilon < e.q - e.p / (1.0 - e.p * delta)) {
                    return Err(reject("experiment.epsilon", "must be < q - p/(1 - p delta)"));
                }
                if let Some(g) = e.gamma {
                    if !(g >= 0.0 && g <= delta) {
                        return Err(reject("experiment.gamma", "must lie in [0, delta] for the power-law family"));
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(Self { kernel, sim, ..self })
    }

    /// Exponent of the threshold `c N^(-γ)`.
    pub fn threshold_exponent(&self) -> f64 {
        match self.params.gamma {
            Some(g) => g,
            None => self.kernel.delta,
        }
    }

    pub fn pilot_size(&self) -> usize {
        self.params.pilot_factor * self.params.n_grid.last().copied().unwrap_or(0)
    }
}

/// Names of the measured quantities.
pub mod leg {
    /// Weighted sup distance of the synchronous coupling.
    pub const COUPLED_SUP: &str = "coupled_sup";
    /// Clamped rescaled deviation at the observation time.
    pub const J: &str = "j_functional";
    /// Its maximum over every time step up to the horizon.
    pub const J_MAX: &str = "j_max";
    /// Reference copies against a fresh pilot subsample.
    pub const NU_FN: &str = "nu_fN";
    /// Interacting cloud against a pilot subsample (headline).
    pub const MU_F: &str = "mu_f";
    /// Pilot against the finer-cut-off pilot.
    pub const FN_F: &str = "fN_f";
    pub const FG: &str = "fg";
    pub const LLN: &str = "lln";
}

/// Values of one quantity over replicas at one `(N, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegSample {
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub leg: String,
    pub replicas: Vec<u32>,
    pub values: Vec<f64>,
    pub exceedance: Exceedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegFit {
    pub leg: String,
    pub t: f64,
    pub center: Center,
    #[serde(flatten)]
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    #[serde(rename = "N")]
    pub n: usize,
    pub replica: u32,
    pub step: u64,
}

/// Distance samples, exceedance curves and fitted slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    #[serde(rename = "per_N")]
    pub per_n: Vec<LegSample>,
    /// Fit of the headline quantity.
    pub fit: RateFit,
    pub fits: Vec<LegFit>,
    pub failures: Vec<ReplicaFailure>,
    pub warnings: Vec<String>,
    pub metadata: BTreeMap<String, String>,
}

impl RateReport {
    pub fn sample(&self, leg: &str, n: usize, t: f64) -> Option<&LegSample> {
        self.per_n.iter().find(|s| s.leg == leg && s.n == n && s.t == t)
    }

    pub fn leg_fit(&self, leg: &str, t: f64) -> Option<&LegFit> {
        self.fits.iter().find(|f| f.leg == leg && f.t == t)
    }

    /// `(N, values)` of one leg at one time, in grid order.
    pub fn series(&self, leg: &str, t: f64) -> Vec<(usize, Vec<f64>)> {
        self.per_n
            .iter()
            .filter(|s| s.leg == leg && s.t == t)
            .map(|s| (s.n, s.values.clone()))
            .collect()
    }

    /// Whether any `(N, t)` lost more than a tenth of its replicas.
    pub fn too_many_failures(&self) -> bool {
        self.warnings.iter().any(|w| w.starts_with(FAILURE_WARNING))
    }
}

pub(crate) const FAILURE_WARNING: &str = "more than 10% of replicas failed";
