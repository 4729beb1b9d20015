//! Run configuration: one strict JSON document per invocation.

use std::path::{Path, PathBuf};

use chaoskit_core::dynamics::{InitialLaw, SimParams};
use chaoskit_core::experiments::{ChaosExperiment, ExperimentParams, SampleSpace};
use chaoskit_core::gronwall::SuperlinearForm;
use chaoskit_core::{Error, KernelSpec};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{message} (field `{field}`, line {line}, column {column})")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Constraint { field: String, reason: String },
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { field, reason } => ConfigError::Constraint {
                field: field.into(),
                reason,
            },
            other => ConfigError::Constraint {
                field: "config".into(),
                reason: other.to_string(),
            },
        }
    }
}

fn constraint(field: &str, reason: &str) -> ConfigError {
    ConfigError::Constraint {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub sim: SimParams,
    pub init: InitialLaw,
    /// Needed by `simulate`, `couple` and `chaos`.
    #[serde(default)]
    pub experiment: Option<ExperimentParams>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Worker count, `0` for automatic.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub chaos: ChaosOptions,
    #[serde(default)]
    pub validation: ValidationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    /// Also write little-endian binary snapshots.
    pub binary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            csv: true,
            json: true,
            binary: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosOptions {
    /// Repeat the run at `dt / 2` on the same Brownian path and report the
    /// change of the headline medians.
    pub dt_halving: bool,
    /// Largest tolerated relative change under halving.
    pub dt_halving_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    pub kernels: KernelsCheck,
    pub ot: OtCheck,
    pub fg: FgCheck,
    pub lln: LlnCheck,
    pub loglip: LoglipCheck,
    pub gronwall: GronwallCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct KernelsCheck {
    #[serde(rename = "bigN")]
    pub big_n: Vec<u64>,
    pub pairs: usize,
    /// Largest over smallest fitted envelope constant.
    pub spread_tolerance: f64,
    pub lipschitz_tolerance: f64,
}

impl Default for KernelsCheck {
    fn default() -> Self {
        Self {
            big_n: vec![16, 256, 4096],
            pairs: 100_000,
            spread_tolerance: 2.0,
            lipschitz_tolerance: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OtCheck {
    /// Random instances compared with permutation brute force.
    pub instances: usize,
    /// Largest instance size, at most 8.
    pub max_n: usize,
    /// Random triples for the metric axioms.
    pub triples: usize,
    pub tolerance: f64,
}

impl Default for OtCheck {
    fn default() -> Self {
        Self {
            instances: 200,
            max_n: 7,
            triples: 10_000,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct FgCheck {
    /// Defaults to the run's initial law.
    pub law: Option<InitialLaw>,
    /// Defaults to the kernel dimension.
    pub d: Option<usize>,
    pub space: SampleSpace,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub p: f64,
    pub replicas: u32,
    pub reference_size: usize,
    pub exact_cap: usize,
    /// Allowed distance between fitted and expected slope.
    pub slope_tolerance: f64,
}

impl Default for FgCheck {
    fn default() -> Self {
        Self {
            law: None,
            d: None,
            space: SampleSpace::Phase,
            n_grid: (6..=13).map(|k| 1 << k).collect(),
            p: 1.0,
            replicas: 50,
            reference_size: 100_000,
            exact_cap: 8192,
            slope_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct LlnCheck {
    pub kappa: f64,
    /// Defaults to the kernel's cut-off exponent.
    pub delta: Option<f64>,
    /// Defaults to the kernel dimension.
    pub d: Option<usize>,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub m_exponent: u32,
    pub replicas: u32,
    pub half_width: f64,
    /// The fitted slope may exceed `-gamma_m` by this much.
    pub slope_margin: f64,
}

impl Default for LlnCheck {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            delta: None,
            d: None,
            n_grid: (6..=12).map(|k| 1 << k).collect(),
            m_exponent: 2,
            replicas: 50,
            half_width: 1.0,
            slope_margin: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct LoglipCheck {
    /// Defaults to a standard Gaussian.
    pub law: Option<InitialLaw>,
    pub d: Option<usize>,
    pub p: f64,
    pub scales: Vec<f64>,
    pub samples: usize,
    #[serde(rename = "bigN")]
    pub big_n: Vec<u64>,
    /// Defaults to the kernel's cut-off exponent.
    pub delta: Option<f64>,
    pub spread_tolerance: f64,
}

impl Default for LoglipCheck {
    fn default() -> Self {
        Self {
            law: None,
            d: None,
            p: 1.0,
            scales: vec![1e-4, 1e-3, 1e-2, 1e-1],
            samples: 1_000_000,
            big_n: vec![256, 4096],
            delta: None,
            spread_tolerance: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GronwallCheck {
    pub trials: u32,
    pub form: SuperlinearForm,
}

impl Default for GronwallCheck {
    fn default() -> Self {
        Self {
            trials: 100,
            form: SuperlinearForm::Exact,
        }
    }
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                message: strip_position(&inner.to_string()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every constraint of the owning types, plus the rate hypotheses when an
    /// experiment is present.
    pub fn validate(&self) -> Result<(), ConfigError> {
        // The experiment gate orders its checks so the binding rule is named.
        if let Some(exp) = self.experiment() {
            exp.validated()?;
        }
        let kernel = self.kernel.validated()?;
        self.sim.validated()?;
        self.init.validate(kernel.d)?;
        if kernel.family.is_cutoff() && kernel.d > 1 {
            kernel.check_rate_hypotheses()?;
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(constraint("output.dir", "must not be empty"));
        }
        if let Some(tol) = self.chaos.dt_halving_tolerance {
            if !(tol > 0.0) {
                return Err(constraint("chaos.dt_halving_tolerance", "must be > 0"));
            }
        }
        let v = &self.validation;
        if v.ot.max_n == 0 || v.ot.max_n > 8 {
            return Err(constraint("validation.ot.max_n", "must lie in [1, 8]"));
        }
        if v.kernels.big_n.is_empty() {
            return Err(constraint("validation.kernels.bigN", "must not be empty"));
        }
        if v.gronwall.trials == 0 {
            return Err(constraint("validation.gronwall.trials", "must be >= 1"));
        }
        Ok(())
    }

    pub fn experiment(&self) -> Option<ChaosExperiment> {
        self.experiment.clone().map(|params| ChaosExperiment {
            params,
            kernel: self.kernel,
            sim: self.sim,
            init: self.init,
        })
    }

    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serializes")
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_json(&text)
}
