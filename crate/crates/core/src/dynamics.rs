//! Euler–Maruyama integration of the cut-off particle system, of its
//! mean-field reference copies, and of synchronous couplings between them.
//!
//! Positions advance with the pre-step velocity:
//!
//! ```text
//! X <- X + V h
//! V <- V + b(X) h + sqrt(2 σ h) G
//! ```
//!
//! where `b` is the empirical convolution of the force with either the
//! system itself (interacting particles) or a pilot cloud (reference
//! copies). `G` comes from the counter-based generator, so two systems with
//! the same [`NoiseKey`] see the same increments particle by particle.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{accumulate, SourceCloud};
use crate::kernels::KernelSpec;
use crate::par;
use crate::rng::{lane, NoiseKey};

/// `N` particles in phase space at time `t`; coordinates are stored
/// row-major, `N × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub d: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub t: f64,
}

impl Ensemble {
    pub fn new(d: usize, positions: Vec<f64>, velocities: Vec<f64>, t: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be >= 1"));
        }
        if positions.len() != velocities.len() {
            return Err(Error::SizeMismatch(positions.len(), velocities.len()));
        }
        if positions.is_empty() || positions.len() % d != 0 {
            return Err(invalid("ensemble", "needs N >= 1 particles of dimension d"));
        }
        Ok(Self {
            d,
            positions,
            velocities,
            t,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.d..(i + 1) * self.d]
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.velocities).all(|v| v.is_finite())
    }

    /// Rows `(x_i, v_i)` of length `2d`.
    pub fn phase_rows(&self) -> Vec<f64> {
        let d = self.d;
        let mut out = Vec::with_capacity(2 * self.positions.len());
        for i in 0..self.len() {
            out.extend_from_slice(&self.positions[i * d..(i + 1) * d]);
            out.extend_from_slice(&self.velocities[i * d..(i + 1) * d]);
        }
        out
    }

    /// The particles at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Ensemble {
        let d = self.d;
        let mut x = Vec::with_capacity(indices.len() * d);
        let mut v = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            x.extend_from_slice(self.position(i));
            v.extend_from_slice(self.velocity(i));
        }
        Ensemble {
            d,
            positions: x,
            velocities: v,
            t: self.t,
        }
    }

    /// First `n` particles.
    pub fn truncated(&self, n: usize) -> Ensemble {
        let k = n.min(self.len()) * self.d;
        Ensemble {
            d: self.d,
            positions: self.positions[..k].to_vec(),
            velocities: self.velocities[..k].to_vec(),
            t: self.t,
        }
    }

    /// `(1/N) Σ |v_i|²`.
    pub fn mean_square_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

/// Time-stepping parameters.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub sigma: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Each step's Gaussian is the normalized sum of this many finer
    /// increments, so a run at `dt` and one at `dt / s` see the same
    /// Brownian path.
    #[serde(default = "one")]
    pub noise_substeps: u32,
}

fn one() -> u32 {
    1
}

impl SimParams {
    pub fn new(sigma: f64, dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        Self {
            sigma,
            dt,
            horizon,
            seed,
            scheme: Scheme::EulerMaruyama,
            noise_substeps: 1,
        }
        .validated()
    }

    pub fn with_noise_substeps(mut self, s: u32) -> Result<Self> {
        self.noise_substeps = s;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sim.sigma", "must be >= 0 and finite"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("sim.T", "must be > 0 and finite"));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(invalid("sim.dt", "must satisfy 0 < dt <= T"));
        }
        if self.noise_substeps == 0 {
            return Err(invalid("sim.noise_substeps", "must be >= 1"));
        }
        Ok(self)
    }

    /// `ceil(T/dt)`, ignoring round-off in the ratio.
    pub fn n_steps(&self) -> u64 {
        let r = self.horizon / self.dt;
        let k = Float::ceil(r - 1e-9);
        (k as u64).max(1)
    }

    /// Time after `k` steps; the last step is shortened to land on `T`.
    pub fn time_at(&self, k: u64) -> f64 {
        if k >= self.n_steps() {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// Length of step `k` (0-based).
    pub fn step_len(&self, k: u64) -> f64 {
        self.time_at(k + 1) - self.time_at(k)
    }

    /// Index of the first step boundary at or after `t`.
    pub fn step_for_time(&self, t: f64) -> u64 {
        let n = self.n_steps();
        (0..=n)
            .find(|&k| self.time_at(k) >= t - 1e-12)
            .unwrap_or(n)
    }
}

/// Time step that lets a particle of speed `v_ref` cross the cut-off
/// radius in at least four steps, capped at `1e-3`.
pub fn default_dt(spec: &KernelSpec, v_ref: f64) -> f64 {
    let rc = spec.cutoff_radius();
    if v_ref > 0.0 && rc.is_finite() && rc > 0.0 {
        (rc / (4.0 * v_ref)).min(1e-3)
    } else {
        1e-3
    }
}

/// Law of the i.i.d. initial data.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum InitialLaw {
    /// Centered Gaussians with independent coordinates.
    Gaussian {
        position_scale: f64,
        velocity_scale: f64,
    },
    /// Uniform on `[-a, a]^d` for both positions and velocities.
    UniformBox { half_width: f64 },
    /// Positions uniform on `[-b, b]^d`, velocity density proportional to
    /// `<v>^(-gamma_v)` with `<v> = sqrt(1 + |v|²)`.
    PolyDecay { gamma_v: f64, box_half_width: f64 },
}

impl InitialLaw {
    pub fn standard_gaussian() -> Self {
        InitialLaw::Gaussian {
            position_scale: 1.0,
            velocity_scale: 1.0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            InitialLaw::Gaussian {
                position_scale,
                velocity_scale,
            } => {
                if !pos(position_scale) || !pos(velocity_scale) {
                    return Err(invalid("init", "Gaussian scales must be > 0"));
                }
            }
            InitialLaw::UniformBox { half_width } => {
                if !pos(half_width) {
                    return Err(invalid("init.half_width", "must be > 0"));
                }
            }
            InitialLaw::PolyDecay {
                gamma_v,
                box_half_width,
            } => {
                if !(gamma_v > d as f64) {
                    return Err(Error::NonIntegrableVelocityLaw);
                }
                if !pos(box_half_width) {
                    return Err(invalid("init.box_half_width", "must be > 0"));
                }
            }
        }
        Ok(())
    }

    /// Root-mean-square speed `sqrt(E|v|²)`, if finite.
    pub fn rms_speed(&self, d: usize) -> Option<f64> {
        let d = d as f64;
        match *self {
            InitialLaw::Gaussian { velocity_scale, .. } => Some(velocity_scale * Float::sqrt(d)),
            InitialLaw::UniformBox { half_width } => Some(half_width * Float::sqrt(d / 3.0)),
            InitialLaw::PolyDecay { gamma_v, .. } => {
                // v = Z / sqrt(χ²_ν), ν = γ - d, and E[1/χ²_ν] = 1/(ν - 2).
                let nu = gamma_v - d;
                (nu > 2.0).then(|| Float::sqrt(d / (nu - 2.0)))
            }
        }
    }

    /// Per-coordinate variance of the velocity marginal, if finite.
    pub fn velocity_variance(&self, d: usize) -> Option<f64> {
        self.rms_speed(d).map(|s| s * s / d as f64)
    }
}

/// `n` i.i.d. draws from `law`. Particle `i` depends only on `(key, i)`, so
/// a larger sample extends a smaller one.
pub fn sample_initial(law: &InitialLaw, n: usize, d: usize, key: &NoiseKey) -> Result<Ensemble> {
    if n == 0 {
        return Err(invalid("N", "must be >= 1"));
    }
    law.validate(d)?;
    let mut x = vec![0.0; n * d];
    let mut v = vec![0.0; n * d];
    let law = *law;
    par::for_each_chunk(&mut x, d, |i, row| {
        let i = i as u32;
        match law {
            InitialLaw::Gaussian { position_scale, .. } => {
                key.fill_gaussians(i, 0, lane::INIT_POSITION, row);
                row.iter_mut().for_each(|c| *c *= position_scale);
            }
            InitialLaw::UniformBox { half_width: a }
            | InitialLaw::PolyDecay {
                box_half_width: a, ..
            } => fill_uniform(key, i, lane::INIT_POSITION, a, row),
        }
    });
    par::for_each_chunk(&mut v, d, |i, row| {
        let i = i as u32;
        match law {
            InitialLaw::Gaussian { velocity_scale, .. } => {
                key.fill_gaussians(i, 0, lane::INIT_VELOCITY, row);
                row.iter_mut().for_each(|c| *c *= velocity_scale);
            }
            InitialLaw::UniformBox { half_width } => {
                fill_uniform(key, i, lane::INIT_VELOCITY, half_width, row)
            }
            InitialLaw::PolyDecay { gamma_v, .. } => {
                // Multivariate t with ν = γ - d degrees of freedom, rescaled by
                // 1/sqrt(ν): density ∝ (1 + |v|²)^(-(ν+d)/2).
                key.fill_gaussians(i, 0, lane::INIT_VELOCITY, row);
                let chi = ChiSquared::new(gamma_v - d as f64).expect("validated");
                let mut s = key.stream(i, lane::INIT_RADIUS);
                let w = 1.0 / Float::sqrt(chi.sample(&mut s));
                row.iter_mut().for_each(|c| *c *= w);
            }
        }
    });
    Ensemble::new(d, x, v, 0.0)
}

fn fill_uniform(key: &NoiseKey, particle: u32, lane: u32, a: f64, row: &mut [f64]) {
    for (pair, chunk) in row.chunks_mut(2).enumerate() {
        let (u1, u2) = key.uniform_pair(particle, 0, lane, pair as u32);
        chunk[0] = a * (2.0 * u1 - 1.0);
        if let Some(c) = chunk.get_mut(1) {
            *c = a * (2.0 * u2 - 1.0);
        }
    }
}

/// One Euler–Maruyama step for step index `k` with drift already evaluated
/// at the pre-step positions.
fn advance(ens: &mut Ensemble, drift: &[f64], params: &SimParams, key: &NoiseKey, k: u64) -> Result<()> {
    let d = ens.d;
    let h = params.step_len(k);
    let s = params.noise_substeps;
    let amp = Float::sqrt(2.0 * params.sigma * h / s as f64);
    let with_noise = params.sigma > 0.0;
    let fine0 = k * s as u64;
    if fine0 + s as u64 > u32::MAX as u64 {
        return Err(invalid("sim.dt", "too many steps for the noise counter"));
    }
    let (x, v) = (&mut ens.positions, &mut ens.velocities);
    for (xi, vi) in x.iter_mut().zip(v.iter()) {
        *xi += vi * h;
    }
    par::for_each_chunk(v, d, |i, vrow| {
        let mut g = [0.0f64; 8];
        let mut gsum = [0.0f64; 8];
        let mut gv;
        let (g, gsum) = if d <= 8 {
            (&mut g[..d], &mut gsum[..d])
        } else {
            gv = vec![0.0; 2 * d];
            let (a, b) = gv.split_at_mut(d);
            (a, b)
        };
        if with_noise {
            for u in 0..s {
                key.fill_gaussians(i as u32, (fine0 + u as u64) as u32, lane::DYNAMICS, g);
                for c in 0..d {
                    gsum[c] += g[c];
                }
            }
        }
        for c in 0..d {
            vrow[c] += drift[i * d + c] * h + amp * gsum[c];
        }
    });
    ens.t = params.time_at(k + 1);
    if !ens.is_finite() {
        return Err(Error::NumericalBlowUp { step: k + 1 });
    }
    Ok(())
}

fn require_cutoff(spec: &KernelSpec) -> Result<()> {
    if spec.family.is_cutoff() {
        Ok(())
    } else {
        Err(invalid("kernel.family", "N-body runs need a cut-off kernel"))
    }
}

/// Mean-field drift `(1/N) Σ_j F(X_i - X_j)` of the interacting system.
pub fn interacting_drift(ens: &Ensemble, spec: &KernelSpec) -> Vec<f64> {
    let src = SourceCloud::from_rows(&ens.positions, ens.d);
    let mut out = vec![0.0; ens.positions.len()];
    accumulate(&ens.positions, &src, &spec.pair_kernel(), ens.len() as f64, &mut out);
    out
}

/// Drift `(1/M) Σ_j F(Y_i - P_j)` of reference copies against a pilot.
pub fn reference_drift(ens: &Ensemble, pilot: &SourceCloud, spec: &KernelSpec) -> Vec<f64> {
    let mut out = vec![0.0; ens.positions.len()];
    accumulate(&ens.positions, pilot, &spec.pair_kernel(), pilot.len() as f64, &mut out);
    out
}

/// Advances the interacting system by step `k`.
pub fn step_interacting(
    ens: &Ensemble,
    spec: &KernelSpec,
    params: &SimParams,
    key: &NoiseKey,
    k: u64,
) -> Result<Ensemble> {
    require_cutoff(spec)?;
    let drift = interacting_drift(ens, spec);
    let mut next = ens.clone();
    advance(&mut next, &drift, params, key, k)?;
    Ok(next)
}

/// Advances reference copies by step `k`, driven by `pilot` at the same time.
pub fn step_reference(
    ens: &Ensemble,
    pilot: &Ensemble,
    spec: &KernelSpec,
    params: &SimParams,
    key: &NoiseKey,
    k: u64,
) -> Result<Ensemble> {
    require_cutoff(spec)?;
    if Float::abs(pilot.t - ens.t) > 1e-12 {
        return Err(invalid("pilot", "must be at the same time as the copies"));
    }
    if pilot.d != ens.d {
        return Err(Error::DimensionMismatch {
            expected: ens.d,
            found: pilot.d,
        });
    }
    let src = SourceCloud::from_rows(&pilot.positions, pilot.d);
    let drift = reference_drift(ens, &src, spec);
    let mut next = ens.clone();
    advance(&mut next, &drift, params, key, k)?;
    Ok(next)
}

/// Runs the interacting system alone and returns the states at `times`.
pub fn simulate(
    init: Ensemble,
    spec: &KernelSpec,
    params: &SimParams,
    key: &NoiseKey,
    times: &[f64],
) -> Result<Vec<Ensemble>> {
    require_cutoff(spec)?;
    let obs = observation_steps(params, times);
    let mut out = Vec::with_capacity(obs.len());
    let mut ens = init;
    let n = params.n_steps();
    let mut next_obs = 0;
    for k in 0..=n {
        while next_obs < obs.len() && obs[next_obs] == k {
            out.push(ens.clone());
            next_obs += 1;
        }
        if k == n {
            break;
        }
        let drift = interacting_drift(&ens, spec);
        advance(&mut ens, &drift, params, key, k)?;
    }
    Ok(out)
}

/// Step indices for the requested observation times, sorted, one entry per
/// requested time.
pub fn observation_steps(params: &SimParams, times: &[f64]) -> Vec<u64> {
    let mut v: Vec<u64> = times.iter().map(|&t| params.step_for_time(t)).collect();
    v.sort_unstable();
    v
}

/// One replica of a synchronous coupling: the interacting system and the
/// reference copies, started from the same data and sharing noise.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub replica: u32,
    pub interacting: Ensemble,
    pub reference: Ensemble,
    pub failure: Option<Error>,
}

/// Everything the lockstep runner needs for one particle count.
#[derive(Debug, Clone)]
pub struct CouplingSetup {
    pub spec: KernelSpec,
    pub params: SimParams,
    pub law: InitialLaw,
    pub n: usize,
    pub pilot_size: usize,
    /// Keys of the pilot (initial data and noise).
    pub pilot_key: NoiseKey,
    /// One key per replica, shared by both systems of that replica.
    pub replica_keys: Vec<NoiseKey>,
    /// Optional second pilot with a different kernel that starts from the
    /// pilot's data and uses the pilot's noise.
    pub fine_spec: Option<KernelSpec>,
    pub times: Vec<f64>,
}

/// What a snapshot callback sees.
pub struct Snapshot<'a> {
    pub step: u64,
    pub t: f64,
    pub pilot: &'a Ensemble,
    pub fine_pilot: Option<&'a Ensemble>,
    pub replicas: &'a [CoupledState],
}

/// Evolves the pilot, its optional fine twin and every replica in lockstep,
/// calling `observe` at each observation time.
///
/// A replica that blows up is frozen with its error recorded in
/// [`CoupledState::failure`]; a pilot blow-up aborts the run.
pub fn run_lockstep<F>(setup: &CouplingSetup, mut observe: F) -> Result<Vec<CoupledState>>
where
    F: FnMut(&Snapshot<'_>) -> Result<()>,
{
    require_cutoff(&setup.spec)?;
    if setup.pilot_size < setup.n {
        return Err(invalid("experiment.pilot_factor", "pilot size must be >= N"));
    }
    let d = setup.spec.d;
    let params = &setup.params;
    let mut pilot = sample_initial(&setup.law, setup.pilot_size, d, &setup.pilot_key)?;
    let mut fine = match setup.fine_spec {
        Some(fs) => {
            require_cutoff(&fs)?;
            Some((pilot.clone(), fs))
        }
        None => None,
    };
    let mut replicas = setup
        .replica_keys
        .iter()
        .map(|key| {
            let init = sample_initial(&setup.law, setup.n, d, key)?;
            Ok(CoupledState {
                replica: key.replica,
                interacting: init.clone(),
                reference: init,
                failure: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let obs = observation_steps(params, &setup.times);
    let n_steps = params.n_steps();
    let mut next_obs = 0;
    for k in 0..=n_steps {
        while next_obs < obs.len() && obs[next_obs] == k {
            observe(&Snapshot {
                step: k,
                t: params.time_at(k),
                pilot: &pilot,
                fine_pilot: fine.as_ref().map(|f| &f.0),
                replicas: &replicas,
            })?;
            next_obs += 1;
        }
        if k == n_steps {
            break;
        }
        let pilot_src = SourceCloud::from_rows(&pilot.positions, d);
        for (r, key) in replicas.iter_mut().zip(&setup.replica_keys) {
            if r.failure.is_some() {
                continue;
            }
            let res = interacting_drift(&r.interacting, &setup.spec);
            let step = advance(&mut r.interacting, &res, params, key, k).and_then(|_| {
                let drift = reference_drift(&r.reference, &pilot_src, &setup.spec);
                advance(&mut r.reference, &drift, params, key, k)
            });
            if let Err(Error::NumericalBlowUp { step }) = step {
                r.failure = Some(Error::ReplicaBlowUp {
                    replica: r.replica,
                    step,
                });
            } else {
                step?;
            }
        }
        let drift = interacting_drift(&pilot, &setup.spec);
        advance(&mut pilot, &drift, params, &setup.pilot_key, k)?;
        if let Some((fp, fs)) = fine.as_mut() {
            let drift = interacting_drift(fp, fs);
            advance(fp, &drift, params, &setup.pilot_key, k)?;
        }
    }
    Ok(replicas)
}

/// A single coupled trajectory.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub interacting: Ensemble,
    pub reference: Ensemble,
    pub pilot: Ensemble,
    pub key: NoiseKey,
}

/// Runs one replica of the coupling and returns its state at each
/// observation time.
pub fn run_coupled(setup: &CouplingSetup) -> Result<Vec<CoupledRun>> {
    if setup.replica_keys.len() != 1 {
        return Err(invalid("replica_keys", "run_coupled takes exactly one replica"));
    }
    let key = setup.replica_keys[0];
    let mut out = Vec::new();
    let states = run_lockstep(setup, |snap| {
        let r = &snap.replicas[0];
        if let Some(e) = &r.failure {
            return Err(e.clone());
        }
        out.push(CoupledRun {
            interacting: r.interacting.clone(),
            reference: r.reference.clone(),
            pilot: snap.pilot.clone(),
            key,
        });
        Ok(())
    })?;
    if let Some(e) = &states[0].failure {
        return Err(e.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Role;

    fn params(sigma: f64, dt: f64, t: f64) -> SimParams {
        SimParams::new(sigma, dt, t, 1).unwrap()
    }

    #[test]
    fn step_count_and_partial_last_step() {
        let p = params(0.1, 0.3, 1.0);
        assert_eq!(p.n_steps(), 4);
        assert_eq!(p.time_at(4), 1.0);
        assert!((p.step_len(3) - 0.1).abs() < 1e-15);
        let p = params(0.1, 0.1, 1.0);
        assert_eq!(p.n_steps(), 10);
        assert_eq!(p.step_for_time(0.5), 5);
        assert_eq!(p.step_for_time(0.0), 0);
        assert_eq!(p.step_for_time(0.55), 6);
    }

    #[test]
    fn sim_params_reject_bad_values() {
        assert!(SimParams::new(0.1, 2.0, 1.0, 0).is_err());
        assert!(SimParams::new(-0.1, 0.1, 1.0, 0).is_err());
        assert!(SimParams::new(0.1, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn free_flight_single_particle() {
        let spec = KernelSpec::newtonian_cutoff(2, 0.3, 1).unwrap();
        let p = params(0.0, 0.125, 1.0);
        let e0 = Ensemble::new(2, vec![0.5, -1.0], vec![0.25, 2.0], 0.0).unwrap();
        let key = NoiseKey::new(3, Role::Coupled, 0);
        let out = simulate(e0.clone(), &spec, &p, &key, &[1.0]).unwrap();
        assert_eq!(out[0].positions, vec![0.5 + 0.25, -1.0 + 2.0]);
        assert_eq!(out[0].velocities, e0.velocities);
        assert_eq!(out[0].t, 1.0);
    }

    #[test]
    fn symmetric_pair_stays_antisymmetric() {
        let spec = KernelSpec::newtonian_cutoff(2, 0.3, 2).unwrap();
        let p = params(0.0, 0.01, 0.5);
        let e0 = Ensemble::new(2, vec![0.3, 0.1, -0.3, -0.1], vec![0.0; 4], 0.0).unwrap();
        let key = NoiseKey::new(3, Role::Coupled, 0);
        let mut e = e0;
        for k in 0..p.n_steps() {
            e = step_interacting(&e, &spec, &p, &key, k).unwrap();
            for c in 0..2 {
                assert_eq!(e.positions[c], -e.positions[2 + c]);
                assert_eq!(e.velocities[c], -e.velocities[2 + c]);
            }
        }
    }

    #[test]
    fn exact_kernels_are_refused() {
        let spec = KernelSpec::newtonian_exact(2).unwrap();
        let e = Ensemble::new(2, vec![0.0; 2], vec![0.0; 2], 0.0).unwrap();
        let key = NoiseKey::new(0, Role::Coupled, 0);
        assert!(step_interacting(&e, &spec, &params(0.1, 0.1, 1.0), &key, 0).is_err());
    }

    #[test]
    fn dirac_pilot_gives_the_force() {
        let spec = KernelSpec::newtonian_cutoff(2, 0.3, 64).unwrap();
        let pilot = Ensemble::new(2, vec![0.0, 0.0], vec![0.0, 0.0], 0.0).unwrap();
        let y = Ensemble::new(2, vec![0.4, -0.3, 0.01, 0.02], vec![0.0; 4], 0.0).unwrap();
        let src = SourceCloud::from_rows(&pilot.positions, 2);
        let drift = reference_drift(&y, &src, &spec);
        assert_eq!(&drift[..2], spec.force(&[0.4, -0.3]).unwrap().as_slice());
        assert_eq!(&drift[2..], spec.force(&[0.01, 0.02]).unwrap().as_slice());
        let own = Ensemble::new(2, vec![0.4, -0.3], vec![0.0; 2], 0.0).unwrap();
        let src = SourceCloud::from_rows(&own.positions, 2);
        assert_eq!(reference_drift(&own, &src, &spec), vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_box_support() {
        let law = InitialLaw::UniformBox { half_width: 1.0 };
        let e = sample_initial(&law, 5000, 3, &NoiseKey::new(9, Role::Coupled, 0)).unwrap();
        assert!(e.positions.iter().chain(&e.velocities).all(|c| c.abs() <= 1.0));
    }

    #[test]
    fn non_integrable_velocity_law_is_rejected() {
        let law = InitialLaw::PolyDecay {
            gamma_v: 2.0,
            box_half_width: 1.0,
        };
        let err = sample_initial(&law, 10, 2, &NoiseKey::new(9, Role::Coupled, 0)).unwrap_err();
        assert_eq!(err, Error::NonIntegrableVelocityLaw);
    }

    #[test]
    fn larger_samples_extend_smaller_ones() {
        let law = InitialLaw::standard_gaussian();
        let key = NoiseKey::new(5, Role::Coupled, 2);
        let a = sample_initial(&law, 10, 2, &key).unwrap();
        let b = sample_initial(&law, 40, 2, &key).unwrap();
        assert_eq!(b.truncated(10), a);
    }

    #[test]
    fn default_dt_resolves_the_cutoff() {
        let spec = KernelSpec::newtonian_cutoff(2, 0.3, 4096).unwrap();
        let dt = default_dt(&spec, 2f64.sqrt());
        assert!(dt <= 1e-3);
        let coarse = KernelSpec::newtonian_cutoff(2, 0.3, 2).unwrap();
        assert_eq!(default_dt(&coarse, 1.0), 1e-3);
    }
}
