//! The chaos harness: synchronous couplings over a grid of particle counts.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{leg, ChaosExperiment, Exceedance, LegFit, LegSample, RateReport, ReplicaFailure, FAILURE_WARNING};
use super::stats::{exceedance_grid, fit_rate, median, Center, BOOTSTRAP_RESAMPLES};
use crate::dynamics::{run_lockstep, CouplingSetup, Ensemble};
use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::measures::phase_space;
use crate::par;
use crate::rng::{lane, sample_indices, NoiseKey, Role};
use crate::transport::{coupled_sup, j_functional, j_functional_tilde, wp_exact, MAX_EXACT};

/// Sample size on both sides of an assignment once `N` exceeds
/// [`MAX_EXACT`].
pub const SUBSAMPLE_CAP: usize = 2048;

/// Per-replica values at one observation.
#[derive(Clone, Copy)]
struct Observed {
    coupled_sup: f64,
    j: f64,
    nu_fn: f64,
    mu_f: f64,
}

struct Observation {
    t: f64,
    replicas: Vec<Option<Observed>>,
    fn_f: Option<f64>,
}

/// Progress callback arguments: `(N, step, n_steps)`.
pub type Progress<'a> = &'a mut dyn FnMut(usize, u64, u64);

pub fn run_chaos(exp: &ChaosExperiment) -> Result<RateReport> {
    run_chaos_with(exp, &mut |_, _, _| {})
}

/// [`run_chaos`] reporting every time step to `progress`.
pub fn run_chaos_with(exp: &ChaosExperiment, progress: Progress<'_>) -> Result<RateReport> {
    let exp = exp.clone().validated()?;
    let e = &exp.params;
    let params = exp.sim;
    let seed = params.seed;
    let m = exp.pilot_size();
    let power = exp.kernel.family == KernelFamily::PowerCutoff;
    let n_steps = params.n_steps();
    let step_times: Vec<f64> = (0..=n_steps).map(|k| params.time_at(k)).collect();
    let obs_steps: Vec<(u64, f64)> = e.times.iter().map(|&t| (params.step_for_time(t), t)).collect();
    let r_count = e.replicas as usize;

    let mut per_n = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let ex_grid = exceedance_grid();
    let gamma = exp.threshold_exponent();

    for &n in &e.n_grid {
        let spec = exp.kernel.with_big_n(n as u64)?;
        let fine_spec = if e.fine_pilot {
            Some(spec.with_delta(2.0 * spec.delta)?)
        } else {
            None
        };
        let setup = CouplingSetup {
            spec,
            params,
            law: exp.init,
            n,
            pilot_size: m,
            pilot_key: NoiseKey::new(seed, Role::Pilot, 0),
            replica_keys: (0..e.replicas).map(|r| NoiseKey::new(seed, Role::Coupled, r)).collect(),
            fine_spec,
            times: step_times.clone(),
        };
        let big_n = n as f64;
        let delta = spec.delta;
        let j_of = |a: &Ensemble, b: &Ensemble| {
            if power {
                j_functional_tilde(a, b, delta, big_n)
            } else {
                j_functional(a, b, delta, big_n)
            }
        };
        let mut j_max = vec![0.0f64; r_count];
        let mut observations: Vec<Observation> = Vec::new();
        let states = run_lockstep(&setup, |snap| {
            progress(n, snap.step, n_steps);
            for st in snap.replicas.iter().filter(|s| s.failure.is_none()) {
                let j = j_of(&st.interacting, &st.reference)?;
                let slot = &mut j_max[st.replica as usize];
                *slot = slot.max(j);
            }
            for &(_, t) in obs_steps.iter().filter(|o| o.0 == snap.step) {
                let measured = par::map_range(snap.replicas.len(), |r| -> Result<Option<Observed>> {
                    let st = &snap.replicas[r];
                    if st.failure.is_some() {
                        return Ok(None);
                    }
                    let cs = coupled_sup(&st.interacting, &st.reference, !power, big_n)?.value;
                    let j = j_of(&st.interacting, &st.reference)?;
                    let k = if n <= MAX_EXACT { n } else { SUBSAMPLE_CAP };
                    let mut s = NoiseKey::new(seed, Role::Subsample, st.replica).stream(n as u32, lane::AUX);
                    let idx = sample_indices(&mut s, m, 2 * k);
                    let (head, fresh) = idx.split_at(k);
                    let pilot_head = phase_space(&snap.pilot.select(head));
                    let pilot_fresh = phase_space(&snap.pilot.select(fresh));
                    let (mu, nu) = if n <= MAX_EXACT {
                        (phase_space(&st.interacting), phase_space(&st.reference))
                    } else {
                        let own = sample_indices(&mut s, n, k);
                        (phase_space(&st.interacting.select(&own)), phase_space(&st.reference.select(&own)))
                    };
                    Ok(Some(Observed {
                        coupled_sup: cs,
                        j,
                        nu_fn: wp_exact(&nu, &pilot_fresh, e.p)?.value,
                        mu_f: wp_exact(&mu, &pilot_head, e.p)?.value,
                    }))
                });
                let replicas = measured.into_iter().collect::<Result<Vec<_>>>()?;
                let fn_f = match snap.fine_pilot {
                    Some(fp) => {
                        let k = SUBSAMPLE_CAP.min(m);
                        let a = phase_space(&snap.pilot.truncated(k));
                        let b = phase_space(&fp.truncated(k));
                        Some(wp_exact(&a, &b, e.p)?.value)
                    }
                    None => None,
                };
                observations.push(Observation { t, replicas, fn_f });
            }
            Ok(())
        })?;

        let mut failed = vec![false; r_count];
        for st in &states {
            if let Some(err) = &st.failure {
                failed[st.replica as usize] = true;
                let step = match err {
                    Error::ReplicaBlowUp { step, .. } => *step,
                    _ => 0,
                };
                failures.push(ReplicaFailure {
                    n,
                    replica: st.replica,
                    step,
                });
            }
        }
        let n_failed = failed.iter().filter(|f| **f).count();
        if n_failed * 10 > r_count {
            warnings.push(format!("{FAILURE_WARNING} at N = {n}: {n_failed} of {r_count}"));
        }
        let kept: Vec<u32> = (0..e.replicas).filter(|r| !failed[*r as usize]).collect();

        let mut push = |t: f64, name: &str, replicas: Vec<u32>, values: Vec<f64>| {
            let exceedance = Exceedance::compute(&values, n, gamma, &ex_grid);
            per_n.push(LegSample {
                n,
                t,
                leg: name.to_string(),
                replicas,
                values,
                exceedance,
            });
        };
        for obs in &observations {
            let get = |f: fn(&Observed) -> f64| -> Vec<f64> {
                kept.iter().map(|&r| obs.replicas[r as usize].as_ref().map(f).unwrap_or(f64::NAN)).collect()
            };
            push(obs.t, leg::COUPLED_SUP, kept.clone(), get(|o| o.coupled_sup));
            push(obs.t, leg::J, kept.clone(), get(|o| o.j));
            push(obs.t, leg::NU_FN, kept.clone(), get(|o| o.nu_fn));
            push(obs.t, leg::MU_F, kept.clone(), get(|o| o.mu_f));
            if let Some(v) = obs.fn_f {
                push(obs.t, leg::FN_F, vec![0], vec![v]);
            }
        }
        push(params.horizon, leg::J_MAX, kept.clone(), kept.iter().map(|&r| j_max[r as usize]).collect());
    }

    let mut report = RateReport {
        per_n,
        fit: super::stats::RateFit {
            slope: None,
            intercept: None,
            ci_low: None,
            ci_high: None,
            spearman: None,
            points: 0,
            degenerate: true,
        },
        fits: Vec::new(),
        failures,
        warnings,
        metadata: BTreeMap::new(),
    };
    let mut legs: Vec<(&str, f64)> = Vec::new();
    for &t in &e.times {
        legs.extend([leg::COUPLED_SUP, leg::J, leg::NU_FN, leg::MU_F].iter().map(|l| (*l, t)));
        if e.fine_pilot {
            legs.push((leg::FN_F, t));
        }
    }
    legs.push((leg::J_MAX, params.horizon));
    for (i, (name, t)) in legs.into_iter().enumerate() {
        let key = NoiseKey::new(seed, Role::Bootstrap, i as u32);
        let fit = fit_rate(&report.series(name, t), Center::Median, BOOTSTRAP_RESAMPLES, &key);
        report.fits.push(LegFit {
            leg: name.to_string(),
            t,
            center: Center::Median,
            fit,
        });
    }
    let last = *e.times.last().unwrap();
    report.fit = report.leg_fit(leg::MU_F, last).unwrap().fit.clone();
    if report.fit.degenerate {
        report.warnings.push("degenerate fit: fewer than three usable grid points".to_string());
    }
    let md = &mut report.metadata;
    md.insert("headline_leg".into(), leg::MU_F.into());
    md.insert("headline_t".into(), format!("{last}"));
    md.insert("pilot_size".into(), format!("{m}"));
    md.insert("threshold_exponent".into(), format!("{gamma}"));
    md.insert("dt".into(), format!("{}", params.dt));
    md.insert("noise_substeps".into(), format!("{}", params.noise_substeps));
    md.insert(
        "subsampling".into(),
        format!(
            "equal-size exact assignment against disjoint pilot subsamples of size N for N <= {MAX_EXACT}; \
             {SUBSAMPLE_CAP} points on both sides above"
        ),
    );
    md.insert(
        "cutoff_bias_leg".into(),
        if e.fine_pilot {
            "measured against a pilot with cut-off exponent 2 delta".into()
        } else {
            "folded into the headline leg".into()
        },
    );
    Ok(report)
}

/// Headline medians at `dt` and at `dt / 2` on a shared Brownian path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub t: f64,
    pub median_dt: f64,
    pub median_half: f64,
    pub rel_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtHalving {
    pub leg: String,
    pub rows: Vec<HalvingRow>,
    pub max_rel_change: f64,
}

/// Runs the experiment at `dt` (with twice the noise substeps) and at
/// `dt / 2`, so both runs integrate the same Brownian path, and compares
/// the headline medians.
pub fn dt_halving(exp: &ChaosExperiment) -> Result<(RateReport, RateReport, DtHalving)> {
    dt_halving_with(exp, &mut |_, _, _| {})
}

pub fn dt_halving_with(exp: &ChaosExperiment, progress: Progress<'_>) -> Result<(RateReport, RateReport, DtHalving)> {
    let (coarse, fine) = halving_pair(exp)?;
    let a = run_chaos_with(&coarse, progress)?;
    let b = run_chaos_with(&fine, progress)?;
    let h = compare_halving(&a, &b);
    Ok((a, b, h))
}

/// The experiment at `dt` with twice the noise substeps, and at `dt / 2`.
pub fn halving_pair(exp: &ChaosExperiment) -> Result<(ChaosExperiment, ChaosExperiment)> {
    let s = exp.sim.noise_substeps;
    let mut coarse = exp.clone();
    coarse.sim = exp.sim.with_noise_substeps(2 * s)?;
    let mut fine = exp.clone();
    fine.sim.dt = exp.sim.dt / 2.0;
    fine.sim = fine.sim.with_noise_substeps(s)?;
    Ok((coarse, fine))
}

/// Relative change of the headline medians between two runs.
pub fn compare_halving(a: &RateReport, b: &RateReport) -> DtHalving {
    let mut rows = Vec::new();
    for sa in a.per_n.iter().filter(|x| x.leg == leg::MU_F) {
        if let Some(sb) = b.sample(leg::MU_F, sa.n, sa.t) {
            if let (Some(ma), Some(mb)) = (median(&sa.values), median(&sb.values)) {
                rows.push(HalvingRow {
                    n: sa.n,
                    t: sa.t,
                    median_dt: ma,
                    median_half: mb,
                    rel_change: Float::abs(mb - ma) / ma,
                });
            }
        }
    }
    let max_rel_change = rows.iter().map(|r| r.rel_change).fold(0.0, f64::max);
    DtHalving {
        leg: leg::MU_F.into(),
        rows,
        max_rel_change,
    }
}

/// Fraction of `values` at or above `level`.
pub fn fraction_at_least(values: &[f64], level: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| **v >= level).count() as f64 / values.len() as f64
}
