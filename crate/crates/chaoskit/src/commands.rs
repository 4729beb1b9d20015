//! Command dispatch: one pipeline per subcommand, one output directory per
//! invocation.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use chaoskit_core::dynamics::{run_lockstep, sample_initial, simulate, CouplingSetup, Ensemble, InitialLaw};
use chaoskit_core::experiments::{
    dt_halving_with, kernel_certificates, run_chaos_with, validate_fg, validate_lln, validate_loglip, CertificateConfig,
    ChaosExperiment, FgConfig, LlnConfig, LoglipConfig, RateReport,
};
use chaoskit_core::gronwall::{check_linear, check_logarithmic, check_superlinear, GronwallTrial};
use chaoskit_core::measures::{kde_sup_norm, lp_norm_estimate, moment, phase_space, spatial_marginal, DensityEstimate, EmpiricalMeasure};
use chaoskit_core::rng::{NoiseKey, Role};
use chaoskit_core::transport::{coupled_sup, wp_exact, wp_sliced, DEFAULT_PROJECTIONS, MAX_EXACT};
use chaoskit_core::{Error, KernelFamily};
use serde::Serialize;

use crate::checks::ot_checks;
use crate::config::RunConfig;
use crate::formats::{
    encode_snapshot, exceedance_csv, fits_csv, rate_values_csv, records_csv, DistanceTable, MonitorTable, ReportDocument,
    SnapshotTable,
};
use crate::output::OutputDir;
use crate::report::{self, Status, STATUS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Couple,
    Chaos,
    ValidateKernels,
    ValidateOt,
    ValidateFg,
    ValidateLln,
    ValidateLoglip,
    GronwallCheck,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Couple => "couple",
            Command::Chaos => "chaos",
            Command::ValidateKernels => "validate-kernels",
            Command::ValidateOt => "validate-ot",
            Command::ValidateFg => "validate-fg",
            Command::ValidateLln => "validate-lln",
            Command::ValidateLoglip => "validate-loglip",
            Command::GronwallCheck => "gronwall-check",
            Command::Report => "report",
        }
    }

    /// Whether the command can run on defaults alone.
    pub fn config_optional(self) -> bool {
        matches!(self, Command::ValidateOt | Command::GronwallCheck | Command::Report)
    }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Error = 1,
    BlowUp = 2,
    Threshold = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Blow-ups map to their own status, everything else is an error.
    pub fn of_error(e: &anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::NumericalBlowUp { .. } | Error::ReplicaBlowUp { .. }) => Exit::BlowUp,
            _ => Exit::Error,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub exit: Exit,
    pub dir: Option<PathBuf>,
    pub summary: String,
}

pub struct Invocation {
    pub command: Command,
    pub config: Option<RunConfig>,
    pub out: Option<PathBuf>,
    /// Seed used when there is no configuration.
    pub seed: u64,
    /// Progress lines on stderr.
    pub verbose: bool,
}

/// Worker count: the configuration wins, then the environment, `0` lets
/// the pool decide.
pub fn resolve_threads(config: Option<usize>, env: Option<&str>) -> usize {
    match config {
        Some(n) if n > 0 => n,
        _ => env.and_then(|s| s.trim().parse().ok()).unwrap_or(0),
    }
}

pub fn dispatch(inv: &Invocation) -> Result<Outcome> {
    let env = std::env::var("CHAOSKIT_THREADS").ok();
    let threads = resolve_threads(inv.config.as_ref().map(|c| c.threads), env.as_deref());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| run(inv))
}

fn require_config(inv: &Invocation) -> Result<&RunConfig> {
    inv.config
        .as_ref()
        .ok_or_else(|| anyhow!("`{}` needs --config", inv.command.name()))
}

fn require_experiment(cfg: &RunConfig, cmd: Command) -> Result<ChaosExperiment> {
    cfg.experiment()
        .ok_or_else(|| anyhow!("`{}` needs an `experiment` section", cmd.name()))
}

fn run(inv: &Invocation) -> Result<Outcome> {
    if inv.config.is_none() && !inv.command.config_optional() {
        require_config(inv)?;
    }
    let formats = inv.config.as_ref().map(|c| c.output.clone()).unwrap_or_default();
    let root = inv.out.clone().unwrap_or_else(|| formats.dir.clone());
    let mut out = OutputDir::create(&root, inv.command.name(), &formats)?;
    let seed = inv.config.as_ref().map(|c| c.sim.seed).unwrap_or(inv.seed);
    let (exit, summary) = match inv.command {
        Command::Simulate => cmd_simulate(require_config(inv)?, &mut out)?,
        Command::Couple => cmd_couple(require_config(inv)?, &mut out)?,
        Command::Chaos => cmd_chaos(require_config(inv)?, &mut out, inv.verbose)?,
        Command::ValidateKernels => cmd_kernels(require_config(inv)?, &mut out)?,
        Command::ValidateOt => cmd_ot(inv.config.as_ref(), seed, &mut out)?,
        Command::ValidateFg => cmd_fg(require_config(inv)?, &mut out)?,
        Command::ValidateLln => cmd_lln(require_config(inv)?, &mut out)?,
        Command::ValidateLoglip => cmd_loglip(require_config(inv)?, &mut out)?,
        Command::GronwallCheck => cmd_gronwall(inv.config.as_ref(), seed, &mut out)?,
        Command::Report => {
            let md = report::collect(&root)?;
            out.text("report.md", &md)?;
            (Exit::Ok, "report written".into())
        }
    };
    if inv.command != Command::Report {
        let status = Status {
            command: inv.command.name().into(),
            passed: exit == Exit::Ok,
            summary: summary.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&status)?;
        bytes.push(b'\n');
        out.write_bytes(STATUS_FILE, &bytes)?;
    }
    Ok(Outcome {
        exit,
        dir: Some(out.path().to_path_buf()),
        summary,
    })
}

fn velocity_marginal(e: &Ensemble) -> Result<EmpiricalMeasure> {
    Ok(EmpiricalMeasure::new(e.d, e.velocities.clone())?)
}

fn monitor(table: &mut MonitorTable, e: &Ensemble) -> Result<()> {
    let x = spatial_marginal(e);
    let v = velocity_marginal(e)?;
    // A single particle has no spread to build a bandwidth from.
    if let Ok(dens) = DensityEstimate::new(&x) {
        table.push(e.t, "sup_norm", kde_sup_norm(&dens));
        table.push(e.t, "l2_norm", lp_norm_estimate(&dens, 2.0)?);
    }
    for (name, q) in [("moment_q2", 2.0), ("moment_q4", 4.0)] {
        table.push(e.t, name, moment(&x, q)? + moment(&v, q)?);
    }
    Ok(())
}

fn write_snapshots(out: &mut OutputDir, stem: &str, table: &SnapshotTable, binaries: &[(String, &Ensemble)]) -> Result<()> {
    out.csv(&format!("{stem}.csv"), table.to_csv())?;
    if out.binary_enabled() {
        for (name, e) in binaries {
            out.binary(name, &encode_snapshot(e))?;
        }
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Exit, String)> {
    let exp = require_experiment(cfg, Command::Simulate)?;
    let seed = cfg.sim.seed;
    let key = NoiseKey::new(seed, Role::Coupled, 0);
    for &n in &exp.params.n_grid {
        let spec = cfg.kernel.with_big_n(n as u64)?;
        let init = sample_initial(&cfg.init, n, spec.d, &key)?;
        let states = simulate(init, &spec, &cfg.sim, &key, &exp.params.times)?;
        let mut snaps = SnapshotTable::default();
        let mut mon = MonitorTable::default();
        let mut bins = Vec::new();
        for (k, e) in states.iter().enumerate() {
            snaps.push(0, "interacting", e)?;
            monitor(&mut mon, e)?;
            bins.push((format!("snapshot_N{n}_t{k}.bin"), e));
        }
        write_snapshots(out, &format!("snapshots_N{n}"), &snaps, &bins)?;
        out.csv(&format!("monitor_N{n}.csv"), mon.to_csv())?;
    }
    Ok((Exit::Ok, format!("{} particle counts simulated", exp.params.n_grid.len())))
}

fn cmd_couple(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Exit, String)> {
    let exp = require_experiment(cfg, Command::Couple)?;
    let e = &exp.params;
    let seed = cfg.sim.seed;
    let m = exp.pilot_size();
    let weighted = cfg.kernel.family == KernelFamily::NewtonianCutoff;
    let mut failed_total = 0usize;
    let mut blown = false;
    for &n in &e.n_grid {
        let spec = cfg.kernel.with_big_n(n as u64)?;
        let setup = CouplingSetup {
            spec,
            params: cfg.sim,
            law: cfg.init,
            n,
            pilot_size: m,
            pilot_key: NoiseKey::new(seed, Role::Pilot, 0),
            replica_keys: (0..e.replicas).map(|r| NoiseKey::new(seed, Role::Coupled, r)).collect(),
            fine_spec: None,
            times: e.times.clone(),
        };
        let mut dist = DistanceTable::default();
        let mut stored: Vec<(u32, &str, Ensemble)> = Vec::new();
        let states = run_lockstep(&setup, |snap| {
            let pilot = phase_space(snap.pilot);
            for st in snap.replicas.iter().filter(|s| s.failure.is_none()) {
                let (a, b) = (&st.interacting, &st.reference);
                dist.push(st.replica, snap.t, "interacting-reference", coupled_sup(a, b, weighted, n as f64)?);
                if n <= MAX_EXACT {
                    dist.push(st.replica, snap.t, "interacting-reference", wp_exact(&phase_space(a), &phase_space(b), e.p)?);
                }
                let pk = NoiseKey::new(seed, Role::Projection, st.replica);
                dist.push(st.replica, snap.t, "interacting-pilot", wp_sliced(&phase_space(a), &pilot, e.p, DEFAULT_PROJECTIONS, &pk)?);
            }
            if let Some(st) = snap.replicas.first().filter(|s| s.failure.is_none()) {
                stored.push((st.replica, "interacting", st.interacting.clone()));
                stored.push((st.replica, "reference", st.reference.clone()));
                stored.push((0, "pilot", snap.pilot.clone()));
            }
            Ok(())
        })?;
        let failed = states.iter().filter(|s| s.failure.is_some()).count();
        failed_total += failed;
        if failed * 10 > states.len() {
            blown = true;
        }
        out.csv(&format!("distances_N{n}.csv"), dist.to_csv())?;
        let mut snaps = SnapshotTable::default();
        let mut bins = Vec::new();
        for (k, (replica, system, e)) in stored.iter().enumerate() {
            snaps.push(*replica, system, e)?;
            bins.push((format!("snapshot_N{n}_t{}_{system}.bin", k / 3), e));
        }
        write_snapshots(out, &format!("snapshots_N{n}"), &snaps, &bins)?;
    }
    let summary = format!("{} particle counts coupled, {failed_total} replica failures", e.n_grid.len());
    Ok((if blown { Exit::BlowUp } else { Exit::Ok }, summary))
}

fn write_rate_report<C: Serialize>(out: &mut OutputDir, stem: &str, config: &C, r: &RateReport) -> Result<()> {
    out.json(
        &format!("{stem}_report.json"),
        &ReportDocument {
            config,
            report: r,
            dt_halving: None,
        },
    )?;
    out.csv(&format!("{stem}_values.csv"), rate_values_csv(r))?;
    out.csv(&format!("{stem}_exceedance.csv"), exceedance_csv(r))?;
    out.csv(&format!("{stem}_fits.csv"), fits_csv(r))
}

fn slope_text(r: &RateReport) -> String {
    match (r.fit.slope, r.fit.ci_low, r.fit.ci_high) {
        (Some(s), Some(l), Some(h)) => format!("slope {s:.4} (CI {l:.4} to {h:.4})"),
        (Some(s), _, _) => format!("slope {s:.4}"),
        _ => "degenerate fit, no slope".into(),
    }
}

fn cmd_chaos(cfg: &RunConfig, out: &mut OutputDir, verbose: bool) -> Result<(Exit, String)> {
    let exp = require_experiment(cfg, Command::Chaos)?;
    let mut last = (0usize, u64::MAX);
    let mut progress = |n: usize, step: u64, total: u64| {
        let tenth = (10 * step) / total.max(1);
        if verbose && (n, tenth) != last {
            last = (n, tenth);
            eprintln!("chaos N={n} step {step}/{total}");
        }
    };
    let (report, halving) = if cfg.chaos.dt_halving {
        let (coarse, fine, h) = dt_halving_with(&exp, &mut progress)?;
        out.json(
            "fine_rate_report.json",
            &ReportDocument {
                config: cfg,
                report: &fine,
                dt_halving: None,
            },
        )?;
        out.csv("halving.csv", records_csv(&h.rows))?;
        (coarse, Some(h))
    } else {
        (run_chaos_with(&exp, &mut progress)?, None)
    };
    out.json(
        "rate_report.json",
        &ReportDocument {
            config: cfg,
            report: &report,
            dt_halving: halving.as_ref(),
        },
    )?;
    out.csv("rate_report.csv", rate_values_csv(&report))?;
    out.csv("exceedance.csv", exceedance_csv(&report))?;
    out.csv("fits.csv", fits_csv(&report))?;
    let mut summary = slope_text(&report);
    for w in &report.warnings {
        summary.push_str("; ");
        summary.push_str(w);
    }
    if report.too_many_failures() {
        return Ok((Exit::BlowUp, summary));
    }
    if let (Some(h), Some(tol)) = (&halving, cfg.chaos.dt_halving_tolerance) {
        summary.push_str(&format!("; dt halving changes medians by up to {:.4}", h.max_rel_change));
        if h.max_rel_change >= tol {
            return Ok((Exit::Threshold, summary));
        }
    }
    Ok((Exit::Ok, summary))
}

fn verdict(passed: bool) -> Exit {
    if passed {
        Exit::Ok
    } else {
        Exit::Threshold
    }
}

fn cmd_kernels(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Exit, String)> {
    let k = &cfg.validation.kernels;
    let cc = CertificateConfig {
        kernel: cfg.kernel,
        big_n: k.big_n.clone(),
        pairs: k.pairs,
        seed: cfg.sim.seed,
    };
    let cert = kernel_certificates(&cc)?;
    #[derive(Serialize)]
    struct Doc<'a, C, R> {
        config: &'a C,
        #[serde(flatten)]
        certificate: &'a R,
    }
    out.json("kernel_certificates.json", &Doc { config: &cc, certificate: &cert })?;
    out.csv("kernel_certificates.csv", records_csv(&cert.per_n))?;
    let passed = cert.passed(k.spread_tolerance, k.lipschitz_tolerance);
    let summary = format!(
        "envelope constant spread {:.3}{}",
        cert.envelope_spread,
        cert.lipschitz_max.map(|l| format!(", Lipschitz ratio {l:.3}")).unwrap_or_default()
    );
    Ok((verdict(passed), summary))
}

fn cmd_ot(cfg: Option<&RunConfig>, seed: u64, out: &mut OutputDir) -> Result<(Exit, String)> {
    let check = cfg.map(|c| c.validation.ot.clone()).unwrap_or_default();
    let r = ot_checks(&check, seed)?;
    out.json("ot_report.json", &r)?;
    let summary = format!(
        "brute force max rel error {:.2e}, 1-D sliced max rel error {:.2e}, {} triangle violations",
        r.brute_force.max_rel_error, r.one_dim.max_rel_error, r.metric.triangle_violations
    );
    Ok((verdict(r.passed()), summary))
}

fn cmd_fg(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Exit, String)> {
    let f = &cfg.validation.fg;
    let fc = FgConfig {
        law: f.law.unwrap_or(cfg.init),
        d: f.d.unwrap_or(cfg.kernel.d),
        space: f.space,
        n_grid: f.n_grid.clone(),
        p: f.p,
        replicas: f.replicas,
        seed: cfg.sim.seed,
        reference_size: f.reference_size,
        exact_cap: f.exact_cap,
    };
    let r = validate_fg(&fc)?;
    write_rate_report(out, "fg", &fc, &r)?;
    let expected: f64 = r.metadata["expected_slope"].parse()?;
    let passed = r.fit.slope.is_some_and(|s| (s - expected).abs() <= f.slope_tolerance);
    Ok((verdict(passed), format!("{}, expected {expected}", slope_text(&r))))
}

fn cmd_lln(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Exit, String)> {
    let l = &cfg.validation.lln;
    let lc = LlnConfig {
        kappa: l.kappa,
        delta: l.delta.unwrap_or(cfg.kernel.delta),
        d: l.d.unwrap_or(cfg.kernel.d),
        n_grid: l.n_grid.clone(),
        m_exponent: l.m_exponent,
        replicas: l.replicas,
        seed: cfg.sim.seed,
        half_width: l.half_width,
        c0: 1.0,
    };
    let r = validate_lln(&lc)?;
    write_rate_report(out, "lln", &lc, &r)?;
    let gamma_m: f64 = r.metadata["gamma_m"].parse()?;
    let passed = r.fit.slope.is_some_and(|s| s <= -gamma_m + l.slope_margin);
    Ok((verdict(passed), format!("{}, required <= {}", slope_text(&r), -gamma_m + l.slope_margin)))
}

fn cmd_loglip(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Exit, String)> {
    let l = &cfg.validation.loglip;
    let lc = LoglipConfig {
        d: l.d.unwrap_or(cfg.kernel.d),
        law: l.law.unwrap_or_else(InitialLaw::standard_gaussian),
        p: l.p,
        scales: l.scales.clone(),
        samples: l.samples,
        big_n: l.big_n.clone(),
        delta: l.delta.unwrap_or(cfg.kernel.delta),
        seed: cfg.sim.seed,
    };
    let r = validate_loglip(&lc)?;
    #[derive(Serialize)]
    struct Doc<'a, C, R> {
        config: &'a C,
        #[serde(flatten)]
        report: &'a R,
    }
    out.json("loglip_report.json", &Doc { config: &lc, report: &r })?;
    out.csv("loglip_rows.csv", records_csv(&r.rows))?;
    let summary = format!("constant spread {:.3} exact, {:.3} cut-off", r.spread_exact, r.spread_cutoff);
    Ok((verdict(r.passed(l.spread_tolerance)), summary))
}

fn cmd_gronwall(cfg: Option<&RunConfig>, seed: u64, out: &mut OutputDir) -> Result<(Exit, String)> {
    let g = cfg.map(|c| c.validation.gronwall.clone()).unwrap_or_default();
    let mut trials: Vec<GronwallTrial> = check_linear(g.trials, seed)?;
    trials.extend(check_logarithmic(g.trials, seed)?);
    trials.extend(check_superlinear(g.trials, seed, g.form)?);
    println!("{:>5} {:>5} {:>8} {:>14} {:>14} {:>9}  status", "lemma", "trial", "t", "numeric", "bound", "tol");
    for t in &trials {
        println!(
            "{:>5} {:>5} {:>8.4} {:>14.8e} {:>14.8e} {:>9.1e}  {}",
            t.lemma,
            t.trial,
            t.t,
            t.numeric,
            t.bound,
            t.tolerance,
            if t.passed { "pass" } else { "FAIL" }
        );
    }
    out.csv("gronwall.csv", records_csv(&trials))?;
    out.json("gronwall.json", &trials)?;
    let failed = trials.iter().filter(|t| !t.passed).count();
    Ok((verdict(failed == 0), format!("{} trials, {failed} failed", trials.len())))
}

