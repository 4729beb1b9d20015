use chaoskit_core::dynamics::{run_coupled, sample_initial, simulate, CouplingSetup, Ensemble, InitialLaw, SimParams};
use chaoskit_core::kernels::KernelSpec;
use chaoskit_core::measures::{kde_sup_norm, spatial_marginal, DensityEstimate};
use chaoskit_core::rng::{NoiseKey, Role};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn gaussian(pos: f64, vel: f64) -> InitialLaw {
    InitialLaw::Gaussian {
        position_scale: pos,
        velocity_scale: vel,
    }
}

fn run(n: usize, threads: usize) -> Vec<Ensemble> {
    let spec = KernelSpec::newtonian_cutoff(2, 0.3, n as u64).unwrap();
    let params = SimParams::new(0.25, 0.01, 0.2, 11).unwrap();
    let key = NoiseKey::new(11, Role::Coupled, 0);
    pool(threads).install(|| {
        let init = sample_initial(&gaussian(1.0, 1.0), n, 2, &key).unwrap();
        simulate(init, &spec, &params, &key, &[0.1, 0.2]).unwrap()
    })
}

#[test]
fn trajectories_do_not_depend_on_worker_count() {
    let a = run(700, 1);
    let b = run(700, 8);
    let c = run(700, 3);
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert_eq!(x.positions, y.positions);
        assert_eq!(x.velocities, y.velocities);
        assert_eq!(x.positions, z.positions);
    }
}

#[test]
fn free_velocities_are_exactly_gaussian() {
    let (n, d, sigma, t) = (10_000usize, 2usize, 0.5, 1.0);
    let spec = KernelSpec::newtonian_cutoff(d, 0.3, n as u64).unwrap().with_scale(0.0);
    let params = SimParams::new(sigma, 0.01, t, 5).unwrap();
    let key = NoiseKey::new(5, Role::Coupled, 0);
    let v0 = 0.8;
    let init = sample_initial(&gaussian(1.0, v0), n, d, &key).unwrap();
    let out = simulate(init, &spec, &params, &key, &[t]).unwrap();
    let sd = (v0 * v0 + 2.0 * sigma * t).sqrt();
    let bins = 40;
    let mut counts = vec![0usize; bins];
    let unit = Normal::new(0.0, 1.0).unwrap();
    for v in &out[0].velocities {
        let u = unit.cdf(v / sd);
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = (n * d) as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(1.0 - 1e-3);
    assert!(chi2 < critical, "chi2 = {chi2}, critical = {critical}");
}

#[test]
fn momentum_is_conserved_without_noise() {
    let n = 200;
    let d = 2;
    let key = NoiseKey::new(2, Role::Coupled, 0);
    let half = sample_initial(&gaussian(0.5, 1.0), n / 2, d, &key).unwrap();
    let mirror = |v: &[f64]| v.iter().cloned().chain(v.iter().map(|x| -x)).collect::<Vec<f64>>();
    let init = Ensemble::new(d, mirror(&half.positions), mirror(&half.velocities), 0.0).unwrap();
    let spec = KernelSpec::newtonian_cutoff(d, 0.3, n as u64).unwrap();
    let params = SimParams::new(0.0, 0.01, 0.5, 2).unwrap();
    let out = simulate(init, &spec, &params, &key, &[0.5]).unwrap();
    let scale: f64 = out[0].velocities.iter().map(|v| v.abs()).sum();
    for c in 0..d {
        let p: f64 = out[0].velocities.iter().skip(c).step_by(d).sum();
        assert!(p.abs() <= 1e-12 * scale, "momentum component {c} = {p}");
    }
}

#[test]
fn moments_stay_bounded_on_short_horizons() {
    let (n, d) = (1024usize, 2usize);
    let spec = KernelSpec::newtonian_cutoff(d, 0.3, n as u64).unwrap();
    let params = SimParams::new(0.5, 0.01, 0.5, 3).unwrap();
    let key = NoiseKey::new(3, Role::Coupled, 0);
    let init = sample_initial(&gaussian(1.0, 1.0), n, d, &key).unwrap();
    let times: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
    let out = simulate(init, &spec, &params, &key, &times).unwrap();
    let moment = |e: &Ensemble, q: i32| {
        (0..n)
            .map(|i| {
                let x: f64 = e.position(i).iter().map(|a| a * a).sum::<f64>().sqrt();
                let v: f64 = e.velocity(i).iter().map(|a| a * a).sum::<f64>().sqrt();
                x.powi(q) + v.powi(q)
            })
            .sum::<f64>()
            / n as f64
    };
    for q in [2, 4] {
        let m0 = moment(&out[0], q);
        for e in &out {
            assert!(moment(e, q) < 10.0 * m0);
        }
    }
}

#[test]
fn substeps_share_the_brownian_path() {
    let (n, d) = (64usize, 3usize);
    let spec = KernelSpec::newtonian_cutoff(d, 0.2, n as u64).unwrap().with_scale(0.0);
    let key = NoiseKey::new(9, Role::Coupled, 4);
    let init = sample_initial(&gaussian(1.0, 1.0), n, d, &key).unwrap();
    let coarse = SimParams::new(0.3, 0.02, 0.4, 9).unwrap().with_noise_substeps(2).unwrap();
    let fine = SimParams::new(0.3, 0.01, 0.4, 9).unwrap();
    let a = simulate(init.clone(), &spec, &coarse, &key, &[0.4]).unwrap();
    let b = simulate(init, &spec, &fine, &key, &[0.4]).unwrap();
    for (x, y) in a[0].velocities.iter().zip(&b[0].velocities) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn coupling_without_forces_is_the_identity() {
    let spec = KernelSpec::newtonian_cutoff(2, 0.3, 32).unwrap().with_scale(0.0);
    let setup = CouplingSetup {
        spec,
        params: SimParams::new(0.25, 0.05, 0.5, 4).unwrap(),
        law: gaussian(1.0, 1.0),
        n: 32,
        pilot_size: 64,
        pilot_key: NoiseKey::new(4, Role::Pilot, 0),
        replica_keys: vec![NoiseKey::new(4, Role::Coupled, 0)],
        fine_spec: None,
        times: vec![0.0, 0.25, 0.5],
    };
    let runs = run_coupled(&setup).unwrap();
    assert_eq!(runs.len(), 3);
    for r in &runs {
        assert_eq!(r.interacting.positions, r.reference.positions);
        assert_eq!(r.interacting.velocities, r.reference.velocities);
    }
}

// Only the cut-off changes with N here; the pilot density should not.
#[test]
fn pilot_density_sup_norm_is_stable_in_n() {
    let (m, d) = (2048usize, 2usize);
    let params = SimParams::new(0.25, 0.025, 0.5, 21).unwrap();
    let key = NoiseKey::new(21, Role::Pilot, 0);
    let init = sample_initial(&InitialLaw::standard_gaussian(), m, d, &key).unwrap();
    let times: Vec<f64> = (0..=4).map(|k| 0.125 * k as f64).collect();
    let mut sups = Vec::new();
    for n in [64u64, 128, 256, 512, 1024, 2048, 4096] {
        let spec = KernelSpec::newtonian_cutoff(d, 0.3, n).unwrap();
        let out = simulate(init.clone(), &spec, &params, &key, &times).unwrap();
        let s = out
            .iter()
            .map(|e| kde_sup_norm(&DensityEstimate::new(&spatial_marginal(e)).unwrap()))
            .fold(0.0, f64::max);
        sups.push(s);
    }
    for w in sups.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.5, "{sups:?}");
    }
}
