use chaoskit_core::field::{accumulate, SourceCloud};
use chaoskit_core::rng::{NoiseKey, Role};
use chaoskit_core::KernelSpec;
use std::time::Instant;
fn main() {
    for (spec, d) in [
        (KernelSpec::newtonian_cutoff(2, 0.3, 4096).unwrap(), 2usize),
        (KernelSpec::power_cutoff(3, 0.5, 0.25, 4096).unwrap(), 3),
    ] {
        let m = 32768;
        let key = NoiseKey::new(1, Role::Validation, 0);
        let mut s = key.stream(0, 0);
        let src: Vec<f64> = (0..m * d).map(|_| s.gaussian()).collect();
        let sc = SourceCloud::from_rows(&src, d);
        let mut out = vec![0.0; src.len()];
        let k = spec.pair_kernel();
        let t = Instant::now();
        accumulate(&src, &sc, &k, m as f64, &mut out);
        let e = t.elapsed().as_secs_f64();
        println!("d={d} {:?}: {:.3} s, {:.2e} pairs/s", k.power, e, (m * m) as f64 / e);
    }
}
