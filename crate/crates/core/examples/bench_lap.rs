use chaoskit_core::measures::EmpiricalMeasure;
use chaoskit_core::rng::{NoiseKey, Role};
use chaoskit_core::transport::{cost_matrix, lapjv};
use std::time::Instant;

fn main() {
    let sizes: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    for &n in &sizes {
        let m = 4;
        let mut s = NoiseKey::new(1, Role::Validation, n as u32).stream(0, 0);
        let a = EmpiricalMeasure::new(m, (0..n * m).map(|_| s.gaussian()).collect()).unwrap();
        let b = EmpiricalMeasure::new(m, (0..n * m).map(|_| s.gaussian()).collect()).unwrap();
        let t = Instant::now();
        let c = cost_matrix(&a, &b, 1.0);
        let plan = lapjv(&c, n);
        let w: f64 = plan.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum::<f64>() / n as f64;
        println!("n={n} m={m} W1={w:.6} {:.2}s", t.elapsed().as_secs_f64());
    }
}
