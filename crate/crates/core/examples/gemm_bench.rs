//! Rough single-core gemm throughput at the digit-CNN's working shapes.

use semnet::numerics::matmul;
use semnet::util::seeded_rng;
use semnet::Tensor;
use std::time::Instant;

fn bench<T: semnet::numerics::Scalar>(name: &str, m: usize, k: usize, n: usize, reps: usize) {
    let mut rng = seeded_rng(1);
    let a = Tensor::<T>::random_uniform(vec![m, k], -1.0, 1.0, &mut rng);
    let b = Tensor::<T>::random_uniform(vec![k, n], -1.0, 1.0, &mut rng);
    let t = Instant::now();
    let mut sink = 0.0;
    for _ in 0..reps {
        let c = matmul(&a, &b).unwrap();
        sink += c.as_slice()[0].to_f64();
    }
    let secs = t.elapsed().as_secs_f64();
    let gflops = (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / secs / 1e9;
    println!("{name}: {m}x{k}x{n} x{reps} -> {secs:.3}s = {gflops:.1} GFLOP/s (sink {sink:.2})");
}

fn main() {
    bench::<f32>("f32 conv1-ish", 32, 25, 784, 2000);
    bench::<f32>("f32 conv2-ish", 64, 800, 196, 2000);
    bench::<f32>("f32 fc1", 32, 3136, 512, 500);
    bench::<f64>("f64 conv2-ish", 64, 800, 196, 500);
}
