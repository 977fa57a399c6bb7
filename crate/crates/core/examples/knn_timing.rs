//! Times LOO-1NN on a synthetic 10000 × 1024 set.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repcx::{loo_nn_error, LabeledPointSet};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let d: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1024);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let points: Vec<f32> = labels
        .iter()
        .flat_map(|&l| (0..d).map(move |k| if k % 10 == l as usize { 1.0 } else { 0.0 }))
        .map(|v: f32| v + rng.random::<f32>())
        .collect();
    let set = LabeledPointSet::new(points, d, labels, 10).unwrap();
    let t = Instant::now();
    let est = loo_nn_error(&set).unwrap();
    println!("n={n} d={d} error={} in {:.2?}", est.value, t.elapsed());
}
