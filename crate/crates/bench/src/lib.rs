//! Shared inputs for the benchmarks.

use dtgspl_core::harness::RunConfig;
use dtgspl_core::kernel::Mat;
use dtgspl_core::rng::{rng_for, stream};
use dtgspl_core::synth::{gen_dataset, TrainSample};
use dtgspl_core::temporal::Interval;
use rand::Rng as _;

/// `n × n` matrix of uniform costs in `[0, 1)`.
pub fn random_costs(n: usize, seed: u64) -> Mat {
    let mut rng = rng_for(seed, stream::DATA, n as u64);
    Mat::from_shape_simple_fn((n, n), || rng.random::<f64>())
}

/// `(interval, score)` pairs with random endpoints.
pub fn scored_intervals(n: usize, seed: u64) -> Vec<(Interval, f64)> {
    let mut rng = rng_for(seed, stream::DATA, 0);
    (0..n)
        .map(|_| {
            let a: f64 = rng.random_range(0.0..0.9);
            let w: f64 = rng.random_range(0.02..0.5);
            (Interval::new(a, (a + w).min(1.0)).unwrap(), rng.random())
        })
        .collect()
}

/// Default configuration shrunk to a handful of samples.
pub fn small_run(samples: usize) -> (RunConfig, Vec<TrainSample>) {
    let mut cfg = RunConfig::default();
    cfg.data.samples = samples;
    let data = gen_dataset(&cfg.data, cfg.seed).unwrap().training_views();
    (cfg, data)
}
