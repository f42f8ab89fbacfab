//! Shared fixtures for the benchmarks.

use cpens_core::data::{generate_synthetic, SyntheticConfig};
use cpens_core::Dataset;

/// A synthetic cohort with `n` examples and `d` numeric features.
pub fn cohort(n: usize, d: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_examples: n,
        n_features: d,
        noise_rate: 0.15,
        seed,
        ..SyntheticConfig::default()
    })
    .expect("valid synthetic configuration")
}
