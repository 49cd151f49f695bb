//! Shared fixtures for the microbenchmarks.

use codebook_core::{gen_synthetic, CorrelationMode, HistogramDataset, SynthConfig};

/// Two-class synthetic corpus with `t` words and `n_per_class` samples per
/// class; one word in eight is discriminative.
pub fn corpus(t: usize, n_per_class: usize, seed: u64) -> HistogramDataset {
    let t_disc = t / 8;
    gen_synthetic(&SynthConfig {
        n_per_class,
        t_disc,
        t_noise: t - t_disc,
        counts_per_sample: 150,
        class_skew: 3.0,
        correlation_mode: CorrelationMode::Iid,
        seed,
    })
    .expect("fixture settings are valid")
}
