//! Synthetic two-class histogram generator. Half of the discriminative
//! words lean toward one class and half toward the other by a configurable
//! skew; noise words are shared. The `block` correlation mode draws counts
//! in runs of four neighboring words to mimic the correlated local features
//! of densely sampled data, violating the independent-draw assumption that
//! the `iid` mode satisfies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::HistogramDataset;

use super::EvalError;

/// How many neighboring words a single draw touches in block mode.
const BLOCK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    #[default]
    Iid,
    Block,
}

impl fmt::Display for CorrelationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationMode::Iid => "iid",
            CorrelationMode::Block => "block",
        })
    }
}

impl FromStr for CorrelationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iid" => Ok(CorrelationMode::Iid),
            "block" => Ok(CorrelationMode::Block),
            other => Err(format!(
                "unknown correlation mode {other:?}, expected iid or block"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_per_class: usize,
    /// Words whose frequency differs between the classes.
    pub t_disc: usize,
    /// Words drawn identically for both classes.
    pub t_noise: usize,
    pub counts_per_sample: usize,
    /// Frequency boost of a discriminative word in its favored class.
    pub class_skew: f64,
    pub correlation_mode: CorrelationMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            t_disc: 8,
            t_noise: 56,
            counts_per_sample: 100,
            class_skew: 3.0,
            correlation_mode: CorrelationMode::Iid,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn t(&self) -> usize {
        self.t_disc + self.t_noise
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.t() < 2 {
            return Err(EvalError::BadSynthConfig(format!(
                "need at least 2 words, got t_disc + t_noise = {}",
                self.t()
            )));
        }
        if self.n_per_class == 0 || self.counts_per_sample == 0 {
            return Err(EvalError::BadSynthConfig(
                "n_per_class and counts_per_sample must be positive".into(),
            ));
        }
        if !(self.class_skew > 0.0) || !self.class_skew.is_finite() {
            return Err(EvalError::BadSynthConfig(format!(
                "class_skew must be positive and finite, got {}",
                self.class_skew
            )));
        }
        Ok(())
    }
}

/// Cumulative distribution for O(log t) categorical draws.
struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Self { cdf }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

/// Word weights for one class: even-indexed discriminative words favor
/// class 1, odd-indexed ones favor class 2, noise words are flat.
fn class_weights(cfg: &SynthConfig, class: usize) -> Vec<f64> {
    (0..cfg.t())
        .map(|j| {
            if j < cfg.t_disc && j % 2 == class {
                cfg.class_skew
            } else {
                1.0
            }
        })
        .collect()
}

/// Generates `2 * n_per_class` histograms with labels 1 and 2,
/// deterministically under `cfg.seed`.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<HistogramDataset, EvalError> {
    cfg.validate()?;
    let t = cfg.t();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samplers = [
        Sampler::new(&class_weights(cfg, 0)),
        Sampler::new(&class_weights(cfg, 1)),
    ];
    let n = 2 * cfg.n_per_class;
    let mut counts = vec![0.0; n * t];
    let mut labels = Vec::with_capacity(n);
    for class in 0..2 {
        for _ in 0..cfg.n_per_class {
            let row = labels.len() * t;
            labels.push(class as i64 + 1);
            match cfg.correlation_mode {
                CorrelationMode::Iid => {
                    for _ in 0..cfg.counts_per_sample {
                        counts[row + samplers[class].draw(&mut rng)] += 1.0;
                    }
                }
                CorrelationMode::Block => {
                    // each draw deposits one count on a run of neighbors
                    for _ in 0..cfg.counts_per_sample.div_ceil(BLOCK) {
                        let center = samplers[class].draw(&mut rng);
                        for offset in 0..BLOCK {
                            counts[row + (center + offset) % t] += 1.0;
                        }
                    }
                }
            }
        }
    }
    Ok(HistogramDataset::new(counts, t, &labels).expect("generated counts are valid"))
}
