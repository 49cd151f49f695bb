//! Codebook compression for labeled bag-of-words histograms.
//!
//! A codebook of `t0` words is compressed by greedily merging pairs of words,
//! one pair per level, until a target size is reached. Each candidate merge is
//! scored by a pluggable criterion; all six built-in criteria are derived from
//! the same question: how much does the class structure of the data suffer if
//! two words become indistinguishable?
//!
//! The crate is organized around a small pipeline:
//!
//! * [`data`] loads labeled histogram datasets from CSV and applies merge maps,
//! * [`estimate`] provides the probabilistic building blocks (multinomial MLE,
//!   Dirichlet-multinomial and Normal-Gamma marginal likelihoods, Gaussian MLE),
//! * [`maxmargin`] solves the soft-margin linear SVM used by the max-margin
//!   criterion and converts its solution back into class-conditional word
//!   probabilities,
//! * [`criteria`] implements the six merging criteria behind one trait,
//! * [`engine`] runs the greedy merge loop and produces a [`MergeTree`] that can
//!   be cut at any size,
//! * [`eval`] generates synthetic benchmark data and measures how much
//!   classification accuracy survives compression.

pub mod config;
pub mod criteria;
pub mod data;
pub mod engine;
pub mod estimate;
pub mod eval;
pub mod maxmargin;
pub mod tree;

pub use config::CriteriaConfig;
pub use criteria::{Criterion, CriterionError, CriterionKind, StaleScope};
pub use data::{
    apply_merge_map, class_statistics, load_dataset, preprocess, write_dataset, ClassStats,
    DataError, HistogramDataset, WordMap,
};
pub use engine::{
    build_merge_tree, build_random_tree, cut_tree, loss_csv, CachePolicy, EngineConfig,
    EngineError,
};
pub use estimate::{
    gaussian_mle, log_dirichlet_multinomial, multinomial_mle, normal_gamma_log_marginal,
    DirichletHyper, EstimateError, GaussianStats, MultinomialParams, NormalGammaHyper,
};
pub use eval::{
    average_precision, bench, eer, evaluate, gen_synthetic, BenchConfig, CorrelationMode,
    EvalConfig, EvalError, EvalMetrics, EvalReport, SynthConfig,
};
pub use maxmargin::{
    mme_pair_cost, recover_probabilities, solve_binary_svm, taylor_residual, KernelCache,
    MaxMarginError, ProbModel, SvmConfig, SvmSolution,
};
pub use tree::{MergeEvent, MergeTree};
