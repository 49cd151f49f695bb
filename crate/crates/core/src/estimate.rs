//! Probabilistic building blocks: multinomial MLE, Dirichlet-multinomial and
//! Normal-Gamma log marginal likelihoods, and per-bin Gaussian MLE.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::NgConfig;
use crate::data::{ClassStats, HistogramDataset};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("smoothing must be finite and non-negative, got {0}")]
    BadSmoothing(f64),
    #[error("class {0} has zero total count and smoothing is zero")]
    ZeroClassTotal(usize),
    #[error("alpha and counts differ in length ({alpha} vs {counts})")]
    LengthMismatch { alpha: usize, counts: usize },
    #[error("alpha[{index}] = {value} is not positive")]
    BadAlpha { index: usize, value: f64 },
    #[error("counts[{index}] = {value} is negative or non-finite")]
    BadCount { index: usize, value: f64 },
    #[error("normal-gamma hyper-parameter {name} = {value} out of range")]
    BadHyper { name: &'static str, value: f64 },
    #[error("value[{index}] is non-finite")]
    NonFiniteValue { index: usize },
    #[error("variance floor must be positive, got {0}")]
    BadEpsVar(f64),
}

/// Natural log of the gamma function.
///
/// Delegates to a Lanczos approximation; accuracy over `[1e-6, 1e6]` is
/// pinned by tests against 22-digit reference values.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Maximum-likelihood multinomial parameters with additive smoothing.
///
/// Conditionals are estimated from class sums: `P(v_j|c)` normalizes
/// `sum_c[j] + smoothing` within class `c`; the unconditional `P(v_j)`
/// normalizes the smoothed sums pooled over classes; `P(c)` is the class
/// frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultinomialParams {
    pub c: usize,
    pub t: usize,
    /// Row-major `c x t`; each row sums to one.
    pub p_word_given_class: Vec<f64>,
    /// Length `t`; sums to one.
    pub p_word: Vec<f64>,
    /// Length `c`; sums to one.
    pub p_class: Vec<f64>,
}

impl MultinomialParams {
    pub fn cond(&self, c: usize, j: usize) -> f64 {
        self.p_word_given_class[c * self.t + j]
    }
}

pub fn multinomial_mle(
    stats: &ClassStats,
    smoothing: f64,
) -> Result<MultinomialParams, EstimateError> {
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(EstimateError::BadSmoothing(smoothing));
    }
    let (c, t) = (stats.class_count(), stats.t());
    let mut p_word_given_class = vec![0.0; c * t];
    for ci in 0..c {
        let total: f64 = (0..t).map(|j| stats.sum(ci, j) + smoothing).sum();
        if total <= 0.0 {
            return Err(EstimateError::ZeroClassTotal(ci));
        }
        for j in 0..t {
            p_word_given_class[ci * t + j] = (stats.sum(ci, j) + smoothing) / total;
        }
    }
    let pooled: Vec<f64> = (0..t)
        .map(|j| stats.global_sum(j) + c as f64 * smoothing)
        .collect();
    let pooled_total: f64 = pooled.iter().sum();
    if pooled_total <= 0.0 {
        return Err(EstimateError::ZeroClassTotal(0));
    }
    let p_word = pooled.iter().map(|v| v / pooled_total).collect();
    let p_class = (0..c)
        .map(|ci| stats.count(ci) as f64 / stats.n() as f64)
        .collect();
    Ok(MultinomialParams {
        c,
        t,
        p_word_given_class,
        p_word,
        p_class,
    })
}

/// Dirichlet prior over word distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletHyper {
    pub alpha: Vec<f64>,
}

impl DirichletHyper {
    pub fn uniform(t: usize, alpha: f64) -> Self {
        Self {
            alpha: vec![alpha; t],
        }
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        for (index, &value) in self.alpha.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(EstimateError::BadAlpha { index, value });
            }
        }
        Ok(())
    }
}

/// Log marginal likelihood of an unordered count vector under a Dirichlet
/// prior: `log B(alpha + counts) - log B(alpha)` where `B` is the
/// multivariate beta function. Non-integer counts are accepted through the
/// gamma continuation.
pub fn log_dirichlet_multinomial(alpha: &[f64], counts: &[f64]) -> Result<f64, EstimateError> {
    if alpha.len() != counts.len() {
        return Err(EstimateError::LengthMismatch {
            alpha: alpha.len(),
            counts: counts.len(),
        });
    }
    let mut per_word = 0.0;
    let mut alpha_total = 0.0;
    let mut count_total = 0.0;
    for (index, (&a, &n)) in alpha.iter().zip(counts).enumerate() {
        if !a.is_finite() || a <= 0.0 {
            return Err(EstimateError::BadAlpha { index, value: a });
        }
        if !n.is_finite() || n < 0.0 {
            return Err(EstimateError::BadCount { index, value: n });
        }
        per_word += ln_gamma(a + n) - ln_gamma(a);
        alpha_total += a;
        count_total += n;
    }
    Ok(per_word - (ln_gamma(alpha_total + count_total) - ln_gamma(alpha_total)))
}

/// Normal-Gamma prior on the mean and precision of one Gaussian bin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalGammaHyper {
    pub mu0: f64,
    pub kappa0: f64,
    pub a: f64,
    pub b: f64,
}

impl NormalGammaHyper {
    pub fn validate(&self) -> Result<(), EstimateError> {
        let checks = [
            ("mu0", self.mu0, self.mu0.is_finite()),
            ("kappa0", self.kappa0, self.kappa0 > 0.0 && self.kappa0.is_finite()),
            ("a", self.a, self.a > 0.0 && self.a.is_finite()),
            ("b", self.b, self.b > 0.0 && self.b.is_finite()),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(EstimateError::BadHyper { name, value });
            }
        }
        Ok(())
    }

    /// Resolves config values, deriving unset ones from the dataset: `mu0`
    /// defaults to the mean of all histogram entries and `b` to the variance
    /// of all entries floored at `eps_var`.
    pub fn from_dataset(
        ds: &HistogramDataset,
        cfg: &NgConfig,
        eps_var: f64,
    ) -> Result<Self, EstimateError> {
        let need_mean = cfg.mu0.is_none();
        let need_var = cfg.b.is_none();
        let (mut mean, mut var) = (0.0, 0.0);
        if need_mean || need_var {
            let total = (ds.n() * ds.t()) as f64;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for i in 0..ds.n() {
                for &v in ds.row(i) {
                    sum += v;
                    sumsq += v * v;
                }
            }
            mean = sum / total;
            var = (sumsq / total - mean * mean).max(0.0);
        }
        let hyper = Self {
            mu0: cfg.mu0.unwrap_or(mean),
            kappa0: cfg.kappa0,
            a: cfg.a,
            b: cfg.b.unwrap_or_else(|| var.max(eps_var)),
        };
        hyper.validate()?;
        Ok(hyper)
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Log marginal likelihood of `values` under a Gaussian with Normal-Gamma
/// prior on its mean and precision. Empty input yields 0.
pub fn normal_gamma_log_marginal(
    values: &[f64],
    hyper: &NormalGammaHyper,
) -> Result<f64, EstimateError> {
    hyper.validate()?;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for (index, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(EstimateError::NonFiniteValue { index });
        }
        sum += v;
        sumsq += v * v;
    }
    Ok(ng_log_marginal_moments(values.len(), sum, sumsq, hyper))
}

/// Same marginal from sufficient statistics `(m, sum, sum of squares)`.
pub(crate) fn ng_log_marginal_moments(
    m: usize,
    sum: f64,
    sumsq: f64,
    hyper: &NormalGammaHyper,
) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let mf = m as f64;
    let mean = sum / mf;
    let ss = (sumsq - sum * mean).max(0.0);
    let kappa_m = hyper.kappa0 + mf;
    let a_m = hyper.a + mf / 2.0;
    let dev = mean - hyper.mu0;
    let b_m = hyper.b + 0.5 * ss + hyper.kappa0 * mf * dev * dev / (2.0 * kappa_m);
    ln_gamma(a_m) - ln_gamma(hyper.a) + hyper.a * hyper.b.ln() - a_m * b_m.ln()
        + 0.5 * (hyper.kappa0.ln() - kappa_m.ln())
        - mf * HALF_LN_2PI
}

/// Per-class and pooled Gaussian MLE parameters of every word column, with
/// variances floored at `eps_var`.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub c: usize,
    pub t: usize,
    pub class_counts: Vec<usize>,
    /// Row-major `c x t`.
    pub class_means: Vec<f64>,
    /// Row-major `c x t`, floored.
    pub class_vars: Vec<f64>,
    pub global_means: Vec<f64>,
    pub global_vars: Vec<f64>,
    pub eps_var: f64,
}

impl GaussianStats {
    pub fn class_mean(&self, c: usize, j: usize) -> f64 {
        self.class_means[c * self.t + j]
    }

    pub fn class_var(&self, c: usize, j: usize) -> f64 {
        self.class_vars[c * self.t + j]
    }
}

pub fn gaussian_mle(ds: &HistogramDataset, eps_var: f64) -> Result<GaussianStats, EstimateError> {
    if !eps_var.is_finite() || eps_var <= 0.0 {
        return Err(EstimateError::BadEpsVar(eps_var));
    }
    let stats = crate::data::class_statistics(ds);
    let (c, t, n) = (stats.class_count(), stats.t(), stats.n() as f64);
    let mut class_means = vec![0.0; c * t];
    let mut class_vars = vec![0.0; c * t];
    let mut global_means = vec![0.0; t];
    let mut global_vars = vec![0.0; t];
    for j in 0..t {
        let mut sumsq = 0.0;
        for ci in 0..c {
            let nc = stats.count(ci) as f64;
            let mean = stats.sum(ci, j) / nc;
            let var = (stats.sumsq(ci, j) / nc - mean * mean).max(0.0);
            class_means[ci * t + j] = mean;
            class_vars[ci * t + j] = var.max(eps_var);
            sumsq += stats.sumsq(ci, j);
        }
        let mean = stats.global_sum(j) / n;
        global_means[j] = mean;
        global_vars[j] = (sumsq / n - mean * mean).max(0.0).max(eps_var);
    }
    Ok(GaussianStats {
        c,
        t,
        class_counts: (0..c).map(|ci| stats.count(ci)).collect(),
        class_means,
        class_vars,
        global_means,
        global_vars,
        eps_var,
    })
}
