//! Gaussian maximum-likelihood loss. Each column is modeled as a Gaussian
//! fit by maximum likelihood, once per class and once pooled; a column's
//! score is the log-likelihood advantage of the class-aware fit, which only
//! depends on the fitted variances. The score of a merge is the advantage
//! lost by pooling the two columns.
//!
//! Variances are floored at `eps_var` so constant columns stay finite. The
//! per-column advantage is non-negative; the loss of a merge may be negative
//! when the pooled column separates the classes better than its parts.

use crate::data::HistogramDataset;

use super::moments::Moments;
use super::{Criterion, CriterionError, StaleScope};

pub struct GaussianLikelihoodLoss {
    moments: Moments,
    eps_var: f64,
    /// Cached per-column advantage `J_j`.
    advantage: Vec<f64>,
}

impl GaussianLikelihoodLoss {
    pub fn new(ds: &HistogramDataset, eps_var: f64) -> Result<Self, CriterionError> {
        if !(eps_var > 0.0) || !eps_var.is_finite() {
            return Err(CriterionError::BadConfig(format!(
                "eps_var must be positive and finite, got {eps_var}"
            )));
        }
        let moments = Moments::new(ds);
        let advantage = (0..moments.t())
            .map(|j| {
                column_advantage(&moments, eps_var, |class| {
                    (moments.sum(class, j), moments.sumsq(class, j))
                })
            })
            .collect();
        Ok(Self {
            moments,
            eps_var,
            advantage,
        })
    }

    fn merged_advantage(&self, r: usize, s: usize) -> f64 {
        column_advantage(&self.moments, self.eps_var, |class| {
            (
                self.moments.merged_sum(class, r, s),
                self.moments.merged_sumsq(class, r, s),
            )
        })
    }
}

/// Maximum-likelihood variance from a sum and sum of squares, floored.
fn floored_var(count: f64, sum: f64, sumsq: f64, eps_var: f64) -> f64 {
    let mean = sum / count;
    (sumsq / count - mean * mean).max(eps_var)
}

/// `J_j = (n/2) ln var_j - sum_c (n_c/2) ln var_cj`, where `class_moments`
/// yields the (sum, sumsq) of the column restricted to one class. The pooled
/// moments are accumulated from the same closure so that a dead partner slot
/// contributes exactly nothing.
fn column_advantage(
    m: &Moments,
    eps_var: f64,
    class_moments: impl Fn(usize) -> (f64, f64),
) -> f64 {
    let mut advantage = 0.0;
    let (mut gsum, mut gsumsq) = (0.0, 0.0);
    for class in 0..m.class_count() {
        let count = m.count(class) as f64;
        if count == 0.0 {
            continue;
        }
        let (sum, sumsq) = class_moments(class);
        gsum += sum;
        gsumsq += sumsq;
        advantage -= 0.5 * count * floored_var(count, sum, sumsq, eps_var).ln();
    }
    let n = m.n() as f64;
    advantage + 0.5 * n * floored_var(n, gsum, gsumsq, eps_var).ln()
}

impl Criterion for GaussianLikelihoodLoss {
    fn pair_loss(&self, r: usize, s: usize) -> Result<f64, CriterionError> {
        if self.moments.global_sum(r) == 0.0 || self.moments.global_sum(s) == 0.0 {
            return Ok(0.0);
        }
        Ok(self.advantage[r] + self.advantage[s] - self.merged_advantage(r, s))
    }

    fn apply_merge(&mut self, keep: usize, drop: usize) -> Result<(), CriterionError> {
        self.moments.merge(keep, drop);
        self.advantage[keep] = column_advantage(&self.moments, self.eps_var, |class| {
            (self.moments.sum(class, keep), self.moments.sumsq(class, keep))
        });
        self.advantage[drop] = 0.0;
        Ok(())
    }

    fn stale_scope(&self) -> StaleScope {
        StaleScope::TouchedOnly
    }
}
