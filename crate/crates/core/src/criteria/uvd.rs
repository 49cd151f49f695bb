//! Univariate-marginal likelihood loss. Each word column is modeled as an
//! independent Gaussian with a Normal-Gamma prior on its mean and precision;
//! a column's evidence is the closed-form marginal likelihood. The score of
//! a merge is the drop in the log evidence ratio between the per-class model
//! and the pooled (class-blind) model.
//!
//! Hyperparameters are resolved once from the initial dataset and stay fixed
//! while the tree is built, so scores of untouched pairs survive merges.

use crate::config::CriteriaConfig;
use crate::data::HistogramDataset;
use crate::estimate::{ng_log_marginal_moments, NormalGammaHyper};

use super::moments::Moments;
use super::{Criterion, CriterionError, StaleScope};

pub struct UnivariateMarginalLoss {
    moments: Moments,
    hyper: NormalGammaHyper,
    /// Cached per-class log marginals, `c x t`.
    class_evidence: Vec<f64>,
    /// Cached pooled log marginals, `t`.
    pooled_evidence: Vec<f64>,
}

impl UnivariateMarginalLoss {
    pub fn new(ds: &HistogramDataset, cfg: &CriteriaConfig) -> Result<Self, CriterionError> {
        let hyper = NormalGammaHyper::from_dataset(ds, &cfg.uvd.ng, cfg.eps_var)?;
        let moments = Moments::new(ds);
        let (c, t) = (moments.class_count(), moments.t());
        let mut class_evidence = vec![0.0; c * t];
        let mut pooled_evidence = vec![0.0; t];
        for j in 0..t {
            for class in 0..c {
                class_evidence[class * t + j] = evidence(&moments, class, j, &hyper);
            }
            pooled_evidence[j] = pooled(&moments, j, &hyper);
        }
        Ok(Self {
            moments,
            hyper,
            class_evidence,
            pooled_evidence,
        })
    }
}

fn evidence(m: &Moments, class: usize, j: usize, hyper: &NormalGammaHyper) -> f64 {
    ng_log_marginal_moments(m.count(class), m.sum(class, j), m.sumsq(class, j), hyper)
}

fn pooled(m: &Moments, j: usize, hyper: &NormalGammaHyper) -> f64 {
    ng_log_marginal_moments(m.n(), m.global_sum(j), m.global_sumsq(j), hyper)
}

impl Criterion for UnivariateMarginalLoss {
    fn pair_loss(&self, r: usize, s: usize) -> Result<f64, CriterionError> {
        let m = &self.moments;
        if m.global_sum(r) == 0.0 || m.global_sum(s) == 0.0 {
            return Ok(0.0);
        }
        let t = m.t();
        let mut loss = 0.0;
        for class in 0..m.class_count() {
            let merged = ng_log_marginal_moments(
                m.count(class),
                m.merged_sum(class, r, s),
                m.merged_sumsq(class, r, s),
                &self.hyper,
            );
            loss += self.class_evidence[class * t + r] + self.class_evidence[class * t + s]
                - merged;
        }
        let merged_pooled = ng_log_marginal_moments(
            m.n(),
            m.merged_global_sum(r, s),
            m.merged_global_sumsq(r, s),
            &self.hyper,
        );
        loss -= self.pooled_evidence[r] + self.pooled_evidence[s] - merged_pooled;
        Ok(loss)
    }

    fn apply_merge(&mut self, keep: usize, drop: usize) -> Result<(), CriterionError> {
        self.moments.merge(keep, drop);
        let t = self.moments.t();
        for class in 0..self.moments.class_count() {
            self.class_evidence[class * t + keep] =
                evidence(&self.moments, class, keep, &self.hyper);
            self.class_evidence[class * t + drop] = 0.0;
        }
        self.pooled_evidence[keep] = pooled(&self.moments, keep, &self.hyper);
        self.pooled_evidence[drop] = 0.0;
        Ok(())
    }

    fn stale_scope(&self) -> StaleScope {
        StaleScope::TouchedOnly
    }
}
