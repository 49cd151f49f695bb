//! Multinomial likelihood loss. Histograms of a class are pooled into one
//! count vector modeled by a Dirichlet-compound multinomial; the score of a
//! merge is the drop in the log evidence ratio between the per-class and the
//! pooled model. All terms that do not involve the two candidate columns
//! cancel, so a pair is scored with a handful of log-gamma evaluations.
//!
//! Merged columns normally inherit the sum of their parents' Dirichlet
//! pseudocounts, which keeps the total pseudocount invariant and cached pair
//! scores valid. With `keep_uniform` the merged column restarts at the base
//! pseudocount; the total then shrinks at every merge and all cached scores
//! go stale.

use crate::config::MltConfig;
use crate::data::{class_statistics, HistogramDataset};
use crate::estimate::ln_gamma;

use super::{Criterion, CriterionError, StaleScope};

pub struct MultinomialLikelihoodLoss {
    c: usize,
    t: usize,
    /// `c x t` per-class pooled counts.
    class_sums: Vec<f64>,
    /// `t` overall pooled counts.
    global_sums: Vec<f64>,
    /// Per-class total count mass; invariant under merges.
    class_mass: Vec<f64>,
    global_mass: f64,
    /// Per-slot Dirichlet pseudocounts.
    alphas: Vec<f64>,
    /// Total pseudocount over live slots.
    total_alpha: f64,
    /// Base pseudocount; merged slots restart here under `keep_uniform`.
    alpha0: f64,
    keep_uniform: bool,
}

impl MultinomialLikelihoodLoss {
    pub fn new(ds: &HistogramDataset, cfg: &MltConfig) -> Result<Self, CriterionError> {
        if !(cfg.alpha > 0.0) || !cfg.alpha.is_finite() {
            return Err(CriterionError::BadConfig(format!(
                "mlt.alpha must be positive and finite, got {}",
                cfg.alpha
            )));
        }
        let stats = class_statistics(ds);
        let (c, t) = (stats.class_count(), stats.t());
        let mut class_sums = vec![0.0; c * t];
        let mut global_sums = vec![0.0; t];
        let mut class_mass = vec![0.0; c];
        for class in 0..c {
            for j in 0..t {
                let v = stats.sum(class, j);
                class_sums[class * t + j] = v;
                class_mass[class] += v;
                global_sums[j] += v;
            }
        }
        let global_mass: f64 = class_mass.iter().sum();
        if !(global_mass > 0.0) {
            return Err(CriterionError::ZeroMass);
        }
        Ok(Self {
            c,
            t,
            class_sums,
            global_sums,
            class_mass,
            global_mass,
            alphas: vec![cfg.alpha; t],
            total_alpha: cfg.alpha * t as f64,
            alpha0: cfg.alpha,
            keep_uniform: cfg.keep_uniform,
        })
    }

    fn merged_alpha(&self, r: usize, s: usize) -> f64 {
        if self.keep_uniform {
            self.alpha0
        } else {
            self.alphas[r] + self.alphas[s]
        }
    }

    /// Contribution of one count group (a class or the pool) to the loss:
    /// the group's log evidence before the merge minus after.
    fn group_delta(&self, r: usize, s: usize, n_r: f64, n_s: f64, mass: f64) -> f64 {
        let (a_r, a_s) = (self.alphas[r], self.alphas[s]);
        let a_m = self.merged_alpha(r, s);
        let mut delta = ln_gamma(a_r + n_r) - ln_gamma(a_r) + ln_gamma(a_s + n_s)
            - ln_gamma(a_s)
            - (ln_gamma(a_m + n_r + n_s) - ln_gamma(a_m));
        if self.keep_uniform {
            // the total pseudocount shrinks, so the normalizers no longer
            // cancel between before and after
            let before = self.total_alpha;
            let after = self.total_alpha - a_r - a_s + a_m;
            delta -= ln_gamma(before + mass) - ln_gamma(before);
            delta += ln_gamma(after + mass) - ln_gamma(after);
        }
        delta
    }
}

impl Criterion for MultinomialLikelihoodLoss {
    fn pair_loss(&self, r: usize, s: usize) -> Result<f64, CriterionError> {
        if self.global_sums[r] == 0.0 || self.global_sums[s] == 0.0 {
            return Ok(0.0);
        }
        let mut loss = 0.0;
        for class in 0..self.c {
            let n_r = self.class_sums[class * self.t + r];
            let n_s = self.class_sums[class * self.t + s];
            loss += self.group_delta(r, s, n_r, n_s, self.class_mass[class]);
        }
        loss -= self.group_delta(
            r,
            s,
            self.global_sums[r],
            self.global_sums[s],
            self.global_mass,
        );
        Ok(loss)
    }

    fn apply_merge(&mut self, keep: usize, drop: usize) -> Result<(), CriterionError> {
        for class in 0..self.c {
            self.class_sums[class * self.t + keep] += self.class_sums[class * self.t + drop];
            self.class_sums[class * self.t + drop] = 0.0;
        }
        self.global_sums[keep] += self.global_sums[drop];
        self.global_sums[drop] = 0.0;
        let merged = self.merged_alpha(keep, drop);
        self.total_alpha += merged - self.alphas[keep] - self.alphas[drop];
        self.alphas[keep] = merged;
        self.alphas[drop] = 0.0;
        Ok(())
    }

    fn stale_scope(&self) -> StaleScope {
        if self.keep_uniform {
            StaleScope::All
        } else {
            StaleScope::TouchedOnly
        }
    }
}
