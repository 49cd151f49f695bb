//! Mutual-information loss between the word variable and the class variable
//! (agglomerative information bottleneck). The joint distribution is the
//! normalized table of per-class column sums; merging two words pools their
//! columns, and the loss is the exact drop in mutual information, which only
//! involves the two columns being pooled.

use crate::config::AibConfig;
use crate::data::{class_statistics, HistogramDataset};

use super::{Criterion, CriterionError, StaleScope};

pub struct InformationLoss {
    c: usize,
    t: usize,
    /// `c x t` joint probabilities `P(class, word)`.
    joint: Vec<f64>,
    /// `t` word marginals `P(word)`.
    marginal: Vec<f64>,
}

impl InformationLoss {
    pub fn new(ds: &HistogramDataset, cfg: &AibConfig) -> Result<Self, CriterionError> {
        let stats = class_statistics(ds);
        let (c, t) = (stats.class_count(), stats.t());
        let mut joint = vec![0.0; c * t];
        for class in 0..c {
            for j in 0..t {
                joint[class * t + j] = if cfg.mean_mode {
                    stats.mean(class, j)
                } else {
                    stats.sum(class, j)
                };
            }
        }
        let total: f64 = joint.iter().sum();
        if !(total > 0.0) {
            return Err(CriterionError::ZeroMass);
        }
        for v in joint.iter_mut() {
            *v /= total;
        }
        let mut marginal = vec![0.0; t];
        for class in 0..c {
            for j in 0..t {
                marginal[j] += joint[class * t + j];
            }
        }
        Ok(Self {
            c,
            t,
            joint,
            marginal,
        })
    }
}

/// `p * ln(p / m)` with the usual `0 ln 0 = 0` convention.
fn plogpm(p: f64, m: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / m).ln()
    }
}

impl Criterion for InformationLoss {
    fn pair_loss(&self, r: usize, s: usize) -> Result<f64, CriterionError> {
        let (m_r, m_s) = (self.marginal[r], self.marginal[s]);
        if m_r == 0.0 || m_s == 0.0 {
            return Ok(0.0);
        }
        let mut loss = 0.0;
        for class in 0..self.c {
            let p_r = self.joint[class * self.t + r];
            let p_s = self.joint[class * self.t + s];
            loss += plogpm(p_r, m_r) + plogpm(p_s, m_s) - plogpm(p_r + p_s, m_r + m_s);
        }
        Ok(loss)
    }

    fn apply_merge(&mut self, keep: usize, drop: usize) -> Result<(), CriterionError> {
        for class in 0..self.c {
            self.joint[class * self.t + keep] += self.joint[class * self.t + drop];
            self.joint[class * self.t + drop] = 0.0;
        }
        self.marginal[keep] += self.marginal[drop];
        self.marginal[drop] = 0.0;
        Ok(())
    }

    fn stale_scope(&self) -> StaleScope {
        StaleScope::TouchedOnly
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CriteriaConfig;

    /// Two samples per class arranged so the class sums are
    /// `[[2, 0, 2], [0, 2, 2]]`.
    fn toy() -> HistogramDataset {
        let counts = vec![
            1.0, 0.0, 1.0, //
            1.0, 0.0, 1.0, //
            0.0, 1.0, 1.0, //
            0.0, 1.0, 1.0, //
        ];
        HistogramDataset::new(counts, 3, &[1, 1, 2, 2]).unwrap()
    }

    #[test]
    fn toy_loss_is_half_ln_two() {
        let crit = InformationLoss::new(&toy(), &AibConfig::default()).unwrap();
        let loss = crit.pair_loss(0, 1).unwrap();
        assert!((loss - 0.5 * 2.0_f64.ln()).abs() < 1e-15, "loss = {loss}");
        assert!((loss - crit.pair_loss(1, 0).unwrap()).abs() < 1e-18);
    }

    #[test]
    fn merging_identically_distributed_words_is_free() {
        let counts = vec![
            2.0, 4.0, 1.0, //
            6.0, 12.0, 5.0, //
        ];
        let ds = HistogramDataset::new(counts, 3, &[0, 1]).unwrap();
        let crit = InformationLoss::new(&ds, &AibConfig::default()).unwrap();
        // columns 0 and 1 are proportional across classes
        assert!(crit.pair_loss(0, 1).unwrap().abs() < 1e-15);
        assert!(crit.pair_loss(0, 2).unwrap() > 1e-3);
    }

    #[test]
    fn losses_are_nonnegative_and_merge_is_consistent() {
        let counts = vec![
            3.0, 1.0, 0.0, 2.0, //
            1.0, 2.0, 1.0, 0.0, //
            0.0, 1.0, 4.0, 1.0, //
            2.0, 0.0, 1.0, 3.0, //
        ];
        let ds = HistogramDataset::new(counts, 4, &[0, 0, 1, 1]).unwrap();
        let mut crit = InformationLoss::new(&ds, &AibConfig::default()).unwrap();
        for r in 0..4 {
            for s in (r + 1)..4 {
                let loss = crit.pair_loss(r, s).unwrap();
                assert!(loss >= 0.0, "loss({r},{s}) = {loss}");
            }
        }
        // after merging (1,2), the loss of (0, 1) matches a dataset where the
        // columns were pooled up front
        crit.apply_merge(1, 2).unwrap();
        let after = crit.pair_loss(0, 1).unwrap();
        let pooled = vec![
            3.0, 1.0, 2.0, //
            1.0, 3.0, 0.0, //
            0.0, 5.0, 1.0, //
            2.0, 1.0, 3.0, //
        ];
        let pooled = HistogramDataset::new(pooled, 3, &[0, 0, 1, 1]).unwrap();
        let direct = InformationLoss::new(&pooled, &AibConfig::default()).unwrap();
        assert!((after - direct.pair_loss(0, 1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn mean_mode_reweights_unbalanced_classes() {
        // class 0 has one sample, class 1 has three identical samples; with
        // means the two classes contribute equally and the larger class no
        // longer dominates the joint
        let counts = vec![
            4.0, 0.0, //
            0.0, 4.0, //
            0.0, 4.0, //
            0.0, 4.0, //
        ];
        let ds = HistogramDataset::new(counts, 2, &[0, 1, 1, 1]).unwrap();
        let sums = InformationLoss::new(&ds, &AibConfig::default()).unwrap();
        let mut cfg = CriteriaConfig::default();
        cfg.aib.mean_mode = true;
        let means = InformationLoss::new(&ds, &cfg.aib).unwrap();
        let loss_sums = sums.pair_loss(0, 1).unwrap();
        let loss_means = means.pair_loss(0, 1).unwrap();
        assert!((loss_sums - loss_means).abs() > 1e-3);
        // under means the joint is [[0.5, 0], [0, 0.5]], a clean one-bit loss
        assert!((loss_means - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_column_costs_nothing() {
        let counts = vec![
            0.0, 1.0, 2.0, //
            0.0, 3.0, 1.0, //
        ];
        let ds = HistogramDataset::new(counts, 3, &[0, 1]).unwrap();
        let crit = InformationLoss::new(&ds, &AibConfig::default()).unwrap();
        assert_eq!(crit.pair_loss(0, 2).unwrap(), 0.0);
        assert_eq!(crit.pair_loss(1, 0).unwrap(), 0.0);
    }
}
