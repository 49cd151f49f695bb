//! Scatter-based class separability. A candidate merge is scored by the
//! ratio `tr(S_w) / tr(S_t)` of within-class to total scatter that the
//! dataset would have after pooling the two columns; smaller means the
//! remaining dimensions separate the classes better.
//!
//! Traces only need per-column variances, so per-class first and second
//! moments plus the pairwise cross products determine every candidate score
//! without touching the raw rows. Note the denominator changes with every
//! applied merge, so previously computed scores of untouched pairs go stale.

use crate::data::HistogramDataset;

use super::moments::Moments;
use super::{Criterion, CriterionError, StaleScope};

pub struct ScatterRatio {
    moments: Moments,
    /// Current within-class trace over live columns.
    within: f64,
    /// Current total trace over live columns.
    total: f64,
    /// `tr(S_t)` of the initial dataset; sets the degeneracy scale.
    initial_total: f64,
}

impl ScatterRatio {
    pub fn new(ds: &HistogramDataset) -> Result<Self, CriterionError> {
        let moments = Moments::new(ds);
        let mut within = 0.0;
        let mut total = 0.0;
        for j in 0..moments.t() {
            within += within_term(&moments, j);
            total += total_term(&moments, j);
        }
        if !(total > 0.0) {
            return Err(CriterionError::DegenerateScatter(total));
        }
        Ok(Self {
            moments,
            within,
            total,
            initial_total: total,
        })
    }

    fn degenerate_threshold(&self) -> f64 {
        1e-10 * self.initial_total
    }

    /// Within and total trace contributions of the column `r + s`.
    fn merged_terms(&self, r: usize, s: usize) -> (f64, f64) {
        let m = &self.moments;
        let mut w = 0.0;
        for class in 0..m.class_count() {
            let count = m.count(class) as f64;
            if count == 0.0 {
                continue;
            }
            let sum = m.merged_sum(class, r, s);
            w += m.merged_sumsq(class, r, s) - sum * sum / count;
        }
        let gsum = m.merged_global_sum(r, s);
        let t = m.merged_global_sumsq(r, s) - gsum * gsum / m.n() as f64;
        (w, t)
    }
}

/// `sum_c (q_cj - s_cj^2 / n_c)`: within-class squared deviation of column j.
fn within_term(m: &Moments, j: usize) -> f64 {
    let mut w = 0.0;
    for class in 0..m.class_count() {
        let count = m.count(class) as f64;
        if count == 0.0 {
            continue;
        }
        let sum = m.sum(class, j);
        w += m.sumsq(class, j) - sum * sum / count;
    }
    w
}

/// `Q_j - g_j^2 / n`: total squared deviation of column j.
fn total_term(m: &Moments, j: usize) -> f64 {
    let sum = m.global_sum(j);
    m.global_sumsq(j) - sum * sum / m.n() as f64
}

impl Criterion for ScatterRatio {
    fn pair_loss(&self, r: usize, s: usize) -> Result<f64, CriterionError> {
        if self.moments.global_sum(r) == 0.0 || self.moments.global_sum(s) == 0.0 {
            return Ok(0.0);
        }
        let (w_merged, t_merged) = self.merged_terms(r, s);
        let num = self.within - within_term(&self.moments, r) - within_term(&self.moments, s)
            + w_merged;
        let den =
            self.total - total_term(&self.moments, r) - total_term(&self.moments, s) + t_merged;
        if den <= self.degenerate_threshold() {
            return Err(CriterionError::DegenerateScatter(den));
        }
        Ok(num / den)
    }

    fn apply_merge(&mut self, keep: usize, drop: usize) -> Result<(), CriterionError> {
        let (w_merged, t_merged) = self.merged_terms(keep, drop);
        self.within += w_merged
            - within_term(&self.moments, keep)
            - within_term(&self.moments, drop);
        self.total +=
            t_merged - total_term(&self.moments, keep) - total_term(&self.moments, drop);
        self.moments.merge(keep, drop);
        Ok(())
    }

    fn stale_scope(&self) -> StaleScope {
        StaleScope::All
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{apply_merge_map, WordMap};

    fn fixture() -> HistogramDataset {
        let counts = vec![
            3.0, 1.0, 0.0, 2.0, //
            2.0, 2.0, 1.0, 1.0, //
            0.0, 1.0, 4.0, 0.0, //
            1.0, 0.0, 3.0, 1.0, //
            0.5, 1.5, 2.0, 0.5, //
        ];
        HistogramDataset::new(counts, 4, &[0, 0, 1, 1, 1]).unwrap()
    }

    /// Recomputes tr(S_w)/tr(S_t) from the raw rows via centered sums.
    fn direct_ratio(ds: &HistogramDataset) -> f64 {
        let stats = crate::data::class_statistics(ds);
        let (mut within, mut total) = (0.0, 0.0);
        for j in 0..ds.t() {
            for i in 0..ds.n() {
                let v = ds.value(i, j);
                let cm = stats.mean(ds.label(i), j);
                within += (v - cm) * (v - cm);
                let gm = stats.global_mean(j);
                total += (v - gm) * (v - gm);
            }
        }
        within / total
    }

    #[test]
    fn loss_equals_ratio_of_merged_dataset() {
        let ds = fixture();
        let crit = ScatterRatio::new(&ds).unwrap();
        for (r, s, map, k) in [
            (0, 1, vec![0, 0, 1, 2], 3),
            (1, 3, vec![0, 1, 2, 1], 3),
            (2, 3, vec![0, 1, 2, 2], 3),
        ] {
            let loss = crit.pair_loss(r, s).unwrap();
            let merged = apply_merge_map(&ds, &WordMap::new(map, k).unwrap()).unwrap();
            let want = direct_ratio(&merged);
            assert!((loss - want).abs() < 1e-12, "pair ({r},{s}): {loss} vs {want}");
            assert!((0.0..=1.0 + 1e-12).contains(&loss));
        }
    }

    #[test]
    fn applied_merges_keep_traces_consistent() {
        let ds = fixture();
        let mut crit = ScatterRatio::new(&ds).unwrap();
        crit.apply_merge(0, 2).unwrap();
        let loss = crit.pair_loss(1, 3).unwrap();
        // pool columns (0,2) then (1,3)
        let map = WordMap::new(vec![0, 1, 0, 1], 2).unwrap();
        let merged = apply_merge_map(&ds, &map).unwrap();
        assert!((loss - direct_ratio(&merged)).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let counts = vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let ds = HistogramDataset::new(counts, 2, &[0, 1, 1]).unwrap();
        assert!(matches!(
            ScatterRatio::new(&ds),
            Err(CriterionError::DegenerateScatter(_))
        ));
    }

    #[test]
    fn zero_mass_column_costs_nothing() {
        let counts = vec![
            0.0, 1.0, 2.0, //
            0.0, 3.0, 1.0, //
            0.0, 0.5, 4.0, //
        ];
        let ds = HistogramDataset::new(counts, 3, &[0, 1, 1]).unwrap();
        let crit = ScatterRatio::new(&ds).unwrap();
        assert_eq!(crit.pair_loss(0, 1).unwrap(), 0.0);
        assert_eq!(crit.pair_loss(2, 0).unwrap(), 0.0);
    }
}
