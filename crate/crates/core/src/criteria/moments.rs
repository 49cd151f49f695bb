//! First and second moments of the current word columns, per class and
//! pooled, including all pairwise cross products. Criteria that score merges
//! through means and variances (scatter, Gaussian likelihoods, marginal
//! likelihoods) read merged-column statistics from here in O(1) and the
//! structure updates itself additively when a merge is applied.

use crate::data::HistogramDataset;

#[derive(Debug, Clone)]
pub struct Moments {
    c: usize,
    t: usize,
    n: usize,
    class_counts: Vec<usize>,
    /// `c x t`: per-class column sums.
    sums: Vec<f64>,
    /// `c x t x t`: per-class cross products `sum_i h_ij h_ik`; the diagonal
    /// holds the per-class sums of squares.
    cross: Vec<f64>,
    /// `t`: pooled column sums.
    global_sums: Vec<f64>,
    /// `t x t`: pooled cross products.
    global_cross: Vec<f64>,
}

impl Moments {
    pub fn new(ds: &HistogramDataset) -> Self {
        let (n, t, c) = (ds.n(), ds.t(), ds.class_count());
        let mut sums = vec![0.0; c * t];
        let mut cross = vec![0.0; c * t * t];
        let mut global_sums = vec![0.0; t];
        let mut global_cross = vec![0.0; t * t];
        let mut class_counts = vec![0usize; c];
        for i in 0..n {
            let row = ds.row(i);
            let class = ds.label(i);
            class_counts[class] += 1;
            let csums = &mut sums[class * t..(class + 1) * t];
            let ccross = &mut cross[class * t * t..(class + 1) * t * t];
            for j in 0..t {
                let v = row[j];
                csums[j] += v;
                global_sums[j] += v;
                if v == 0.0 {
                    continue;
                }
                for k in 0..t {
                    let p = v * row[k];
                    ccross[j * t + k] += p;
                    global_cross[j * t + k] += p;
                }
            }
        }
        Self {
            c,
            t,
            n,
            class_counts,
            sums,
            cross,
            global_sums,
            global_cross,
        }
    }

    pub fn class_count(&self) -> usize {
        self.c
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, class: usize) -> usize {
        self.class_counts[class]
    }

    pub fn sum(&self, class: usize, j: usize) -> f64 {
        self.sums[class * self.t + j]
    }

    pub fn cross(&self, class: usize, j: usize, k: usize) -> f64 {
        self.cross[class * self.t * self.t + j * self.t + k]
    }

    pub fn sumsq(&self, class: usize, j: usize) -> f64 {
        self.cross(class, j, j)
    }

    pub fn global_sum(&self, j: usize) -> f64 {
        self.global_sums[j]
    }

    pub fn global_cross(&self, j: usize, k: usize) -> f64 {
        self.global_cross[j * self.t + k]
    }

    pub fn global_sumsq(&self, j: usize) -> f64 {
        self.global_cross(j, j)
    }

    /// Sum of the column that merging `r` and `s` would produce.
    pub fn merged_sum(&self, class: usize, r: usize, s: usize) -> f64 {
        self.sum(class, r) + self.sum(class, s)
    }

    /// Sum of squares of the merged column: `q_r + q_s + 2 x_rs`.
    pub fn merged_sumsq(&self, class: usize, r: usize, s: usize) -> f64 {
        self.sumsq(class, r) + self.sumsq(class, s) + 2.0 * self.cross(class, r, s)
    }

    pub fn merged_global_sum(&self, r: usize, s: usize) -> f64 {
        self.global_sum(r) + self.global_sum(s)
    }

    pub fn merged_global_sumsq(&self, r: usize, s: usize) -> f64 {
        self.global_sumsq(r) + self.global_sumsq(s) + 2.0 * self.global_cross(r, s)
    }

    /// Folds slot `drop` into slot `keep`; `drop`'s rows and columns become
    /// zero so later queries on dead slots read as empty.
    pub fn merge(&mut self, keep: usize, drop: usize) {
        assert_ne!(keep, drop);
        let t = self.t;
        for class in 0..self.c {
            let base = class * t * t;
            let diag = self.merged_sumsq(class, keep, drop);
            for j in 0..t {
                if j == keep || j == drop {
                    continue;
                }
                let v = self.cross[base + keep * t + j] + self.cross[base + drop * t + j];
                self.cross[base + keep * t + j] = v;
                self.cross[base + j * t + keep] = v;
            }
            self.cross[base + keep * t + keep] = diag;
            for j in 0..t {
                self.cross[base + drop * t + j] = 0.0;
                self.cross[base + j * t + drop] = 0.0;
            }
            self.sums[class * t + keep] += self.sums[class * t + drop];
            self.sums[class * t + drop] = 0.0;
        }
        let diag = self.merged_global_sumsq(keep, drop);
        for j in 0..t {
            if j == keep || j == drop {
                continue;
            }
            let v = self.global_cross[keep * t + j] + self.global_cross[drop * t + j];
            self.global_cross[keep * t + j] = v;
            self.global_cross[j * t + keep] = v;
        }
        self.global_cross[keep * t + keep] = diag;
        for j in 0..t {
            self.global_cross[drop * t + j] = 0.0;
            self.global_cross[j * t + drop] = 0.0;
        }
        self.global_sums[keep] += self.global_sums[drop];
        self.global_sums[drop] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::apply_merge_map;
    use crate::data::WordMap;

    fn fixture() -> HistogramDataset {
        let counts = vec![
            1.0, 2.0, 0.0, 3.0, //
            0.5, 1.0, 2.0, 0.0, //
            2.0, 0.0, 1.0, 1.0, //
            1.5, 2.5, 0.5, 2.0, //
            0.0, 1.0, 3.0, 0.5, //
        ];
        HistogramDataset::new(counts, 4, &[0, 0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn matches_direct_computation() {
        let ds = fixture();
        let m = Moments::new(&ds);
        assert_eq!(m.count(0), 2);
        assert_eq!(m.count(1), 3);
        // class 0, cross of columns 1 and 3: 2*3 + 1*0
        assert!((m.cross(0, 1, 3) - 6.0).abs() < 1e-12);
        // global sumsq of column 2: 0 + 4 + 1 + 0.25 + 9
        assert!((m.global_sumsq(2) - 14.25).abs() < 1e-12);
        assert!((m.global_sum(0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn merge_matches_statistics_of_merged_dataset() {
        let ds = fixture();
        let mut m = Moments::new(&ds);
        let predicted_sumsq: Vec<f64> = (0..2).map(|c| m.merged_sumsq(c, 1, 2)).collect();
        m.merge(1, 2);

        // columns 1 and 2 summed into cluster 1, others keep their order
        let map = WordMap::new(vec![0, 1, 1, 2], 3).unwrap();
        let merged = apply_merge_map(&ds, &map).unwrap();
        let direct = Moments::new(&merged);
        for class in 0..2 {
            assert!((m.sum(class, 0) - direct.sum(class, 0)).abs() < 1e-12);
            assert!((m.sum(class, 1) - direct.sum(class, 1)).abs() < 1e-12);
            assert!((m.sum(class, 3) - direct.sum(class, 2)).abs() < 1e-12);
            assert!((m.sumsq(class, 1) - direct.sumsq(class, 1)).abs() < 1e-12);
            assert!((m.cross(class, 0, 1) - direct.cross(class, 0, 1)).abs() < 1e-12);
            assert!((m.cross(class, 1, 3) - direct.cross(class, 1, 2)).abs() < 1e-12);
            assert!((predicted_sumsq[class] - direct.sumsq(class, 1)).abs() < 1e-12);
        }
        assert!((m.global_cross(1, 3) - direct.global_cross(1, 2)).abs() < 1e-12);
        // dead slot reads as empty
        assert_eq!(m.sum(0, 2), 0.0);
        assert_eq!(m.global_sumsq(2), 0.0);
    }
}
