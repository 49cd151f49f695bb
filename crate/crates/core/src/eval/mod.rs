//! Held-out evaluation of codebook cuts: a synthetic two-class corpus
//! generator, ranking metrics, a single train/test scorer, and a sweep
//! harness that compares criteria across codebook sizes and seeds.

mod bench;
mod metrics;
mod synth;

pub use bench::{bench, BenchConfig, BenchRow, EvalReport, SummaryRow};
pub use metrics::{accuracy, average_precision, eer};
pub use synth::{gen_synthetic, CorrelationMode, SynthConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ClassifierKind;
use crate::data::{apply_merge_map, DataError, HistogramDataset, WordMap};
use crate::maxmargin::{solve_binary_svm, KernelCache, MaxMarginError, SvmConfig};

/// Classifier selection and SVM settings used by [`evaluate`].
pub type EvalConfig = crate::config::EvalParams;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("bad synthesis config: {0}")]
    BadSynthConfig(String),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    MaxMargin(#[from] MaxMarginError),
}

/// Held-out classification quality of one codebook cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub ap: f64,
    pub eer: f64,
}

/// Compresses both datasets with `map`, trains the configured classifier on
/// the training set, and scores the test set. Both datasets must carry the
/// same two class labels.
pub fn evaluate(
    train: &HistogramDataset,
    test: &HistogramDataset,
    map: &WordMap,
    cfg: &EvalConfig,
) -> Result<EvalMetrics, EvalError> {
    let train = apply_merge_map(train, map)?;
    let test = apply_merge_map(test, map)?;
    if train.class_count() != 2 {
        return Err(EvalError::Shape(format!(
            "training set has {} classes, need 2",
            train.class_count()
        )));
    }
    if test.class_count() != 2 || (0..2).any(|c| train.class_label(c) != test.class_label(c)) {
        return Err(EvalError::Shape(
            "test labels do not match the training labels".into(),
        ));
    }
    let y_train = train.signed_labels()?;
    let y_test = test.signed_labels()?;
    let scores = match cfg.classifier {
        ClassifierKind::Svm => svm_scores(&train, &test, &y_train, cfg)?,
        ClassifierKind::Centroid => centroid_scores(&train, &test, &y_train),
    };
    Ok(EvalMetrics {
        accuracy: accuracy(&scores, &y_test),
        ap: average_precision(&scores, &y_test)?,
        eer: eer(&scores, &y_test)?,
    })
}

fn svm_scores(
    train: &HistogramDataset,
    test: &HistogramDataset,
    y_train: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<f64>, EvalError> {
    let columns: Vec<Vec<f64>> = (0..train.t()).map(|j| train.column(j)).collect();
    let kernel = KernelCache::from_columns(&columns, train.n());
    let svm_cfg = SvmConfig {
        slack_penalty: cfg.slack_penalty,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    };
    let solution = solve_binary_svm(&columns, &kernel, y_train, &svm_cfg)?;
    Ok((0..test.n())
        .map(|i| {
            let dot: f64 = test.row(i).iter().zip(&solution.w).map(|(h, w)| h * w).sum();
            dot + solution.b
        })
        .collect())
}

/// Nearest-class-mean scores via the linear expansion of the squared
/// distance gap, positive when a row lies closer to the positive centroid.
fn centroid_scores(train: &HistogramDataset, test: &HistogramDataset, y_train: &[f64]) -> Vec<f64> {
    let t = train.t();
    let mut mean_pos = vec![0.0; t];
    let mut mean_neg = vec![0.0; t];
    let (mut n_pos, mut n_neg) = (0.0f64, 0.0f64);
    for i in 0..train.n() {
        let (mean, count) = if y_train[i] > 0.0 {
            (&mut mean_pos, &mut n_pos)
        } else {
            (&mut mean_neg, &mut n_neg)
        };
        *count += 1.0;
        for (m, v) in mean.iter_mut().zip(train.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean_pos {
        *m /= n_pos;
    }
    for m in &mut mean_neg {
        *m /= n_neg;
    }
    let offset: f64 = mean_neg.iter().map(|m| m * m).sum::<f64>()
        - mean_pos.iter().map(|m| m * m).sum::<f64>();
    (0..test.n())
        .map(|i| {
            let swing: f64 = test
                .row(i)
                .iter()
                .zip(mean_pos.iter().zip(&mean_neg))
                .map(|(h, (p, q))| 2.0 * h * (p - q))
                .sum();
            offset + swing
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EvalParams;

    fn identity_map(t: usize) -> WordMap {
        WordMap::new((0..t).collect(), t).unwrap()
    }

    fn separable_fixture() -> HistogramDataset {
        let counts = vec![
            5.0, 1.0, 2.0, //
            4.0, 0.0, 3.0, //
            1.0, 5.0, 2.0, //
            0.0, 4.0, 3.0, //
        ];
        HistogramDataset::new(counts, 3, &[1, 1, 2, 2]).unwrap()
    }

    #[test]
    fn separable_data_is_memorized() {
        let ds = separable_fixture();
        let map = identity_map(3);
        for classifier in [ClassifierKind::Svm, ClassifierKind::Centroid] {
            let cfg = EvalParams {
                classifier,
                ..EvalParams::default()
            };
            let m = evaluate(&ds, &ds, &map, &cfg).unwrap();
            assert_eq!(m.accuracy, 1.0, "{classifier:?}");
            assert_eq!(m.ap, 1.0, "{classifier:?}");
            assert_eq!(m.eer, 0.0, "{classifier:?}");
        }
    }

    #[test]
    fn premerged_data_matches_the_merge_map() {
        let ds = separable_fixture();
        let map = WordMap::new(vec![0, 1, 0], 2).unwrap();
        let merged = apply_merge_map(&ds, &map).unwrap();
        let cfg = EvalParams {
            classifier: ClassifierKind::Centroid,
            ..EvalParams::default()
        };
        let via_map = evaluate(&ds, &ds, &map, &cfg).unwrap();
        let premerged = evaluate(&merged, &merged, &identity_map(2), &cfg).unwrap();
        assert_eq!(via_map, premerged);
    }

    #[test]
    fn label_mismatches_are_rejected() {
        let train = separable_fixture();
        let test = HistogramDataset::new(
            vec![5.0, 1.0, 2.0, 1.0, 5.0, 2.0],
            3,
            &[1, 3], // label 3 never seen in training
        )
        .unwrap();
        let err = evaluate(&train, &test, &identity_map(3), &EvalParams::default());
        assert!(matches!(err, Err(EvalError::Shape(_))));

        let three = HistogramDataset::new(
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            3,
            &[1, 2, 3],
        )
        .unwrap();
        let err = evaluate(&three, &three, &identity_map(3), &EvalParams::default());
        assert!(matches!(err, Err(EvalError::Shape(_))));
    }

    #[test]
    fn centroid_scores_pick_the_nearer_mean() {
        let ds = separable_fixture();
        let y = ds.signed_labels().unwrap();
        let scores = centroid_scores(&ds, &ds, &y);
        // positive mean is (4.5, 0.5, 2.5), negative (0.5, 4.5, 2.5)
        for (i, &score) in scores.iter().enumerate() {
            assert_eq!(score > 0.0, y[i] > 0.0, "row {i} score {score}");
        }
    }
}
