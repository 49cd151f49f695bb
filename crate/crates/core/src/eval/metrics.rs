//! Ranking metrics over signed labels: accuracy at the sign threshold,
//! average precision from the all-thresholds precision-recall summation with
//! tied scores handled as atomic blocks, and the equal error rate read off a
//! linearly interpolated ROC walk.

use super::EvalError;

/// Fraction of samples whose score sign matches the label; a score of
/// exactly 0 predicts the positive class.
pub fn accuracy(scores: &[f64], labels: &[f64]) -> f64 {
    debug_assert_eq!(scores.len(), labels.len());
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|&(&score, &y)| if score >= 0.0 { y > 0.0 } else { y < 0.0 })
        .count();
    hits as f64 / scores.len().max(1) as f64
}

/// Distinct score thresholds in descending order, with the number of
/// positives and negatives tied at each.
fn threshold_blocks(scores: &[f64], labels: &[f64]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut blocks: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let (score, positive) = (scores[i], labels[i] > 0.0);
        match blocks.last_mut() {
            Some((s, pos, neg)) if *s == score => {
                if positive {
                    *pos += 1;
                } else {
                    *neg += 1;
                }
            }
            _ => blocks.push((score, positive as usize, !positive as usize)),
        }
    }
    blocks
}

fn check_both_classes(labels: &[f64]) -> Result<(usize, usize), EvalError> {
    let npos = labels.iter().filter(|&&y| y > 0.0).count();
    let nneg = labels.len() - npos;
    if npos == 0 || nneg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((npos, nneg))
}

/// Area under the precision-recall curve: at each distinct threshold the
/// tied block enters atomically and contributes its recall increment times
/// the precision after the block. Constant scores therefore yield the
/// positive prevalence.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64, EvalError> {
    let (npos, _) = check_both_classes(labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut ap = 0.0;
    for (_, pos, neg) in threshold_blocks(scores, labels) {
        tp += pos;
        fp += neg;
        if pos > 0 {
            ap += (pos as f64 / npos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    // the recall increments sum to 1 only up to rounding; a perfect ranking
    // must report exactly 1, not 1 plus an ulp
    Ok(ap.min(1.0))
}

/// Equal error rate: the common value of the false-positive and
/// false-negative rates where the two cross on the ROC walk, linearly
/// interpolated between adjacent thresholds.
pub fn eer(scores: &[f64], labels: &[f64]) -> Result<f64, EvalError> {
    let (npos, nneg) = check_both_classes(labels)?;
    // walk from "predict nothing positive" (fpr 0, fnr 1) downward
    let mut fpr_prev = 0.0;
    let mut fnr_prev = 1.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (_, pos, neg) in threshold_blocks(scores, labels) {
        tp += pos;
        fp += neg;
        let fpr = fp as f64 / nneg as f64;
        let fnr = (npos - tp) as f64 / npos as f64;
        if fnr <= fpr {
            // crossing happened inside this segment
            let d_prev = fnr_prev - fpr_prev;
            let d_cur = fnr - fpr;
            if d_prev == d_cur {
                return Ok(fpr);
            }
            let t = d_prev / (d_prev - d_cur);
            return Ok(fpr_prev + t * (fpr - fpr_prev));
        }
        fpr_prev = fpr;
        fnr_prev = fnr;
    }
    // fnr reaches 0 and fpr reaches 1 at the end of the walk, so the
    // crossing always occurs
    unreachable!("ROC walk must cross the diagonal");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts_sign_matches() {
        let scores = [2.0, -1.0, 0.0, -0.5];
        let labels = [1.0, -1.0, -1.0, 1.0];
        assert!((accuracy(&scores, &labels) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separated_scores_are_perfect() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1.0, 1.0, -1.0, -1.0];
        assert_eq!(average_precision(&scores, &labels).unwrap(), 1.0);
        assert_eq!(eer(&scores, &labels).unwrap(), 0.0);
    }

    #[test]
    fn constant_scores_hit_chance_level() {
        let scores = [0.5; 5];
        let labels = [1.0, 1.0, -1.0, -1.0, -1.0];
        let ap = average_precision(&scores, &labels).unwrap();
        assert!((ap - 0.4).abs() < 1e-15, "ap = {ap}");
        assert!((eer(&scores, &labels).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interleaved_fixture_matches_the_walk() {
        // thresholds: after 0.9 (fpr 0, fnr .5), after 0.6 (fpr .5, fnr .5)
        let scores = [0.9, 0.6, 0.4, 0.1];
        let labels = [1.0, -1.0, 1.0, -1.0];
        assert!((eer(&scores, &labels).unwrap() - 0.5).abs() < 1e-15);
        // ap: blocks of one; precisions at positives: 1/1 and 2/3
        let ap = average_precision(&scores, &labels).unwrap();
        assert!((ap - 0.5 * (1.0 + 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn eer_is_invariant_under_monotone_transforms() {
        let scores = [1.3, -0.2, 0.8, 0.1, -1.0, 0.5];
        let labels = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
        let base = eer(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (2.0 * s).tanh()).collect();
        assert_eq!(eer(&squashed, &labels).unwrap(), base);
        let shifted: Vec<f64> = scores.iter().map(|s| 10.0 * s + 3.0).collect();
        assert_eq!(eer(&shifted, &labels).unwrap(), base);
    }

    #[test]
    fn single_class_labels_are_rejected() {
        let scores = [0.1, 0.2];
        assert!(matches!(
            eer(&scores, &[1.0, 1.0]),
            Err(EvalError::SingleClass)
        ));
        assert!(matches!(
            average_precision(&scores, &[-1.0, -1.0]),
            Err(EvalError::SingleClass)
        ));
    }

    #[test]
    fn interpolation_lands_between_roc_points() {
        // 3 positives, 2 negatives; walk crosses between points
        let scores = [0.9, 0.8, 0.55, 0.3, 0.2];
        let labels = [1.0, 1.0, -1.0, 1.0, -1.0];
        let value = eer(&scores, &labels).unwrap();
        // segment from (fpr 1/2, fnr 1/3) to (fpr 1/2, fnr 0): crossing at
        // fpr = 1/2? no: fnr <= fpr first at (1/2, 1/3): interpolate from
        // (0, 1/3) with d 1/3 to (1/2, 1/3) with d -1/6: t = 2/3
        let expected = 0.0 + (2.0 / 3.0) * 0.5;
        assert!((value - expected).abs() < 1e-12, "eer = {value}");
    }
}
