use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

fn check(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::shape("labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("score is NaN".into()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// 1-based ranks with ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && values[order[end]] == values[order[k]] {
            end += 1;
        }
        // positions k+1 ..= end share the rank (k + 1 + end) / 2
        let r = (k + 1 + end) as f64 / 2.0;
        order[k..end].iter().for_each(|&i| ranks[i] = r);
        k = end;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// Macro-averaged precision, recall and F1 over both classes at `threshold`,
/// plus AUC.
pub fn classification_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ClassificationMetrics> {
    let auc = auc(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let (p1, r1) = (ratio(tp, fp), ratio(tp, fn_));
    let (p0, r0) = (ratio(tn, fn_), ratio(tn, fp));
    Ok(ClassificationMetrics {
        precision: (p1 + p0) / 2.0,
        recall: (r1 + r0) / 2.0,
        f1: (f1(p1, r1) + f1(p0, r0)) / 2.0,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    }

    #[test]
    fn separated_and_tied() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::AucUndefined)));
    }

    #[test]
    fn macro_scores_on_a_small_confusion_matrix() {
        // tp=2 fp=1 tn=1 fn=0
        let m = classification_metrics(&[0.9, 0.8, 0.7, 0.1], &[1, 1, 0, 0], 0.5).unwrap();
        assert!((m.precision - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        assert!((m.recall - (1.0 + 0.5) / 2.0).abs() < 1e-15);
        assert!((m.f1 - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest! {
        #[test]
        fn label_flip_mirrors_auc(
            data in prop::collection::vec((0u8..5, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64).collect();
            let labels: Vec<u8> = data.iter().map(|(_, y)| *y as u8).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
            let a = auc(&scores, &labels).unwrap();
            let b = auc(&scores, &flipped).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
