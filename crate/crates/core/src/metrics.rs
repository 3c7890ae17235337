//! Exact-match accuracy, mean absolute rank error, and the monotonicity
//! (consistency) counter for binary-decomposition predictions.

use crate::error::{Error, Result};
use crate::ordinal::RankLabel;

/// Evaluation summary for one model on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub mae: f64,
    pub n: usize,
    /// Fraction of examples whose binary decision vector was non-monotone;
    /// only meaningful for methods built from independent binary tasks.
    pub inconsistency_rate: Option<f64>,
}

fn check_lengths(preds: &[RankLabel], labels: &[RankLabel], what: &'static str) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::EmptySet { what });
    }
    if preds.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            what,
            expected: labels.len(),
            got: preds.len(),
        });
    }
    Ok(())
}

/// Fraction of exact rank matches.
pub fn accuracy(preds: &[RankLabel], labels: &[RankLabel]) -> Result<f64> {
    check_lengths(preds, labels, "accuracy")?;
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(p, l)| p.get() == l.get())
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean absolute difference between predicted and true ranks.
pub fn mae(preds: &[RankLabel], labels: &[RankLabel]) -> Result<f64> {
    check_lengths(preds, labels, "mae")?;
    let total: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, l)| (p.get() as f64 - l.get() as f64).abs())
        .sum();
    Ok(total / preds.len() as f64)
}

/// Counts decision vectors that contain a 0 followed by a 1, i.e. vectors no
/// valid extended-binary encoding could produce. Returns the count and rate.
pub fn inconsistency_count(vectors: &[Vec<bool>]) -> Result<(usize, f64)> {
    if vectors.is_empty() {
        return Err(Error::EmptySet {
            what: "inconsistency_count",
        });
    }
    let width = vectors[0].len();
    let mut count = 0;
    for v in vectors {
        if v.len() != width {
            return Err(Error::ShapeMismatch {
                what: "decision vector",
                expected: width,
                got: v.len(),
            });
        }
        if v.windows(2).any(|p| !p[0] && p[1]) {
            count += 1;
        }
    }
    Ok((count, count as f64 / vectors.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordinal::encode_extended_binary;

    fn ranks(values: &[usize], k: usize) -> Vec<RankLabel> {
        values
            .iter()
            .map(|&v| RankLabel::new(v, k).unwrap())
            .collect()
    }

    #[test]
    fn accuracy_examples() {
        let k = 5;
        let a = ranks(&[1, 2, 3], k);
        assert_eq!(accuracy(&a, &a).unwrap(), 1.0);
        let opposite = ranks(&[2, 3, 4], k);
        assert_eq!(accuracy(&a, &opposite).unwrap(), 0.0);
        let reversed = ranks(&[3, 2, 1], k);
        assert!((accuracy(&a, &reversed).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mae_examples() {
        let k = 5;
        let a = ranks(&[1, 2, 3], k);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let reversed = ranks(&[3, 2, 1], k);
        assert!((mae(&a, &reversed).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        // Constant prediction of class 3 against uniform labels 1..=5.
        let preds = ranks(&[3, 3, 3, 3, 3], k);
        let labels = ranks(&[1, 2, 3, 4, 5], k);
        assert!((mae(&preds, &labels).unwrap() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn metrics_reject_empty_and_mismatched_inputs() {
        let k = 3;
        let a = ranks(&[1], k);
        assert!(accuracy(&[], &[]).is_err());
        assert!(mae(&[], &[]).is_err());
        assert!(accuracy(&a, &ranks(&[1, 2], k)).is_err());
    }

    #[test]
    fn inconsistency_examples() {
        let valid: Vec<Vec<bool>> = (1..=5)
            .map(|y| {
                encode_extended_binary(RankLabel::new(y, 5).unwrap(), 5)
                    .unwrap()
                    .bits()
                    .to_vec()
            })
            .collect();
        assert_eq!(inconsistency_count(&valid).unwrap(), (0, 0.0));
        assert_eq!(inconsistency_count(&[vec![false, true]]).unwrap(), (1, 1.0));
    }

    #[test]
    fn inconsistency_controlled_corruption_rate() {
        // 90 valid encodings plus 10 corrupted vectors: rate exactly 0.10.
        let mut vectors = Vec::new();
        for i in 0..90 {
            let y = i % 5 + 1;
            vectors.push(
                encode_extended_binary(RankLabel::new(y, 5).unwrap(), 5)
                    .unwrap()
                    .bits()
                    .to_vec(),
            );
        }
        for _ in 0..10 {
            vectors.push(vec![false, true, false, true]);
        }
        let (count, rate) = inconsistency_count(&vectors).unwrap();
        assert_eq!(count, 10);
        assert_eq!(rate, 0.10);
    }

    #[test]
    fn inconsistency_rejects_ragged_input() {
        assert!(inconsistency_count(&[vec![true, false], vec![true]]).is_err());
    }
}
