//! Domain types for threshold-based ordinal regression: rank labels, fixed
//! boundaries on the real line, extended-binary encodings, and the inference
//! rules that map model outputs back onto ranks.

use crate::error::{Error, Result};

/// An integer rank in `1..=k`. Ordering between ranks is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankLabel(usize);

impl RankLabel {
    pub fn new(value: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidClassCount { k });
        }
        if value < 1 || value > k {
            return Err(Error::InvalidLabel {
                value: value as i64,
                k,
            });
        }
        Ok(RankLabel(value))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for RankLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A fixed, strictly increasing vector of `k + 1` thresholds together with the
/// training margin. Class `i` owns the segment `(thresholds[i-1], thresholds[i]]`;
/// the margin shrinks each segment during training and is discarded at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundaries {
    thresholds: Vec<f64>,
    margin: f64,
}

impl Boundaries {
    /// Builds boundaries from an explicit threshold vector. Requires at least
    /// three strictly increasing finite values (two classes) and a finite
    /// non-negative margin.
    pub fn new(thresholds: Vec<f64>, margin: f64) -> Result<Self> {
        if thresholds.len() < 3 {
            return Err(Error::InvalidClassCount {
                k: thresholds.len().saturating_sub(1),
            });
        }
        for (index, pair) in thresholds.windows(2).enumerate() {
            if !pair[0].is_finite() || !pair[1].is_finite() || pair[1] <= pair[0] {
                return Err(Error::NonIncreasingThresholds {
                    index: index + 1,
                    value: pair[1],
                });
            }
        }
        if !margin.is_finite() || margin < 0.0 {
            return Err(Error::InvalidMargin { gamma: margin });
        }
        Ok(Boundaries { thresholds, margin })
    }

    /// The default: thresholds `{-1, 0, 1, ..., k-1}` (unit-width segments)
    /// with margin 0.5.
    pub fn default_for(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidClassCount { k });
        }
        let thresholds = (0..=k).map(|i| i as f64 - 1.0).collect();
        Boundaries::new(thresholds, 0.5)
    }

    /// Same thresholds and margin, different margin value.
    pub fn with_margin(&self, margin: f64) -> Result<Self> {
        Boundaries::new(self.thresholds.clone(), margin)
    }

    pub fn k(&self) -> usize {
        self.thresholds.len() - 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Width of the narrowest class segment.
    pub fn min_segment_width(&self) -> f64 {
        self.thresholds
            .windows(2)
            .map(|pair| pair[1] - pair[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every segment retains a non-empty margin-shrunk interval,
    /// i.e. `2 * margin <= min segment width` (equality leaves the midpoint).
    pub fn margin_feasible(&self) -> bool {
        2.0 * self.margin <= self.min_segment_width() + 1e-12
    }

    /// Rejects margins whose shrunk feasible region would be empty.
    pub fn require_feasible_margin(&self) -> Result<()> {
        if self.margin_feasible() {
            Ok(())
        } else {
            Err(Error::InfeasibleMargin {
                gamma: self.margin,
                min_width: self.min_segment_width(),
            })
        }
    }

    /// Midpoint of class `i`'s segment.
    pub fn segment_midpoint(&self, i: usize) -> f64 {
        0.5 * (self.thresholds[i - 1] + self.thresholds[i])
    }

    /// Maps a score to the unique class whose segment contains it. Segments
    /// are half-open `(b[i-1], b[i]]`; scores at or below the lowest threshold
    /// clamp to class 1, scores above the highest clamp to class k. The margin
    /// plays no role here.
    pub fn infer_rank_threshold(&self, score: f64) -> RankLabel {
        let k = self.k();
        for i in 1..=k {
            if score <= self.thresholds[i] {
                return RankLabel(i);
            }
        }
        RankLabel(k)
    }
}

/// Rank `y` encoded as `k - 1` bits, the first `y - 1` of them set: bit `j`
/// answers "is the rank greater than `j + 1`?". Valid encodings are monotone
/// non-increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedBinaryLabel {
    bits: Vec<bool>,
}

impl ExtendedBinaryLabel {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        for pair in bits.windows(2) {
            if !pair[0] && pair[1] {
                return Err(Error::InvalidConfig(
                    "extended binary label must be monotone non-increasing".into(),
                ));
            }
        }
        Ok(ExtendedBinaryLabel { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Converts a rank into its extended-binary task targets.
pub fn encode_extended_binary(y: RankLabel, k: usize) -> Result<ExtendedBinaryLabel> {
    if k < 2 {
        return Err(Error::InvalidClassCount { k });
    }
    if y.get() > k {
        return Err(Error::InvalidLabel {
            value: y.get() as i64,
            k,
        });
    }
    let bits = (0..k - 1).map(|j| y.get() > j + 1).collect();
    Ok(ExtendedBinaryLabel { bits })
}

/// Sums positive binary decisions and adds one. Inconsistent decision vectors
/// (a 0 followed by a 1) are accepted: the sum rule counts ones regardless of
/// their positions.
pub fn infer_rank_binary(decisions: &[bool]) -> RankLabel {
    RankLabel(decisions.iter().filter(|&&d| d).count() + 1)
}

/// Feature vectors paired with rank labels. Rows share one dimension `d`;
/// labels lie in `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalDataset {
    features: Vec<f64>,
    labels: Vec<RankLabel>,
    dim: usize,
    k: usize,
}

impl OrdinalDataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<RankLabel>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidClassCount { k });
        }
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "feature dimension must be >= 1".into(),
            ));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::ShapeMismatch {
                what: "dataset feature matrix",
                expected: labels.len() * dim,
                got: features.len(),
            });
        }
        for label in &labels {
            if label.get() > k {
                return Err(Error::InvalidLabel {
                    value: label.get() as i64,
                    k,
                });
            }
        }
        Ok(OrdinalDataset {
            features,
            labels,
            dim,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    pub fn label(&self, index: usize) -> RankLabel {
        self.labels[index]
    }

    pub fn labels(&self) -> &[RankLabel] {
        &self.labels
    }

    /// Example indices grouped by class: entry `i` holds the rows of class `i + 1`.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (row, label) in self.labels.iter().enumerate() {
            groups[label.get() - 1].push(row);
        }
        groups
    }
}
