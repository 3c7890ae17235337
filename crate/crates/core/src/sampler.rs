//! Pairwise training stream: one epoch of adjacent-class example pairs for
//! the Siamese objectives.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ordinal::{OrdinalDataset, RankLabel};

/// A pair of feature vectors drawn from consecutive classes `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub lower_features: Vec<f64>,
    pub upper_features: Vec<f64>,
    pub lower_class: RankLabel,
}

/// Indices `0..n` in a fresh shuffled order.
fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// `count` indices into `0..n`, cycling reshuffled permutations so every
/// index appears at least `floor(count / n)` times. Repeats stand in for
/// with-replacement draws while keeping full per-epoch coverage.
fn cycled_draws(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut draws = Vec::with_capacity(count);
    while draws.len() < count {
        let mut perm = permutation(n, rng);
        let take = (count - draws.len()).min(n);
        perm.truncate(take);
        draws.extend(perm);
    }
    draws
}

/// One epoch of pairs. For every adjacent class slot `(i, i + 1)` the epoch
/// contains `max(n_i, n_{i+1})` pairs: the larger class contributes each of
/// its examples exactly once, the smaller is cycled to match. The combined
/// list is globally shuffled. Deterministic per seed.
pub fn epoch_pairs(ds: &OrdinalDataset, seed: u64) -> Result<Vec<PairSample>> {
    let groups = ds.indices_by_class();
    for (class_index, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::UncoverableClass {
                label: class_index + 1,
                context: ": pair sampling needs every class populated".into(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for lower_class in 1..ds.k() {
        let lower = &groups[lower_class - 1];
        let upper = &groups[lower_class];
        let count = lower.len().max(upper.len());
        let lower_draws = if lower.len() == count {
            permutation(count, &mut rng)
        } else {
            cycled_draws(lower.len(), count, &mut rng)
        };
        let upper_draws = if lower.len() == count {
            cycled_draws(upper.len(), count, &mut rng)
        } else {
            permutation(count, &mut rng)
        };
        let label = RankLabel::new(lower_class, ds.k())?;
        for (li, ui) in lower_draws.into_iter().zip(upper_draws) {
            pairs.push(PairSample {
                lower_features: ds.row(lower[li]).to_vec(),
                upper_features: ds.row(upper[ui]).to_vec(),
                lower_class: label,
            });
        }
    }
    pairs.shuffle(&mut rng);
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordinal::OrdinalDataset;

    /// 1-D dataset whose feature value is the example's global index, so
    /// coverage can be tracked through the emitted pairs.
    fn indexed_dataset(class_sizes: &[usize]) -> OrdinalDataset {
        let k = class_sizes.len();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut next = 0usize;
        for (class_index, &size) in class_sizes.iter().enumerate() {
            for _ in 0..size {
                features.push(next as f64);
                labels.push(RankLabel::new(class_index + 1, k).unwrap());
                next += 1;
            }
        }
        OrdinalDataset::new(features, 1, labels, k).unwrap()
    }

    #[test]
    fn one_example_per_class_forces_single_pair() {
        let ds = indexed_dataset(&[1, 1]);
        let pairs = epoch_pairs(&ds, 0).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].lower_features, vec![0.0]);
        assert_eq!(pairs[0].upper_features, vec![1.0]);
    }

    #[test]
    fn epoch_size_is_slots_times_max_class_size() {
        let ds = indexed_dataset(&[100, 100, 100, 100, 100]);
        assert_eq!(epoch_pairs(&ds, 3).unwrap().len(), 400);
    }

    #[test]
    fn same_seed_gives_identical_sequence() {
        let ds = indexed_dataset(&[7, 12, 5]);
        assert_eq!(epoch_pairs(&ds, 42).unwrap(), epoch_pairs(&ds, 42).unwrap());
        assert_ne!(epoch_pairs(&ds, 42).unwrap(), epoch_pairs(&ds, 43).unwrap());
    }

    #[test]
    fn pairs_are_label_adjacent() {
        let ds = indexed_dataset(&[4, 9, 2, 6]);
        // Class of a feature value is recoverable from the index ranges.
        let class_of = |v: f64| -> usize {
            let idx = v as usize;
            match idx {
                0..=3 => 1,
                4..=12 => 2,
                13..=14 => 3,
                _ => 4,
            }
        };
        for pair in epoch_pairs(&ds, 9).unwrap() {
            let lo = class_of(pair.lower_features[0]);
            let up = class_of(pair.upper_features[0]);
            assert_eq!(lo, pair.lower_class.get());
            assert_eq!(up, lo + 1);
        }
    }

    #[test]
    fn every_example_appears_each_epoch() {
        let ds = indexed_dataset(&[3, 11, 4, 8]);
        for seed in 0..5 {
            let mut seen = vec![false; ds.len()];
            for pair in epoch_pairs(&ds, seed).unwrap() {
                seen[pair.lower_features[0] as usize] = true;
                seen[pair.upper_features[0] as usize] = true;
            }
            assert!(seen.iter().all(|&s| s), "seed {seed} missed an example");
        }
    }

    #[test]
    fn empty_class_is_reported() {
        let k = 3;
        let labels = vec![RankLabel::new(1, k).unwrap(), RankLabel::new(3, k).unwrap()];
        let ds = OrdinalDataset::new(vec![0.0, 1.0], 1, labels, k).unwrap();
        match epoch_pairs(&ds, 0) {
            Err(Error::UncoverableClass { label, .. }) => assert_eq!(label, 2),
            other => panic!("expected uncoverable-class error, got {other:?}"),
        }
    }

    #[test]
    fn balanced_classes_share_pairs_equally_across_slots() {
        let ds = indexed_dataset(&[20, 20, 20, 20]);
        let pairs = epoch_pairs(&ds, 1).unwrap();
        let mut per_slot = [0usize; 3];
        for pair in &pairs {
            per_slot[pair.lower_class.get() - 1] += 1;
        }
        assert_eq!(per_slot, [20, 20, 20]);
    }
}
