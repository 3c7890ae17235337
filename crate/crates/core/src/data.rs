//! Dataset acquisition: synthetic ordinal generators, CSV ingestion of
//! pre-extracted feature vectors, and deterministic stratified splitting.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ordinal::{OrdinalDataset, RankLabel};

/// Recipe for a synthetic ordinal dataset: a latent scalar per example drawn
/// around its class's segment midpoint, embedded among distractor dimensions
/// by a fixed random rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub k: usize,
    pub per_class: usize,
    pub d: usize,
    /// Standard deviation of the latent scalar around its class center.
    pub noise: f64,
    /// Seeds the orthogonal embedding, independently of the draws.
    pub transform_seed: u64,
    /// Probability of corrupting a label by +-1 (clamped to `1..=k`).
    pub label_noise: f64,
    /// Seeds the latent, distractor and label-noise draws.
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidClassCount { k: self.k });
        }
        if self.per_class == 0 {
            return Err(Error::InvalidConfig("per_class must be >= 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig(
                "feature dimension must be >= 1".into(),
            ));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::InvalidConfig(format!(
                "label_noise must lie in [0, 0.5], got {}",
                self.label_noise
            )));
        }
        Ok(())
    }

    /// Latent center of class `i`: the midpoint of its default segment.
    pub fn class_center(i: usize) -> f64 {
        i as f64 - 1.5
    }
}

/// A random d x d orthogonal matrix (row-major), built by Gram-Schmidt on a
/// Gaussian matrix. Deterministic per seed.
pub fn random_orthogonal(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    while columns.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for q in &columns {
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= dot * qi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // numerically degenerate draw, retry
        }
        v.iter_mut().for_each(|x| *x /= norm);
        columns.push(v);
    }
    let mut q = vec![0.0; d * d];
    for (c, col) in columns.iter().enumerate() {
        for (r, &value) in col.iter().enumerate() {
            q[r * d + c] = value;
        }
    }
    q
}

/// Draws `per_class` examples per class. Each example is a latent scalar from
/// `Normal(center_i, noise)` plus `d - 1` standard-normal distractors, rotated
/// by the fixed embedding; labels are optionally corrupted by +-1.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<OrdinalDataset> {
    spec.validate()?;
    let q = random_orthogonal(spec.d, spec.transform_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.k * spec.per_class;
    let mut features = Vec::with_capacity(n * spec.d);
    let mut labels = Vec::with_capacity(n);
    for class in 1..=spec.k {
        let center = SyntheticSpec::class_center(class);
        for _ in 0..spec.per_class {
            let noise: f64 = rng.sample(StandardNormal);
            let latent = center + spec.noise * noise;
            let mut v = Vec::with_capacity(spec.d);
            v.push(latent);
            for _ in 1..spec.d {
                v.push(rng.sample(StandardNormal));
            }
            for row in 0..spec.d {
                let mut acc = 0.0;
                for (col, &vc) in v.iter().enumerate() {
                    acc += q[row * spec.d + col] * vc;
                }
                features.push(acc);
            }
            let mut label = class;
            if spec.label_noise > 0.0 && rng.gen::<f64>() < spec.label_noise {
                let up: bool = rng.gen();
                label = if up {
                    (class + 1).min(spec.k)
                } else {
                    class.saturating_sub(1).max(1)
                };
            }
            labels.push(RankLabel::new(label, spec.k)?);
        }
    }
    OrdinalDataset::new(features, spec.d, labels, spec.k)
}

/// Recovers the latent scalar of a feature row generated by
/// [`generate_synthetic`]: the first coordinate of the inverse rotation.
pub fn latent_of_row(row: &[f64], q: &[f64]) -> f64 {
    let d = row.len();
    (0..d).map(|r| q[r * d] * row[r]).sum()
}

/// Reads `f1,...,fd,label` rows. The feature dimension is taken from the
/// first data row; labels must be integers in `1..=k`. Errors carry the
/// offending 1-based line number.
pub fn load_csv(path: &Path, k: usize, has_header: bool) -> Result<OrdinalDataset> {
    if k < 2 {
        return Err(Error::InvalidClassCount { k });
    }
    let text = std::fs::read_to_string(path)?;
    let parse_err = |line: usize, msg: String| Error::CsvParse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut dim: Option<usize> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if has_header && index == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split(',').collect();
        if tokens.len() < 2 {
            return Err(parse_err(
                line_no,
                "expected at least one feature and a label".into(),
            ));
        }
        let row_dim = tokens.len() - 1;
        match dim {
            None => dim = Some(row_dim),
            Some(d) if d != row_dim => {
                return Err(parse_err(
                    line_no,
                    format!("ragged row: expected {d} features, got {row_dim}"),
                ));
            }
            _ => {}
        }
        for token in &tokens[..row_dim] {
            let value: f64 = token
                .trim()
                .parse()
                .map_err(|e| parse_err(line_no, format!("non-numeric feature '{token}': {e}")))?;
            features.push(value);
        }
        let label_token = tokens[row_dim].trim();
        let label: i64 = label_token
            .parse()
            .map_err(|e| parse_err(line_no, format!("non-integer label '{label_token}': {e}")))?;
        if label < 1 || label as usize > k {
            return Err(parse_err(
                line_no,
                format!("label {label} out of range 1..={k}"),
            ));
        }
        labels.push(RankLabel::new(label as usize, k)?);
    }

    let dim = dim.ok_or_else(|| parse_err(0, "no data rows".into()))?;
    OrdinalDataset::new(features, dim, labels, k)
}

/// Writes the dataset in the same schema [`load_csv`] reads. Features are
/// printed at full round-trip precision.
pub fn write_csv(path: &Path, ds: &OrdinalDataset, header: bool) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    if header {
        for c in 1..=ds.dim() {
            let _ = write!(out, "f{c},");
        }
        out.push_str("label\n");
    }
    for row in 0..ds.len() {
        for value in ds.row(row) {
            let _ = write!(out, "{value},");
        }
        let _ = writeln!(out, "{}", ds.label(row));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Largest-remainder apportionment of `n` items over the three ratios.
fn apportion(n: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let r = [ratios.0, ratios.1, ratios.2];
    let exact: Vec<f64> = r.iter().map(|ri| ri * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &slot in order.iter().take(n - assigned) {
        counts[slot] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Stratified split: within each class the rows are shuffled (seeded) and
/// apportioned by largest remainder, so per-class sizes differ from the exact
/// ratios by less than one example. Every class must land at least one row in
/// the train split.
pub fn split(
    ds: &OrdinalDataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(OrdinalDataset, OrdinalDataset, OrdinalDataset)> {
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) {
        return Err(Error::InvalidConfig(
            "split ratios must all be positive".into(),
        ));
    }
    if (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split ratios must sum to 1, got {}",
            tr + va + te
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [(Vec<f64>, Vec<RankLabel>); 3] = Default::default();
    for (class_index, mut rows) in ds.indices_by_class().into_iter().enumerate() {
        use rand::seq::SliceRandom;
        rows.shuffle(&mut rng);
        let counts = apportion(rows.len(), ratios);
        if counts[0] == 0 {
            return Err(Error::UncoverableClass {
                label: class_index + 1,
                context: ": too few examples to appear in the train split".into(),
            });
        }
        let mut cursor = 0;
        for (part, &take) in parts.iter_mut().zip(&counts) {
            for &row in &rows[cursor..cursor + take] {
                part.0.extend_from_slice(ds.row(row));
                part.1.push(ds.label(row));
            }
            cursor += take;
        }
    }

    let [train, val, test] = parts;
    Ok((
        OrdinalDataset::new(train.0, ds.dim(), train.1, ds.k())?,
        OrdinalDataset::new(val.0, ds.dim(), val.1, ds.k())?,
        OrdinalDataset::new(test.0, ds.dim(), test.1, ds.k())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            k: 5,
            per_class: 40,
            d: 6,
            noise: 0.5,
            transform_seed: 7,
            label_noise: 0.0,
            seed: 42,
        }
    }

    #[test]
    fn embedding_is_orthogonal() {
        for d in [1, 2, 5, 9] {
            let q = random_orthogonal(d, 11);
            for a in 0..d {
                for b in 0..d {
                    let dot: f64 = (0..d).map(|r| q[r * d + a] * q[r * d + b]).sum();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-9, "d={d} ({a},{b}): {dot}");
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&spec()).unwrap();
        let b = generate_synthetic(&spec()).unwrap();
        assert_eq!(a, b);
        let mut other = spec();
        other.seed = 43;
        assert_ne!(a, generate_synthetic(&other).unwrap());
    }

    #[test]
    fn latent_recovery_and_noiseless_centers() {
        let mut s = spec();
        s.noise = 0.0;
        let ds = generate_synthetic(&s).unwrap();
        let q = random_orthogonal(s.d, s.transform_seed);
        for row in 0..ds.len() {
            let latent = latent_of_row(ds.row(row), &q);
            let center = SyntheticSpec::class_center(ds.label(row).get());
            assert!((latent - center).abs() < 1e-9);
        }
    }

    #[test]
    fn label_marginals_are_uniform_before_noise() {
        let ds = generate_synthetic(&spec()).unwrap();
        let counts = ds.indices_by_class();
        assert!(counts.iter().all(|c| c.len() == spec().per_class));
    }

    #[test]
    fn label_noise_keeps_labels_in_range() {
        let mut s = spec();
        s.label_noise = 0.5;
        s.per_class = 200;
        let ds = generate_synthetic(&s).unwrap();
        assert!(ds.labels().iter().all(|l| (1..=s.k).contains(&l.get())));
        // With 50% corruption some labels must have moved.
        let moved = (0..ds.len())
            .filter(|&i| {
                let q = random_orthogonal(s.d, s.transform_seed);
                let latent = latent_of_row(ds.row(i), &q);
                let implied = ((latent + 1.5).round() as usize).clamp(1, s.k);
                implied != ds.label(i).get()
            })
            .count();
        assert!(moved > 0);
    }

    #[test]
    fn csv_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        std::fs::write(&path, "0.5,1.5,1\n-0.25,2.0,3\n1e-3,0.0,2\n").unwrap();
        let ds = load_csv(&path, 3, false).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.row(1), &[-0.25, 2.0]);
        assert_eq!(ds.label(2).get(), 2);
    }

    #[test]
    fn csv_header_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hdr.csv");
        std::fs::write(&path, "f1,f2,label\n0.5,1.5,1\n").unwrap();
        let ds = load_csv(&path, 3, true).unwrap();
        assert_eq!(ds.len(), 1);
        // Without the flag the header line fails as a non-numeric feature.
        assert!(load_csv(&path, 3, false).is_err());
    }

    #[test]
    fn csv_label_out_of_range_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "0.5,1.5,1\n0.1,0.2,0\n").unwrap();
        match load_csv(&path, 3, false) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        std::fs::write(&path, "0.5,1.5,1\n0.1,2\n").unwrap();
        match load_csv(&path, 3, false) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_non_numeric_feature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.csv");
        std::fs::write(&path, "abc,1.5,1\n").unwrap();
        assert!(load_csv(&path, 3, false).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.csv");
        let mut s = spec();
        s.per_class = 2000;
        let ds = generate_synthetic(&s).unwrap();
        write_csv(&path, &ds, true).unwrap();
        let back = load_csv(&path, s.k, true).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn split_examples() {
        let ds = generate_synthetic(&SyntheticSpec {
            per_class: 100,
            ..spec()
        })
        .unwrap();
        let (train, val, test) = split(&ds, (0.6, 0.2, 0.2), 1).unwrap();
        for part in [(&train, 60), (&val, 20), (&test, 20)] {
            for class in part.0.indices_by_class() {
                assert_eq!(class.len(), part.1);
            }
        }
    }

    #[test]
    fn split_five_examples_largest_remainder() {
        assert_eq!(apportion(5, (0.6, 0.2, 0.2)), [3, 1, 1]);
        assert_eq!(apportion(100, (0.6, 0.2, 0.2)), [60, 20, 20]);
        assert_eq!(apportion(1, (0.6, 0.2, 0.2)), [1, 0, 0]);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let ds = generate_synthetic(&spec()).unwrap();
        let a = split(&ds, (0.6, 0.2, 0.2), 5).unwrap();
        let b = split(&ds, (0.6, 0.2, 0.2), 5).unwrap();
        assert_eq!(a, b);

        // Multiset equality with the source dataset.
        let mut original: Vec<(Vec<u64>, usize)> = (0..ds.len())
            .map(|i| {
                (
                    ds.row(i).iter().map(|v| v.to_bits()).collect(),
                    ds.label(i).get(),
                )
            })
            .collect();
        let mut rebuilt = Vec::new();
        for part in [&a.0, &a.1, &a.2] {
            for i in 0..part.len() {
                rebuilt.push((
                    part.row(i)
                        .iter()
                        .map(|v| v.to_bits())
                        .collect::<Vec<u64>>(),
                    part.label(i).get(),
                ));
            }
        }
        original.sort();
        rebuilt.sort();
        assert_eq!(original, rebuilt);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        let ds = generate_synthetic(&spec()).unwrap();
        assert!(split(&ds, (0.7, 0.2, 0.2), 0).is_err());
        assert!(split(&ds, (0.0, 0.5, 0.5), 0).is_err());
    }
}
