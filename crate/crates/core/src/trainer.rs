//! Batched SGD training with per-epoch validation, best-model selection and
//! checkpointing. Siamese objectives consume the adjacent-class pair stream;
//! the binary-decomposition baselines consume shuffled single examples.

use std::path::{Path, PathBuf};

use crate::data;
use crate::error::{Error, Result};
use crate::losses::{self, CnnporConfig, CoralHead, LossValueAndGrad, Method};
use crate::metrics::{self, MetricsReport};
use crate::net::{self, Activation, DenseModel, GradientBuffer};
use crate::ordinal::{infer_rank_binary, Boundaries, OrdinalDataset, RankLabel};
use crate::sampler;

/// Distinct deterministic stream per (seed, purpose) pair; splitmix64 finalizer.
pub(crate) fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    Default,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectOn {
    Mae,
    Accuracy,
}

impl std::str::FromStr for SelectOn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mae" => Ok(SelectOn::Mae),
            "accuracy" => Ok(SelectOn::Accuracy),
            other => Err(Error::InvalidConfig(format!(
                "unknown selection metric '{other}' (expected mae or accuracy)"
            ))),
        }
    }
}

/// Inference head of a two-headed (hybrid) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Classification,
    Regression,
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Head::Classification),
            "regression" => Ok(Head::Regression),
            other => Err(Error::InvalidConfig(format!(
                "unknown head '{other}' (expected classification or regression)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub gamma: f64,
    pub seed: u64,
    pub boundaries: BoundarySpec,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub select_on: SelectOn,
    pub allow_infeasible_margin: bool,
    pub cnnpor: CnnporConfig,
    /// Weight of the ranking term in the hybrid objective.
    pub hybrid_c: f64,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        TrainConfig {
            method,
            epochs: 100,
            batch_size: 32,
            lr: 0.02,
            gamma: 0.5,
            seed: 42,
            boundaries: BoundarySpec::Default,
            hidden: vec![64, 32],
            activation: Activation::Relu,
            select_on: SelectOn::Mae,
            allow_infeasible_margin: false,
            cnnpor: CnnporConfig::default(),
            hybrid_c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be > 0, got {}",
                self.lr
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidMargin { gamma: self.gamma });
        }
        Ok(())
    }

    /// Thresholds for `k` classes with this config's margin. The margin
    /// feasibility gate applies to the methods that train against it.
    pub fn resolve_boundaries(&self, k: usize) -> Result<Boundaries> {
        let boundaries = match &self.boundaries {
            BoundarySpec::Default => Boundaries::default_for(k)?.with_margin(self.gamma)?,
            BoundarySpec::Explicit(thresholds) => {
                if thresholds.len() != k + 1 {
                    return Err(Error::ThresholdCount {
                        expected: k + 1,
                        got: thresholds.len(),
                        k,
                    });
                }
                Boundaries::new(thresholds.clone(), self.gamma)?
            }
        };
        let margin_matters = matches!(self.method, Method::Thor | Method::Hybrid);
        if margin_matters && !self.allow_infeasible_margin {
            boundaries.require_feasible_margin()?;
        }
        Ok(boundaries)
    }
}

/// A model bound to its method, thresholds, and (for coral) its bias head —
/// everything inference needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: DenseModel,
    pub coral_head: Option<CoralHead>,
    pub boundaries: Boundaries,
    pub method: Method,
}

impl TrainedModel {
    pub fn expected_output_width(&self) -> usize {
        self.method.output_width(self.boundaries.k())
    }

    fn check_width(&self) -> Result<()> {
        let expected = self.expected_output_width();
        if self.model.output_width() != expected {
            return Err(Error::ShapeMismatch {
                what: "model output width for method",
                expected,
                got: self.model.output_width(),
            });
        }
        if self.method == Method::Coral {
            let head = self.coral_head.as_ref().ok_or_else(|| {
                Error::InvalidConfig("coral model is missing its bias head".into())
            })?;
            if head.biases.len() != self.boundaries.k() - 1 {
                return Err(Error::ShapeMismatch {
                    what: "coral bias head",
                    expected: self.boundaries.k() - 1,
                    got: head.biases.len(),
                });
            }
        }
        Ok(())
    }

    /// Predicted rank for one feature vector, plus the binary decision vector
    /// for the decomposition methods. `head` selects the hybrid inference
    /// path and is ignored elsewhere.
    pub fn predict_with_decisions(
        &self,
        x: &[f64],
        head: Option<Head>,
    ) -> Result<(RankLabel, Option<Vec<bool>>)> {
        self.check_width()?;
        let outputs = self.model.predict(x)?;
        let k = self.boundaries.k();
        match self.method {
            Method::Thor => Ok((self.boundaries.infer_rank_threshold(outputs[0]), None)),
            Method::Orcnn => {
                let decisions: Vec<bool> = outputs.iter().map(|&z| z > 0.0).collect();
                Ok((infer_rank_binary(&decisions), Some(decisions)))
            }
            Method::Coral => {
                let head = self.coral_head.as_ref().unwrap();
                let decisions = head.decisions(outputs[head.shared_score_index]);
                Ok((infer_rank_binary(&decisions), Some(decisions)))
            }
            Method::Cnnpor => Ok((argmax_rank(&outputs[..k])?, None)),
            Method::Hybrid => match head {
                Some(Head::Classification) => Ok((argmax_rank(&outputs[..k])?, None)),
                Some(Head::Regression) => {
                    Ok((self.boundaries.infer_rank_threshold(outputs[k]), None))
                }
                None => Err(Error::InvalidConfig(
                    "hybrid inference requires a head selector (classification or regression)"
                        .into(),
                )),
            },
        }
    }

    pub fn predict(&self, x: &[f64], head: Option<Head>) -> Result<RankLabel> {
        self.predict_with_decisions(x, head).map(|(rank, _)| rank)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let aux: Vec<Vec<f64>> = match &self.coral_head {
            Some(head) => vec![head.biases.clone()],
            None => Vec::new(),
        };
        net::save_checkpoint(path, &self.model, &aux)
    }

    pub fn load(path: &Path, method: Method, boundaries: Boundaries) -> Result<Self> {
        let (model, aux) = net::load_checkpoint(path)?;
        let coral_head = if method == Method::Coral {
            if aux.len() != 1 {
                return Err(Error::CheckpointFormat {
                    path: path.to_path_buf(),
                    msg: format!("expected 1 auxiliary tensor, found {}", aux.len()),
                });
            }
            Some(CoralHead::new(aux.into_iter().next().unwrap())?)
        } else {
            if !aux.is_empty() {
                return Err(Error::CheckpointFormat {
                    path: path.to_path_buf(),
                    msg: format!(
                        "method {method} expects no auxiliary tensors, found {}",
                        aux.len()
                    ),
                });
            }
            None
        };
        let trained = TrainedModel {
            model,
            coral_head,
            boundaries,
            method,
        };
        trained.check_width()?;
        Ok(trained)
    }
}

fn argmax_rank(logits: &[f64]) -> Result<RankLabel> {
    let mut best = 0;
    for (index, &value) in logits.iter().enumerate() {
        if value > logits[best] {
            best = index;
        }
    }
    RankLabel::new(best + 1, logits.len())
}

/// Applies the method's inference rule per example and summarizes accuracy,
/// MAE and (for the decomposition methods) the inconsistency rate.
pub fn evaluate(
    trained: &TrainedModel,
    ds: &OrdinalDataset,
    head: Option<Head>,
) -> Result<MetricsReport> {
    if ds.k() != trained.boundaries.k() {
        return Err(Error::ShapeMismatch {
            what: "dataset class count",
            expected: trained.boundaries.k(),
            got: ds.k(),
        });
    }
    let mut preds = Vec::with_capacity(ds.len());
    let mut decision_vectors = Vec::new();
    for row in 0..ds.len() {
        let (rank, decisions) = trained.predict_with_decisions(ds.row(row), head)?;
        preds.push(rank);
        if let Some(d) = decisions {
            decision_vectors.push(d);
        }
    }
    let accuracy = metrics::accuracy(&preds, ds.labels())?;
    let mae = metrics::mae(&preds, ds.labels())?;
    let inconsistency_rate = if trained.method.reports_inconsistency() {
        Some(metrics::inconsistency_count(&decision_vectors)?.1)
    } else {
        None
    };
    Ok(MetricsReport {
        accuracy,
        mae,
        n: ds.len(),
        inconsistency_rate,
    })
}

/// Per-epoch series plus the selected best epoch and its persisted checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub val_mae: Vec<f64>,
    /// 1-based; earliest epoch achieving the best validation metric.
    pub best_epoch: usize,
    pub best_checkpoint: PathBuf,
}

impl TrainReport {
    /// Line-oriented key-value rendering: one line per epoch, then the
    /// selection summary.
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for epoch in 0..self.train_loss.len() {
            let _ = writeln!(
                out,
                "epoch={} train_loss={} val_mae={} val_acc={}",
                epoch + 1,
                self.train_loss[epoch],
                self.val_mae[epoch],
                self.val_accuracy[epoch],
            );
        }
        let _ = writeln!(out, "best_epoch={}", self.best_epoch);
        let _ = writeln!(out, "best_checkpoint={}", self.best_checkpoint.display());
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: TrainedModel,
}

/// The head used for validation during training: for the hybrid model the
/// head matching the selection metric, otherwise none.
pub fn validation_head(cfg: &TrainConfig) -> Option<Head> {
    if cfg.method == Method::Hybrid {
        Some(match cfg.select_on {
            SelectOn::Mae => Head::Regression,
            SelectOn::Accuracy => Head::Classification,
        })
    } else {
        None
    }
}

struct BatchState {
    grads: GradientBuffer,
    bias_grads: Vec<f64>,
    loss_sum: f64,
    count: usize,
}

impl BatchState {
    fn new(model: &DenseModel, bias_len: usize) -> Self {
        BatchState {
            grads: GradientBuffer::zeros_like(model),
            bias_grads: vec![0.0; bias_len],
            loss_sum: 0.0,
            count: 0,
        }
    }

    fn reset(&mut self) {
        self.grads.zero();
        self.bias_grads.iter_mut().for_each(|g| *g = 0.0);
        self.loss_sum = 0.0;
        self.count = 0;
    }

    fn absorb(&mut self, lvg: &LossValueAndGrad) {
        self.loss_sum += lvg.value;
        self.count += 1;
        if let Some(d_biases) = &lvg.d_head_biases {
            for (acc, g) in self.bias_grads.iter_mut().zip(d_biases) {
                *acc += g;
            }
        }
    }

    /// Mean-reduces the accumulated gradients, applies one SGD step to the
    /// model (and coral biases), and resets. Returns the consumed loss sum
    /// and count for epoch bookkeeping.
    fn step(
        &mut self,
        model: &mut DenseModel,
        coral_head: &mut Option<CoralHead>,
        lr: f64,
        epoch: usize,
        batch_index: usize,
    ) -> Result<(f64, usize)> {
        let scale = 1.0 / self.count as f64;
        self.grads.scale(scale);
        model.sgd_step(&self.grads, lr).map_err(|e| match e {
            Error::NumericFault(msg) => numeric_fault(epoch, batch_index, msg),
            other => other,
        })?;
        if let Some(head) = coral_head {
            for (bias, g) in head.biases.iter_mut().zip(&self.bias_grads) {
                if !g.is_finite() {
                    return Err(numeric_fault(
                        epoch,
                        batch_index,
                        "non-finite bias gradient",
                    ));
                }
                *bias -= lr * g * scale;
            }
        }
        let consumed = (self.loss_sum, self.count);
        self.reset();
        Ok(consumed)
    }
}

fn numeric_fault(epoch: usize, batch: usize, what: impl std::fmt::Display) -> Error {
    Error::NumericFault(format!("epoch {epoch}, batch {batch}: {what}"))
}

fn check_finite_outputs(outputs: &[f64], epoch: usize, batch: usize) -> Result<()> {
    if outputs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(numeric_fault(epoch, batch, "non-finite model output"))
    }
}

/// Runs `cfg.epochs` epochs of batched SGD on the selected objective,
/// evaluating the validation split after every epoch and persisting the best
/// model under `out_dir`. Fully deterministic per seed.
pub fn train(
    ds_train: &OrdinalDataset,
    ds_val: &OrdinalDataset,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds_train.dim() != ds_val.dim() {
        return Err(Error::ShapeMismatch {
            what: "validation feature dimension",
            expected: ds_train.dim(),
            got: ds_val.dim(),
        });
    }
    if ds_train.k() != ds_val.k() {
        return Err(Error::ShapeMismatch {
            what: "validation class count",
            expected: ds_train.k(),
            got: ds_val.k(),
        });
    }
    let k = ds_train.k();
    let boundaries = cfg.resolve_boundaries(k)?;
    let output_width = cfg.method.output_width(k);
    let mut model = DenseModel::init(
        ds_train.dim(),
        &cfg.hidden,
        output_width,
        cfg.activation,
        mix_seed(cfg.seed, 1),
    )?;
    let mut coral_head = if cfg.method == Method::Coral {
        Some(CoralHead::zeros(k)?)
    } else {
        None
    };

    let bias_len = coral_head.as_ref().map_or(0, |h| h.biases.len());
    let mut batch = BatchState::new(&model, bias_len);
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_accuracy = Vec::with_capacity(cfg.epochs);
    let mut val_mae = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, DenseModel, Option<CoralHead>)> = None;
    let val_head = validation_head(cfg);

    for epoch in 1..=cfg.epochs {
        let epoch_seed = mix_seed(cfg.seed, 1000 + epoch as u64);
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;

        if cfg.method.uses_pairs() {
            let pairs = sampler::epoch_pairs(ds_train, epoch_seed)?;
            for (batch_index, chunk) in pairs.chunks(cfg.batch_size).enumerate() {
                for pair in chunk {
                    let (out_i, tape_i) = model.forward(&pair.lower_features)?;
                    let (out_j, tape_j) = model.forward(&pair.upper_features)?;
                    check_finite_outputs(&out_i, epoch, batch_index)?;
                    check_finite_outputs(&out_j, epoch, batch_index)?;
                    let yi = pair.lower_class;
                    let yj = RankLabel::new(yi.get() + 1, k)?;
                    let lvg = match cfg.method {
                        Method::Thor => {
                            losses::thor_pair_loss(out_i[0], out_j[0], yi, &boundaries)?
                        }
                        Method::Cnnpor => losses::cnnpor_loss(
                            &out_i[..k],
                            &out_j[..k],
                            yi,
                            yj,
                            out_i[k],
                            out_j[k],
                            &cfg.cnnpor,
                        )?,
                        Method::Hybrid => losses::hybrid_loss(
                            &out_i[..k],
                            &out_j[..k],
                            yi,
                            yj,
                            out_i[k],
                            out_j[k],
                            &boundaries,
                            cfg.hybrid_c,
                        )?,
                        _ => unreachable!("pair stream is only built for Siamese objectives"),
                    };
                    if !lvg.value.is_finite() {
                        return Err(numeric_fault(epoch, batch_index, "non-finite loss"));
                    }
                    model.backward_into(&tape_i, &lvg.d_outputs[0], &mut batch.grads)?;
                    model.backward_into(&tape_j, &lvg.d_outputs[1], &mut batch.grads)?;
                    batch.absorb(&lvg);
                }
                let (loss_sum, count) =
                    batch.step(&mut model, &mut coral_head, cfg.lr, epoch, batch_index)?;
                epoch_loss += loss_sum;
                epoch_count += count;
            }
        } else {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..ds_train.len()).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(epoch_seed);
            order.shuffle(&mut rng);
            for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
                for &row in chunk {
                    let (out, tape) = model.forward(ds_train.row(row))?;
                    check_finite_outputs(&out, epoch, batch_index)?;
                    let target = crate::ordinal::encode_extended_binary(ds_train.label(row), k)?;
                    let lvg = match cfg.method {
                        Method::Orcnn => losses::orcnn_loss(&out, &target)?,
                        Method::Coral => {
                            let head = coral_head.as_ref().unwrap();
                            losses::coral_loss(out[head.shared_score_index], head, &target)?
                        }
                        _ => unreachable!("example stream is only built for pointwise objectives"),
                    };
                    if !lvg.value.is_finite() {
                        return Err(numeric_fault(epoch, batch_index, "non-finite loss"));
                    }
                    model.backward_into(&tape, &lvg.d_outputs[0], &mut batch.grads)?;
                    batch.absorb(&lvg);
                }
                let (loss_sum, count) =
                    batch.step(&mut model, &mut coral_head, cfg.lr, epoch, batch_index)?;
                epoch_loss += loss_sum;
                epoch_count += count;
            }
        }

        train_loss.push(epoch_loss / epoch_count as f64);

        let snapshot = TrainedModel {
            model: model.clone(),
            coral_head: coral_head.clone(),
            boundaries: boundaries.clone(),
            method: cfg.method,
        };
        let val = evaluate(&snapshot, ds_val, val_head)?;
        val_accuracy.push(val.accuracy);
        val_mae.push(val.mae);

        let metric = match cfg.select_on {
            SelectOn::Mae => val.mae,
            SelectOn::Accuracy => val.accuracy,
        };
        let improves = match (&best, cfg.select_on) {
            (None, _) => true,
            (Some((current, _, _, _)), SelectOn::Mae) => metric < *current,
            (Some((current, _, _, _)), SelectOn::Accuracy) => metric > *current,
        };
        if improves {
            best = Some((metric, epoch, model.clone(), coral_head.clone()));
        }
    }

    let (_, best_epoch, best_model, best_head) = best.expect("epochs >= 1 guarantees a best epoch");
    let trained = TrainedModel {
        model: best_model,
        coral_head: best_head,
        boundaries,
        method: cfg.method,
    };

    std::fs::create_dir_all(out_dir)?;
    let best_checkpoint = out_dir.join("best.ckpt");
    trained.save(&best_checkpoint)?;
    let report = TrainReport {
        train_loss,
        val_accuracy,
        val_mae,
        best_epoch,
        best_checkpoint,
    };
    std::fs::write(out_dir.join("report.txt"), report.render())?;

    Ok(TrainOutcome {
        report,
        model: trained,
    })
}

/// Convenience used by tests and the synthetic pipeline: generate, split,
/// train, evaluate on the test split.
pub fn train_on_split(
    spec: &data::SyntheticSpec,
    ratios: (f64, f64, f64),
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<(TrainOutcome, MetricsReport)> {
    let ds = data::generate_synthetic(spec)?;
    let (train_ds, val_ds, test_ds) = data::split(&ds, ratios, mix_seed(cfg.seed, 2))?;
    let outcome = train(&train_ds, &val_ds, cfg, out_dir)?;
    let head = validation_head(cfg);
    let test = evaluate(&outcome.model, &test_ds, head)?;
    Ok((outcome, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticSpec;

    fn tiny_spec() -> SyntheticSpec {
        SyntheticSpec {
            k: 3,
            per_class: 50,
            d: 1,
            noise: 0.0,
            transform_seed: 7,
            label_noise: 0.0,
            seed: 42,
        }
    }

    fn linear_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 50,
            hidden: vec![],
            lr: 0.05,
            ..TrainConfig::new(Method::Thor)
        }
    }

    #[test]
    fn rejects_degenerate_learning_rate() {
        let dir = tempfile::tempdir().unwrap();
        let ds = crate::data::generate_synthetic(&tiny_spec()).unwrap();
        let mut cfg = linear_cfg();
        cfg.lr = 0.0;
        cfg.epochs = 1;
        assert!(train(&ds, &ds, &cfg, dir.path()).is_err());
        cfg.lr = 0.05;
        cfg.epochs = 0;
        assert!(train(&ds, &ds, &cfg, dir.path()).is_err());
    }

    #[test]
    fn linear_separable_fixture_reaches_low_mae() {
        let dir = tempfile::tempdir().unwrap();
        let (outcome, test) =
            train_on_split(&tiny_spec(), (0.6, 0.2, 0.2), &linear_cfg(), dir.path()).unwrap();
        let last_val_mae = *outcome.report.val_mae.last().unwrap();
        assert!(last_val_mae < 0.1, "final validation MAE {last_val_mae}");
        assert!(test.mae < 0.1, "test MAE {}", test.mae);

        // Noiseless latents are exactly recoverable by the linear model.
        let ds = crate::data::generate_synthetic(&tiny_spec()).unwrap();
        let (train_ds, _, _) =
            crate::data::split(&ds, (0.6, 0.2, 0.2), mix_seed(linear_cfg().seed, 2)).unwrap();
        let on_train = evaluate(&outcome.model, &train_ds, None).unwrap();
        assert_eq!(on_train.mae, 0.0);
        assert_eq!(on_train.accuracy, 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg();
        cfg.epochs = 5;
        let (a, _) = train_on_split(&tiny_spec(), (0.6, 0.2, 0.2), &cfg, dir_a.path()).unwrap();
        let (b, _) = train_on_split(&tiny_spec(), (0.6, 0.2, 0.2), &cfg, dir_b.path()).unwrap();
        assert_eq!(a.report.train_loss, b.report.train_loss);
        assert_eq!(a.report.val_mae, b.report.val_mae);
        assert_eq!(a.report.best_epoch, b.report.best_epoch);
        assert_eq!(a.model, b.model);
        // Checkpoint bytes agree as well.
        assert_eq!(
            std::fs::read(dir_a.path().join("best.ckpt")).unwrap(),
            std::fs::read(dir_b.path().join("best.ckpt")).unwrap()
        );
    }

    #[test]
    fn best_epoch_matches_series_extremum() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg();
        cfg.epochs = 12;
        let (outcome, _) = train_on_split(&tiny_spec(), (0.6, 0.2, 0.2), &cfg, dir.path()).unwrap();
        let report = &outcome.report;
        let min = report.val_mae.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.val_mae[report.best_epoch - 1], min);
        // Earliest epoch achieving the extremum wins.
        let first = report.val_mae.iter().position(|&m| m == min).unwrap() + 1;
        assert_eq!(report.best_epoch, first);
    }

    #[test]
    fn convex_case_training_loss_descends() {
        let dir = tempfile::tempdir().unwrap();
        let (outcome, _) =
            train_on_split(&tiny_spec(), (0.6, 0.2, 0.2), &linear_cfg(), dir.path()).unwrap();
        let series = &outcome.report.train_loss;
        assert!(
            series.last().unwrap() < series.first().unwrap(),
            "loss went {} -> {}",
            series.first().unwrap(),
            series.last().unwrap()
        );
    }

    #[test]
    fn evaluate_perfect_scores() {
        // A hand-built identity model on 1-D features placed at segment midpoints.
        let boundaries = Boundaries::default_for(5).unwrap();
        let mut model = DenseModel::init(1, &[], 1, Activation::Identity, 0).unwrap();
        model.set_param(0, 1.0);
        model.set_param(1, 0.0);
        let trained = TrainedModel {
            model,
            coral_head: None,
            boundaries: boundaries.clone(),
            method: Method::Thor,
        };
        let features: Vec<f64> = (1..=5).map(|i| boundaries.segment_midpoint(i)).collect();
        let labels: Vec<RankLabel> = (1..=5).map(|i| RankLabel::new(i, 5).unwrap()).collect();
        let ds = OrdinalDataset::new(features, 1, labels, 5).unwrap();
        let report = evaluate(&trained, &ds, None).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.mae, 0.0);
        assert_eq!(report.inconsistency_rate, None);
    }

    #[test]
    fn hybrid_heads_give_distinct_reports_from_one_checkpoint() {
        // Output row layout for k = 3: three class logits then the regression
        // score. Class head always votes class 1; regression head always
        // lands in segment 2.
        let boundaries = Boundaries::default_for(3).unwrap();
        let mut model = DenseModel::init(1, &[], 4, Activation::Identity, 0).unwrap();
        for i in 0..model.param_count() {
            model.set_param(i, 0.0);
        }
        // Params: 4 weights then 4 biases. Class-1 logit bias high; the
        // regression bias sits at the midpoint of segment 2.
        model.set_param(4, 5.0);
        model.set_param(7, boundaries.segment_midpoint(2));
        let trained = TrainedModel {
            model,
            coral_head: None,
            boundaries,
            method: Method::Hybrid,
        };
        let labels: Vec<RankLabel> = (1..=3).map(|i| RankLabel::new(i, 3).unwrap()).collect();
        let ds = OrdinalDataset::new(vec![0.0, 0.0, 0.0], 1, labels, 3).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hybrid.ckpt");
        trained.save(&path).unwrap();
        let loaded =
            TrainedModel::load(&path, Method::Hybrid, Boundaries::default_for(3).unwrap()).unwrap();

        let class_report = evaluate(&loaded, &ds, Some(Head::Classification)).unwrap();
        let reg_report = evaluate(&loaded, &ds, Some(Head::Regression)).unwrap();
        assert_ne!(class_report, reg_report);
        assert!((class_report.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!((reg_report.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!((class_report.mae - 1.0).abs() < 1e-12);
        assert!((reg_report.mae - 2.0 / 3.0).abs() < 1e-12);

        // The selector is mandatory for hybrid checkpoints.
        assert!(evaluate(&loaded, &ds, None).is_err());
    }

    #[test]
    fn explicit_thresholds_drive_training_and_inference() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg();
        cfg.epochs = 3;
        cfg.boundaries = BoundarySpec::Explicit(vec![-3.0, -1.0, 1.0, 3.0]);
        let (outcome, test) =
            train_on_split(&tiny_spec(), (0.6, 0.2, 0.2), &cfg, dir.path()).unwrap();
        assert_eq!(
            outcome.model.boundaries.thresholds(),
            &[-3.0, -1.0, 1.0, 3.0]
        );
        assert!(test.mae <= 2.0);

        // Wrong cardinality is rejected before any training happens.
        cfg.boundaries = BoundarySpec::Explicit(vec![-1.0, 0.0, 1.0]);
        let ds = crate::data::generate_synthetic(&tiny_spec()).unwrap();
        assert!(matches!(
            train(&ds, &ds, &cfg, dir.path()),
            Err(Error::ThresholdCount {
                expected: 4,
                got: 3,
                ..
            })
        ));
    }

    #[test]
    fn nan_feature_aborts_with_numeric_fault() {
        let dir = tempfile::tempdir().unwrap();
        let k = 2;
        let labels = vec![RankLabel::new(1, k).unwrap(), RankLabel::new(2, k).unwrap()];
        let ds = OrdinalDataset::new(vec![f64::NAN, 0.5], 1, labels, k).unwrap();
        let mut cfg = linear_cfg();
        cfg.epochs = 1;
        match train(&ds, &ds, &cfg, dir.path()) {
            Err(e @ Error::NumericFault(_)) => assert_eq!(e.exit_code(), 2),
            other => panic!("expected numeric fault, got {other:?}"),
        }
    }

    #[test]
    fn report_render_is_line_oriented() {
        let report = TrainReport {
            train_loss: vec![0.5, 0.25],
            val_accuracy: vec![0.5, 0.75],
            val_mae: vec![1.0, 0.5],
            best_epoch: 2,
            best_checkpoint: PathBuf::from("runs/a/best.ckpt"),
        };
        let text = report.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch=1 train_loss=0.5 val_mae=1 val_acc=0.5");
        assert_eq!(lines[1], "epoch=2 train_loss=0.25 val_mae=0.5 val_acc=0.75");
        assert_eq!(lines[2], "best_epoch=2");
        assert_eq!(lines[3], "best_checkpoint=runs/a/best.ckpt");
    }

    #[test]
    fn all_methods_train_one_epoch() {
        let spec = SyntheticSpec {
            k: 3,
            per_class: 12,
            d: 2,
            noise: 0.3,
            transform_seed: 3,
            label_noise: 0.0,
            seed: 9,
        };
        for method in Method::ALL {
            let dir = tempfile::tempdir().unwrap();
            let cfg = TrainConfig {
                epochs: 2,
                hidden: vec![8],
                ..TrainConfig::new(method)
            };
            let (outcome, test) = train_on_split(&spec, (0.6, 0.2, 0.2), &cfg, dir.path()).unwrap();
            assert_eq!(outcome.report.train_loss.len(), 2);
            assert!(test.mae <= (spec.k - 1) as f64);
            assert_eq!(
                test.inconsistency_rate.is_some(),
                method.reports_inconsistency()
            );
            // Round trip through the checkpoint reproduces the model.
            let loaded = TrainedModel::load(
                &outcome.report.best_checkpoint,
                method,
                outcome.model.boundaries.clone(),
            )
            .unwrap();
            assert_eq!(loaded, outcome.model);
        }
    }
}
