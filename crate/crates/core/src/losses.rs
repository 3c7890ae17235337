//! Training objectives and their gradients with respect to model outputs.
//!
//! Five methods share the trunk in [`crate::net`]:
//! * `thor` — pairwise thresholded ranking loss against fixed boundaries,
//! * `orcnn` — independent per-task sigmoid cross-entropy on extended-binary targets,
//! * `coral` — the same tasks driven by one shared logit plus independent biases,
//! * `cnnpor` — softmax classification plus a pairwise hinge on a regression head,
//! * `hybrid` — softmax classification plus the thresholded ranking term.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ordinal::{Boundaries, ExtendedBinaryLabel, RankLabel};

/// Loss selection shared by the trainer, benchmark harness and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Thor,
    Orcnn,
    Coral,
    Cnnpor,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Thor,
        Method::Orcnn,
        Method::Coral,
        Method::Cnnpor,
        Method::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Thor => "thor",
            Method::Orcnn => "orcnn",
            Method::Coral => "coral",
            Method::Cnnpor => "cnnpor",
            Method::Hybrid => "hybrid",
        }
    }

    /// Width of the model output this method trains: a single score, one
    /// logit per binary task, or `k` class logits plus a regression score.
    pub fn output_width(self, k: usize) -> usize {
        match self {
            Method::Thor | Method::Coral => 1,
            Method::Orcnn => k - 1,
            Method::Cnnpor | Method::Hybrid => k + 1,
        }
    }

    /// Siamese objectives consume adjacent-class pairs; the rest consume
    /// single examples.
    pub fn uses_pairs(self) -> bool {
        matches!(self, Method::Thor | Method::Cnnpor | Method::Hybrid)
    }

    /// Methods built from independent binary decisions report how often those
    /// decisions are mutually inconsistent.
    pub fn reports_inconsistency(self) -> bool {
        matches!(self, Method::Orcnn | Method::Coral)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thor" => Ok(Method::Thor),
            "orcnn" => Ok(Method::Orcnn),
            "coral" => Ok(Method::Coral),
            "cnnpor" => Ok(Method::Cnnpor),
            "hybrid" => Ok(Method::Hybrid),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// A loss value with its gradients. `d_outputs` holds one vector per example
/// in the call, aligned element-for-element with that example's model
/// outputs. Head parameters that are not model outputs (the coral biases)
/// get their own field.
#[derive(Debug, Clone)]
pub struct LossValueAndGrad {
    pub value: f64,
    pub d_outputs: Vec<Vec<f64>>,
    pub d_head_biases: Option<Vec<f64>>,
}

impl LossValueAndGrad {
    fn new(value: f64, d_outputs: Vec<Vec<f64>>) -> Self {
        LossValueAndGrad {
            value,
            d_outputs,
            d_head_biases: None,
        }
    }
}

/// Weights of the combined classification + pairwise objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnnporConfig {
    pub c: f64,
    pub pair_margin: f64,
}

impl Default for CnnporConfig {
    fn default() -> Self {
        CnnporConfig {
            c: 1.0,
            pair_margin: 1.0,
        }
    }
}

impl CnnporConfig {
    pub fn new(c: f64, pair_margin: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cnnpor weight c must be >= 0, got {c}"
            )));
        }
        if !pair_margin.is_finite() || pair_margin < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "pair margin must be >= 0, got {pair_margin}"
            )));
        }
        Ok(CnnporConfig { c, pair_margin })
    }
}

/// The coral head: `k - 1` binary tasks fed by one shared model output and
/// independent trainable bias units.
#[derive(Debug, Clone, PartialEq)]
pub struct CoralHead {
    pub shared_score_index: usize,
    pub biases: Vec<f64>,
}

impl CoralHead {
    pub fn new(biases: Vec<f64>) -> Result<Self> {
        if biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig("coral biases must be finite".into()));
        }
        Ok(CoralHead {
            shared_score_index: 0,
            biases,
        })
    }

    pub fn zeros(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidClassCount { k });
        }
        CoralHead::new(vec![0.0; k - 1])
    }

    /// Per-task decisions for a shared logit: task `k` fires when
    /// `sigma(z + bias[k]) > 0.5`, i.e. `z + bias[k] > 0`.
    pub fn decisions(&self, shared_logit: f64) -> Vec<bool> {
        self.biases.iter().map(|b| shared_logit + b > 0.0).collect()
    }

    pub fn biases_non_increasing(&self) -> bool {
        self.biases.windows(2).all(|p| p[0] >= p[1])
    }
}

fn hinge(arg: f64) -> f64 {
    arg.max(0.0)
}

/// Subgradient of `[arg]_+` in `arg`; 0 at the kink.
fn hinge_active(arg: f64) -> bool {
    arg > 0.0
}

fn check_pair_index(i: RankLabel, k: usize) -> Result<()> {
    if i.get() >= k {
        return Err(Error::InvalidPair { lower: i.get(), k });
    }
    Ok(())
}

/// The four hinge arguments of the pairwise thresholded ranking loss for a
/// pair drawn from classes `i` and `i + 1`, in term order.
pub fn thor_hinge_args(fi: f64, fj: f64, i: RankLabel, b: &Boundaries) -> Result<[f64; 4]> {
    check_pair_index(i, b.k())?;
    let t = b.thresholds();
    let gamma = b.margin();
    let (lo, mid, hi) = (t[i.get() - 1], t[i.get()], t[i.get() + 1]);
    Ok([
        gamma + lo - fi,
        gamma - mid + fi,
        gamma + mid - fj,
        gamma - hi + fj,
    ])
}

/// Pairwise thresholded ranking loss: hinges keep `fi` inside the
/// margin-shrunk segment of class `i` and `fj` inside that of class `i + 1`.
/// Returns exact subgradients with respect to the two scores.
pub fn thor_pair_loss(fi: f64, fj: f64, i: RankLabel, b: &Boundaries) -> Result<LossValueAndGrad> {
    let args = thor_hinge_args(fi, fj, i, b)?;
    let value: f64 = args.iter().copied().map(hinge).sum();
    let mut d_fi = 0.0;
    if hinge_active(args[0]) {
        d_fi -= 1.0;
    }
    if hinge_active(args[1]) {
        d_fi += 1.0;
    }
    let mut d_fj = 0.0;
    if hinge_active(args[2]) {
        d_fj -= 1.0;
    }
    if hinge_active(args[3]) {
        d_fj += 1.0;
    }
    Ok(LossValueAndGrad::new(value, vec![vec![d_fi], vec![d_fj]]))
}

/// Counts strict segment violations for a pair from classes `i` and `i + 1`:
/// each score below its lower threshold or above its upper one adds one.
/// This is the 0/1 error the hinge loss upper-bounds; used by tests and the
/// acceptance suite.
pub fn thor_violation_count(fi: f64, fj: f64, i: RankLabel, b: &Boundaries) -> Result<u32> {
    check_pair_index(i, b.k())?;
    let t = b.thresholds();
    let (lo, mid, hi) = (t[i.get() - 1], t[i.get()], t[i.get() + 1]);
    let mut count = 0;
    if fi < lo {
        count += 1;
    }
    if fi > mid {
        count += 1;
    }
    if fj < mid {
        count += 1;
    }
    if fj > hi {
        count += 1;
    }
    Ok(count)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Cross-entropy of a sigmoid task against a 0/1 target, on the logit.
fn bce_with_logit(z: f64, target: bool) -> (f64, f64) {
    let t = if target { 1.0 } else { 0.0 };
    (softplus(z) - t * z, sigmoid(z) - t)
}

/// Sum of independent per-task sigmoid cross-entropies against the
/// extended-binary target bits.
pub fn orcnn_loss(logits: &[f64], target: &ExtendedBinaryLabel) -> Result<LossValueAndGrad> {
    if logits.len() != target.len() {
        return Err(Error::ShapeMismatch {
            what: "orcnn logits",
            expected: target.len(),
            got: logits.len(),
        });
    }
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(target.bits()) {
        let (v, g) = bce_with_logit(z, t);
        value += v;
        grad.push(g);
    }
    Ok(LossValueAndGrad::new(value, vec![grad]))
}

/// Per-task sigmoid cross-entropy on `shared_logit + bias[k]`. The shared
/// logit receives the summed task gradients; each bias receives its own.
pub fn coral_loss(
    shared_logit: f64,
    head: &CoralHead,
    target: &ExtendedBinaryLabel,
) -> Result<LossValueAndGrad> {
    if head.biases.len() != target.len() {
        return Err(Error::ShapeMismatch {
            what: "coral biases",
            expected: target.len(),
            got: head.biases.len(),
        });
    }
    let mut value = 0.0;
    let mut d_shared = 0.0;
    let mut d_biases = Vec::with_capacity(head.biases.len());
    for (&bias, &t) in head.biases.iter().zip(target.bits()) {
        let (v, g) = bce_with_logit(shared_logit + bias, t);
        value += v;
        d_shared += g;
        d_biases.push(g);
    }
    let mut out = LossValueAndGrad::new(value, vec![vec![d_shared]]);
    out.d_head_biases = Some(d_biases);
    Ok(out)
}

/// Stable softmax cross-entropy against a rank target; returns the loss and
/// `softmax(logits) - onehot(y)`.
fn softmax_ce(logits: &[f64], y: RankLabel) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if y.get() > k {
        return Err(Error::InvalidLabel {
            value: y.get() as i64,
            k,
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let value = lse - logits[y.get() - 1];
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - lse).exp()).collect();
    grad[y.get() - 1] -= 1.0;
    Ok((value, grad))
}

fn check_adjacent(yi: RankLabel, yj: RankLabel) -> Result<()> {
    if yj.get() != yi.get() + 1 {
        return Err(Error::NonAdjacentPair {
            lower: yi.get(),
            upper: yj.get(),
        });
    }
    Ok(())
}

/// Combined objective for an adjacent pair: softmax cross-entropy of both
/// examples' class logits plus `c` times a hinge pushing the upper example's
/// regression output at least `pair_margin` above the lower one's.
///
/// Gradient layout: one vector per example, class-logit entries first and the
/// regression entry last, matching a `k + 1`-wide model output.
pub fn cnnpor_loss(
    class_logits_i: &[f64],
    class_logits_j: &[f64],
    yi: RankLabel,
    yj: RankLabel,
    ri: f64,
    rj: f64,
    cfg: &CnnporConfig,
) -> Result<LossValueAndGrad> {
    check_adjacent(yi, yj)?;
    if class_logits_i.len() != class_logits_j.len() {
        return Err(Error::ShapeMismatch {
            what: "cnnpor class logits",
            expected: class_logits_i.len(),
            got: class_logits_j.len(),
        });
    }
    let (ce_i, mut grad_i) = softmax_ce(class_logits_i, yi)?;
    let (ce_j, mut grad_j) = softmax_ce(class_logits_j, yj)?;
    let arg = cfg.pair_margin - (rj - ri);
    let l2 = hinge(arg);
    let (mut d_ri, mut d_rj) = (0.0, 0.0);
    if hinge_active(arg) {
        d_ri = cfg.c;
        d_rj = -cfg.c;
    }
    grad_i.push(d_ri);
    grad_j.push(d_rj);
    Ok(LossValueAndGrad::new(
        ce_i + ce_j + cfg.c * l2,
        vec![grad_i, grad_j],
    ))
}

/// Classification term of `cnnpor` combined with the thresholded ranking
/// term: a shared trunk feeding `k` class logits and one regression score per
/// example. Gradient layout matches [`cnnpor_loss`].
#[allow(clippy::too_many_arguments)]
pub fn hybrid_loss(
    class_logits_i: &[f64],
    class_logits_j: &[f64],
    yi: RankLabel,
    yj: RankLabel,
    fi: f64,
    fj: f64,
    b: &Boundaries,
    c: f64,
) -> Result<LossValueAndGrad> {
    check_adjacent(yi, yj)?;
    if !c.is_finite() || c < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "hybrid weight c must be >= 0, got {c}"
        )));
    }
    if class_logits_i.len() != b.k() || class_logits_j.len() != b.k() {
        return Err(Error::ShapeMismatch {
            what: "hybrid class logits",
            expected: b.k(),
            got: class_logits_i.len().max(class_logits_j.len()),
        });
    }
    let (ce_i, mut grad_i) = softmax_ce(class_logits_i, yi)?;
    let (ce_j, mut grad_j) = softmax_ce(class_logits_j, yj)?;
    let ranking = thor_pair_loss(fi, fj, yi, b)?;
    grad_i.push(c * ranking.d_outputs[0][0]);
    grad_j.push(c * ranking.d_outputs[1][0]);
    Ok(LossValueAndGrad::new(
        ce_i + ce_j + c * ranking.value,
        vec![grad_i, grad_j],
    ))
}
