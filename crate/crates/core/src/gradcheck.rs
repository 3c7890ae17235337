//! Finite-difference audit of every loss composed with the network trunk.
//!
//! The oracle path only ever calls `forward` on perturbed parameter copies,
//! so it stays independent of the analytic backward pass it certifies.
//! Parameters whose finite-difference step could cross a non-smooth point (a
//! hinge argument or a rectifier pre-activation near zero) are excluded and
//! reported rather than checked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{self, CnnporConfig, CoralHead, LossValueAndGrad, Method};
use crate::net::{Activation, DenseModel, GradientBuffer};
use crate::ordinal::{encode_extended_binary, Boundaries, RankLabel};
use crate::trainer::mix_seed;

#[derive(Debug, Clone)]
pub struct GradCheckSettings {
    pub k: usize,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub step: f64,
    pub tolerance: f64,
    pub kink_epsilon: f64,
    pub seeds: u64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            k: 5,
            input_dim: 5,
            hidden: vec![8, 7],
            step: 1e-5,
            tolerance: 1e-4,
            kink_epsilon: 1e-3,
            seeds: 20,
        }
    }
}

/// Aggregated audit result for one loss.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub method: Method,
    pub max_rel_err: f64,
    pub checked: usize,
    pub excluded: usize,
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.failures == 0 && self.max_rel_err < tolerance
    }
}

enum CaseInputs {
    Pair {
        lower: Vec<f64>,
        upper: Vec<f64>,
        lower_class: RankLabel,
        upper_class: RankLabel,
    },
    Single {
        x: Vec<f64>,
        y: RankLabel,
    },
}

/// One random loss instance: inputs, targets and head state are frozen; the
/// model (and coral biases) are what gets perturbed.
struct Case {
    method: Method,
    inputs: CaseInputs,
    boundaries: Boundaries,
    coral: Option<CoralHead>,
    cnnpor: CnnporConfig,
    hybrid_c: f64,
    k: usize,
}

impl Case {
    fn sample(method: Method, settings: &GradCheckSettings, seed: u64) -> Result<Case> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 77));
        let k = settings.k;
        let boundaries = Boundaries::default_for(k)?;
        let draw_x = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..settings.input_dim)
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect()
        };
        let inputs = if method.uses_pairs() {
            let lower = RankLabel::new(rng.gen_range(1..k), k)?;
            let upper = RankLabel::new(lower.get() + 1, k)?;
            CaseInputs::Pair {
                lower: draw_x(&mut rng),
                upper: draw_x(&mut rng),
                lower_class: lower,
                upper_class: upper,
            }
        } else {
            CaseInputs::Single {
                x: draw_x(&mut rng),
                y: RankLabel::new(rng.gen_range(1..=k), k)?,
            }
        };
        let coral = if method == Method::Coral {
            let biases: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Some(CoralHead::new(biases)?)
        } else {
            None
        };
        Ok(Case {
            method,
            inputs,
            boundaries,
            coral,
            cnnpor: CnnporConfig::default(),
            hybrid_c: 1.0,
            k,
        })
    }

    fn eval(&self, model: &DenseModel, coral: &Option<CoralHead>) -> Result<LossValueAndGrad> {
        match (&self.inputs, self.method) {
            (
                CaseInputs::Pair {
                    lower,
                    upper,
                    lower_class,
                    upper_class,
                },
                method,
            ) => {
                let out_i = model.predict(lower)?;
                let out_j = model.predict(upper)?;
                match method {
                    Method::Thor => {
                        losses::thor_pair_loss(out_i[0], out_j[0], *lower_class, &self.boundaries)
                    }
                    Method::Cnnpor => losses::cnnpor_loss(
                        &out_i[..self.k],
                        &out_j[..self.k],
                        *lower_class,
                        *upper_class,
                        out_i[self.k],
                        out_j[self.k],
                        &self.cnnpor,
                    ),
                    Method::Hybrid => losses::hybrid_loss(
                        &out_i[..self.k],
                        &out_j[..self.k],
                        *lower_class,
                        *upper_class,
                        out_i[self.k],
                        out_j[self.k],
                        &self.boundaries,
                        self.hybrid_c,
                    ),
                    _ => unreachable!("pair inputs imply a Siamese objective"),
                }
            }
            (CaseInputs::Single { x, y }, method) => {
                let out = model.predict(x)?;
                let target = encode_extended_binary(*y, self.k)?;
                match method {
                    Method::Orcnn => losses::orcnn_loss(&out, &target),
                    Method::Coral => {
                        let head = coral.as_ref().expect("coral case carries a head");
                        losses::coral_loss(out[head.shared_score_index], head, &target)
                    }
                    _ => unreachable!("single inputs imply a pointwise objective"),
                }
            }
        }
    }

    fn loss_value(&self, model: &DenseModel, coral: &Option<CoralHead>) -> Result<f64> {
        Ok(self.eval(model, coral)?.value)
    }

    /// Analytic parameter gradients via the backward pass under audit.
    fn analytic(&self, model: &DenseModel) -> Result<(GradientBuffer, Option<Vec<f64>>)> {
        let mut buf = GradientBuffer::zeros_like(model);
        let lvg = match &self.inputs {
            CaseInputs::Pair { lower, upper, .. } => {
                let (_, tape_i) = model.forward(lower)?;
                let (_, tape_j) = model.forward(upper)?;
                let lvg = self.eval(model, &self.coral)?;
                model.backward_into(&tape_i, &lvg.d_outputs[0], &mut buf)?;
                model.backward_into(&tape_j, &lvg.d_outputs[1], &mut buf)?;
                lvg
            }
            CaseInputs::Single { x, .. } => {
                let (_, tape) = model.forward(x)?;
                let lvg = self.eval(model, &self.coral)?;
                model.backward_into(&tape, &lvg.d_outputs[0], &mut buf)?;
                lvg
            }
        };
        Ok((buf, lvg.d_head_biases))
    }

    /// Loss hinge arguments at the unperturbed point.
    fn hinge_args(&self, model: &DenseModel) -> Result<Vec<f64>> {
        match (&self.inputs, self.method) {
            (
                CaseInputs::Pair {
                    lower,
                    upper,
                    lower_class,
                    ..
                },
                Method::Thor,
            ) => {
                let fi = model.predict(lower)?[0];
                let fj = model.predict(upper)?[0];
                Ok(losses::thor_hinge_args(fi, fj, *lower_class, &self.boundaries)?.to_vec())
            }
            (
                CaseInputs::Pair {
                    lower,
                    upper,
                    lower_class,
                    ..
                },
                Method::Hybrid,
            ) => {
                let fi = model.predict(lower)?[self.k];
                let fj = model.predict(upper)?[self.k];
                Ok(losses::thor_hinge_args(fi, fj, *lower_class, &self.boundaries)?.to_vec())
            }
            (CaseInputs::Pair { lower, upper, .. }, Method::Cnnpor) => {
                let ri = model.predict(lower)?[self.k];
                let rj = model.predict(upper)?[self.k];
                Ok(vec![self.cnnpor.pair_margin - (rj - ri)])
            }
            _ => Ok(Vec::new()),
        }
    }

    /// Deepest layer whose rectifier pre-activations sit within
    /// `kink_epsilon` of zero, across every forward pass of the case.
    /// Parameters in that layer or any earlier one are excluded: perturbing
    /// them can flip the unit and break the finite-difference estimate.
    fn deepest_kink_layer(&self, model: &DenseModel, eps: f64) -> Result<Option<usize>> {
        if model.activation() != Activation::Relu {
            return Ok(None);
        }
        let passes: Vec<&[f64]> = match &self.inputs {
            CaseInputs::Pair { lower, upper, .. } => vec![lower, upper],
            CaseInputs::Single { x, .. } => vec![x],
        };
        let mut deepest = None;
        for x in passes {
            let (_, tape) = model.forward(x)?;
            for (layer, preact) in tape.hidden_preactivations().iter().enumerate() {
                if preact.iter().any(|z| z.abs() <= eps) {
                    deepest = Some(deepest.map_or(layer, |d: usize| d.max(layer)));
                }
            }
        }
        Ok(deepest)
    }
}

/// Relative error between the analytic and finite-difference gradients.
/// Differences below 1e-8 count as agreement: a central difference of an
/// O(1) loss at step 1e-5 carries about 1e-10 of rounding noise, which would
/// otherwise register as a 100% relative error wherever the true gradient is
/// exactly zero (e.g. Siamese contributions cancelling on a shared bias).
fn rel_err(analytic: f64, fd: f64) -> f64 {
    let diff = (analytic - fd).abs();
    if diff < 1e-8 {
        0.0
    } else {
        diff / analytic.abs().max(fd.abs())
    }
}

/// Audits one loss over `settings.seeds` random cases.
pub fn check_method(method: Method, settings: &GradCheckSettings) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        method,
        max_rel_err: 0.0,
        checked: 0,
        excluded: 0,
        failures: 0,
    };
    for seed in 0..settings.seeds {
        let case = Case::sample(method, settings, seed)?;
        let model = DenseModel::init(
            settings.input_dim,
            &settings.hidden,
            method.output_width(settings.k),
            Activation::Relu,
            mix_seed(seed, 11),
        )?;
        let (analytic, bias_grads) = case.analytic(&model)?;

        let hinge_kink = case
            .hinge_args(&model)?
            .iter()
            .any(|arg| arg.abs() <= settings.kink_epsilon);
        let kink_layer = case.deepest_kink_layer(&model, settings.kink_epsilon)?;

        for index in 0..model.param_count() {
            if hinge_kink || kink_layer.is_some_and(|deep| model.param_layer(index) <= deep) {
                report.excluded += 1;
                continue;
            }
            let base = model.param(index);
            let mut plus = model.clone();
            plus.set_param(index, base + settings.step);
            let mut minus = model.clone();
            minus.set_param(index, base - settings.step);
            let fd = (case.loss_value(&plus, &case.coral)?
                - case.loss_value(&minus, &case.coral)?)
                / (2.0 * settings.step);
            let err = rel_err(analytic.param_grad(index), fd);
            report.checked += 1;
            report.max_rel_err = report.max_rel_err.max(err);
            if err >= settings.tolerance {
                report.failures += 1;
            }
        }

        // Coral bias parameters go through the same audit; the sigmoid path
        // is smooth, so only the loss-level exclusion applies.
        if let (Some(head), Some(d_biases)) = (&case.coral, &bias_grads) {
            for (bias_index, &analytic_bias) in d_biases.iter().enumerate() {
                if hinge_kink {
                    report.excluded += 1;
                    continue;
                }
                let mut plus_head = head.clone();
                plus_head.biases[bias_index] += settings.step;
                let mut minus_head = head.clone();
                minus_head.biases[bias_index] -= settings.step;
                let fd = (case.loss_value(&model, &Some(plus_head))?
                    - case.loss_value(&model, &Some(minus_head))?)
                    / (2.0 * settings.step);
                let err = rel_err(analytic_bias, fd);
                report.checked += 1;
                report.max_rel_err = report.max_rel_err.max(err);
                if err >= settings.tolerance {
                    report.failures += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Audits every loss with shared settings.
pub fn check_all(settings: &GradCheckSettings) -> Result<Vec<GradCheckReport>> {
    Method::ALL
        .iter()
        .map(|&method| check_method(method, settings))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_loss_passes_the_audit() {
        let settings = GradCheckSettings {
            seeds: 5,
            ..GradCheckSettings::default()
        };
        for report in check_all(&settings).unwrap() {
            assert!(
                report.passed(settings.tolerance),
                "{}: max_rel_err={} failures={} checked={}",
                report.method,
                report.max_rel_err,
                report.failures,
                report.checked
            );
            assert!(report.checked > 0);
        }
    }

    #[test]
    fn rel_err_absorbs_float_noise_but_flags_real_gaps() {
        assert_eq!(rel_err(0.0, 0.0), 0.0);
        assert_eq!(rel_err(0.0, 5e-12), 0.0);
        assert!(rel_err(1.0, 1.1) > 0.09);
        assert_eq!(rel_err(0.0, 1e-3), 1.0);
    }
}
