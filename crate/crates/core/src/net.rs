//! Minimal feedforward network with analytic backpropagation. Hidden layers
//! share one activation; the output layer is affine. The same trunk serves
//! every training method, only the output width changes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const CHECKPOINT_HEADER: &str = "thor-ckpt v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at `z`; the rectifier takes subgradient 0 at its kink.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// Row-major `out_dim x in_dim`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for row in 0..self.out_dim {
            let w = &self.weights[row * self.in_dim..(row + 1) * self.in_dim];
            let mut acc = self.biases[row];
            for (wi, xi) in w.iter().zip(input) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// Feedforward model: a chain of affine layers with the configured activation
/// between them (not after the last). The version counter invalidates tapes
/// recorded before a parameter update.
#[derive(Debug, Clone)]
pub struct DenseModel {
    layers: Vec<Layer>,
    activation: Activation,
    version: u64,
}

/// Two models are equal when they compute the same function; the tape
/// version counter is bookkeeping, not state.
impl PartialEq for DenseModel {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.activation == other.activation
    }
}

/// Intermediates recorded by a forward pass: the input of each layer and each
/// pre-activation, as needed by the chain rule.
#[derive(Debug, Clone)]
pub struct Tape {
    layer_inputs: Vec<Vec<f64>>,
    preactivations: Vec<Vec<f64>>,
    version: u64,
}

impl Tape {
    /// Pre-activation vectors of the hidden layers (those an activation is
    /// applied to), in layer order.
    pub fn hidden_preactivations(&self) -> &[Vec<f64>] {
        &self.preactivations[..self.preactivations.len() - 1]
    }
}

/// Per-parameter accumulators, shape-congruent with a model.
#[derive(Debug, Clone)]
pub struct GradientBuffer {
    d_weights: Vec<Vec<f64>>,
    d_biases: Vec<Vec<f64>>,
}

impl GradientBuffer {
    pub fn zeros_like(model: &DenseModel) -> Self {
        GradientBuffer {
            d_weights: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            d_biases: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.d_weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.d_biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.d_weights {
            w.iter_mut().for_each(|v| *v *= factor);
        }
        for b in &mut self.d_biases {
            b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights.iter().flatten().all(|v| v.is_finite())
            && self.d_biases.iter().flatten().all(|v| v.is_finite())
    }

    pub fn layer_weight_grads(&self, layer: usize) -> &[f64] {
        &self.d_weights[layer]
    }

    pub fn layer_bias_grads(&self, layer: usize) -> &[f64] {
        &self.d_biases[layer]
    }

    /// Gradient for the flat parameter index used by [`DenseModel::param`].
    pub fn param_grad(&self, mut index: usize) -> f64 {
        for (w, b) in self.d_weights.iter().zip(&self.d_biases) {
            if index < w.len() {
                return w[index];
            }
            index -= w.len();
            if index < b.len() {
                return b[index];
            }
            index -= b.len();
        }
        panic!("parameter index out of range");
    }
}

impl DenseModel {
    /// Builds a model with weights drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` and zero biases; deterministic per
    /// seed.
    pub fn init(
        input_dim: usize,
        hidden: &[usize],
        output_width: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArchitecture(
                "input dimension must be >= 1".into(),
            ));
        }
        if output_width == 0 {
            return Err(Error::InvalidArchitecture(
                "output width must be >= 1".into(),
            ));
        }
        if let Some(w) = hidden.iter().find(|&&w| w == 0) {
            return Err(Error::InvalidArchitecture(format!(
                "hidden width must be >= 1, got {w}"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut in_dim = input_dim;
        let widths = hidden.iter().copied().chain(std::iter::once(output_width));
        for out_dim in widths {
            let bound = 1.0 / (in_dim as f64).sqrt();
            let weights = (0..out_dim * in_dim)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            layers.push(Layer {
                weights,
                biases: vec![0.0; out_dim],
                in_dim,
                out_dim,
            });
            in_dim = out_dim;
        }
        Ok(DenseModel {
            layers,
            activation,
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.out_dim)
            .collect()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_shape(&self, layer: usize) -> (usize, usize) {
        (self.layers[layer].out_dim, self.layers[layer].in_dim)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Flat parameter access: layer 0 weights (row-major), layer 0 biases,
    /// layer 1 weights, ... Used by the finite-difference audit.
    pub fn param(&self, mut index: usize) -> f64 {
        for layer in &self.layers {
            if index < layer.weights.len() {
                return layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        self.version += 1;
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                layer.weights[index] = value;
                return;
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                layer.biases[index] = value;
                return;
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// The layer a flat parameter index belongs to.
    pub fn param_layer(&self, mut index: usize) -> usize {
        for (i, layer) in self.layers.iter().enumerate() {
            let span = layer.weights.len() + layer.biases.len();
            if index < span {
                return i;
            }
            index -= span;
        }
        panic!("parameter index out of range");
    }

    /// Evaluates the network and records the intermediates needed by
    /// [`DenseModel::backward`]. Never mutates the model.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                what: "model input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let num_layers = self.layers.len();
        let mut layer_inputs = Vec::with_capacity(num_layers);
        let mut preactivations = Vec::with_capacity(num_layers);
        let mut current = input.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.affine(&current, &mut z);
            layer_inputs.push(current);
            let is_last = idx + 1 == num_layers;
            current = if is_last {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            preactivations.push(z);
        }
        let tape = Tape {
            layer_inputs,
            preactivations,
            version: self.version,
        };
        Ok((current, tape))
    }

    /// Outputs only, discarding the tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Accumulates parameter gradients into `buf` given the upstream
    /// derivative of the loss with respect to the outputs.
    pub fn backward_into(
        &self,
        tape: &Tape,
        d_outputs: &[f64],
        buf: &mut GradientBuffer,
    ) -> Result<()> {
        if tape.version != self.version {
            return Err(Error::StaleTape);
        }
        if d_outputs.len() != self.output_width() {
            return Err(Error::ShapeMismatch {
                what: "upstream gradient",
                expected: self.output_width(),
                got: d_outputs.len(),
            });
        }
        let mut delta = d_outputs.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.layer_inputs[idx];
            let dw = &mut buf.d_weights[idx];
            for (row, &g) in delta.iter().enumerate() {
                if g != 0.0 {
                    let dst = &mut dw[row * layer.in_dim..(row + 1) * layer.in_dim];
                    for (d, x) in dst.iter_mut().zip(input) {
                        *d += g * x;
                    }
                }
                buf.d_biases[idx][row] += g;
            }
            if idx > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for (row, &g) in delta.iter().enumerate() {
                    if g != 0.0 {
                        let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                        for (p, wi) in prev.iter_mut().zip(w) {
                            *p += g * wi;
                        }
                    }
                }
                let z_prev = &tape.preactivations[idx - 1];
                for (p, z) in prev.iter_mut().zip(z_prev) {
                    *p *= self.activation.derivative(*z);
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// Convenience wrapper returning a fresh buffer.
    pub fn backward(&self, tape: &Tape, d_outputs: &[f64]) -> Result<GradientBuffer> {
        let mut buf = GradientBuffer::zeros_like(self);
        self.backward_into(tape, d_outputs, &mut buf)?;
        Ok(buf)
    }

    /// `params <- params - lr * grads`. Rejects non-positive learning rates
    /// and non-finite gradients, and invalidates outstanding tapes.
    pub fn sgd_step(&mut self, grads: &GradientBuffer, lr: f64) -> Result<()> {
        if !lr.is_finite() || lr <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }
        if grads.d_weights.len() != self.layers.len() {
            return Err(Error::ShapeMismatch {
                what: "gradient buffer",
                expected: self.layers.len(),
                got: grads.d_weights.len(),
            });
        }
        if !grads.is_finite() {
            return Err(Error::NumericFault("non-finite gradient".into()));
        }
        for (layer, (dw, db)) in self
            .layers
            .iter_mut()
            .zip(grads.d_weights.iter().zip(&grads.d_biases))
        {
            if dw.len() != layer.weights.len() || db.len() != layer.biases.len() {
                return Err(Error::ShapeMismatch {
                    what: "gradient buffer layer",
                    expected: layer.weights.len(),
                    got: dw.len(),
                });
            }
            for (w, d) in layer.weights.iter_mut().zip(dw) {
                *w -= lr * d;
            }
            for (b, d) in layer.biases.iter_mut().zip(db) {
                *b -= lr * d;
            }
        }
        self.version += 1;
        Ok(())
    }
}

fn push_tensor_line(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

/// Serializes a model (plus any auxiliary parameter tensors, one line each)
/// in the versioned text checkpoint format. Values round-trip bit-exactly.
pub fn save_checkpoint(path: &Path, model: &DenseModel, aux: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    let _ = write!(out, "{}", model.input_dim());
    for w in model.hidden_widths() {
        let _ = write!(out, " {w}");
    }
    let _ = writeln!(out, " {} {}", model.output_width(), model.activation.name());
    for layer in &model.layers {
        push_tensor_line(&mut out, &layer.weights);
        push_tensor_line(&mut out, &layer.biases);
    }
    for tensor in aux {
        push_tensor_line(&mut out, tensor);
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn parse_tensor_line(path: &Path, line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(|t| t.parse::<f64>()).collect();
    let values = values.map_err(|e| Error::CheckpointFormat {
        path: path.to_path_buf(),
        msg: format!("line {line_no}: {e}"),
    })?;
    if values.len() != expected {
        return Err(Error::CheckpointFormat {
            path: path.to_path_buf(),
            msg: format!(
                "line {line_no}: expected {expected} values, got {}",
                values.len()
            ),
        });
    }
    Ok(values)
}

/// Loads a checkpoint; trailing tensor lines beyond the model's own
/// parameters are returned as auxiliary tensors.
pub fn load_checkpoint(path: &Path) -> Result<(DenseModel, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let bad = |msg: String| Error::CheckpointFormat {
        path: path.to_path_buf(),
        msg,
    };

    let (_, header) = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if header.trim_end() != CHECKPOINT_HEADER {
        return Err(bad(format!("unsupported header '{header}'")));
    }

    let (_, arch) = lines
        .next()
        .ok_or_else(|| bad("missing architecture line".into()))?;
    let tokens: Vec<&str> = arch.split_whitespace().collect();
    if tokens.len() < 3 {
        return Err(bad(format!("architecture line too short: '{arch}'")));
    }
    let activation: Activation = tokens[tokens.len() - 1].parse()?;
    let dims: std::result::Result<Vec<usize>, _> = tokens[..tokens.len() - 1]
        .iter()
        .map(|t| t.parse::<usize>())
        .collect();
    let dims = dims.map_err(|e| bad(format!("bad architecture line: {e}")))?;
    let input_dim = dims[0];
    let output_width = dims[dims.len() - 1];
    let hidden = &dims[1..dims.len() - 1];
    if input_dim == 0 || output_width == 0 || hidden.contains(&0) {
        return Err(bad("architecture dimensions must be >= 1".into()));
    }

    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut in_dim = input_dim;
    for &out_dim in hidden.iter().chain(std::iter::once(&output_width)) {
        let (no, line) = lines
            .next()
            .ok_or_else(|| bad("missing weight tensor line".into()))?;
        let weights = parse_tensor_line(path, no + 1, line, out_dim * in_dim)?;
        let (no, line) = lines
            .next()
            .ok_or_else(|| bad("missing bias tensor line".into()))?;
        let biases = parse_tensor_line(path, no + 1, line, out_dim)?;
        layers.push(Layer {
            weights,
            biases,
            in_dim,
            out_dim,
        });
        in_dim = out_dim;
    }

    let mut aux = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(|t| t.parse::<f64>()).collect();
        let values = values.map_err(|e| Error::CheckpointFormat {
            path: path.to_path_buf(),
            msg: format!("line {}: {e}", no + 1),
        })?;
        aux.push(values);
    }

    Ok((
        DenseModel {
            layers,
            activation,
            version: 0,
        },
        aux,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(layers: Vec<(Vec<f64>, Vec<f64>, usize, usize)>, act: Activation) -> DenseModel {
        DenseModel {
            layers: layers
                .into_iter()
                .map(|(weights, biases, in_dim, out_dim)| Layer {
                    weights,
                    biases,
                    in_dim,
                    out_dim,
                })
                .collect(),
            activation: act,
            version: 0,
        }
    }

    #[test]
    fn models_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<DenseModel>();
        assert_send_sync::<GradientBuffer>();
        assert_send_sync::<Tape>();
    }

    #[test]
    fn init_is_deterministic() {
        let a = DenseModel::init(4, &[8], 1, Activation::Relu, 7).unwrap();
        let b = DenseModel::init(4, &[8], 1, Activation::Relu, 7).unwrap();
        assert_eq!(a, b);
        let c = DenseModel::init(4, &[8], 1, Activation::Relu, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_no_hidden_is_single_affine_layer() {
        let m = DenseModel::init(4, &[], 1, Activation::Relu, 0).unwrap();
        assert_eq!(m.num_layers(), 1);
        assert_eq!(m.param_count(), 5);
    }

    #[test]
    fn init_dimension_chaining() {
        let m = DenseModel::init(3, &[5, 5], 4, Activation::Relu, 0).unwrap();
        assert_eq!(m.layer_shape(0), (5, 3));
        assert_eq!(m.layer_shape(1), (5, 5));
        assert_eq!(m.layer_shape(2), (4, 5));
    }

    #[test]
    fn init_rejects_zero_widths() {
        assert!(DenseModel::init(0, &[4], 1, Activation::Relu, 0).is_err());
        assert!(DenseModel::init(4, &[0], 1, Activation::Relu, 0).is_err());
        assert!(DenseModel::init(4, &[4], 0, Activation::Relu, 0).is_err());
    }

    #[test]
    fn forward_identity_layer() {
        let m = model_with(
            vec![(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 2, 2)],
            Activation::Identity,
        );
        let (out, _) = m.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn forward_constant_function() {
        let m = model_with(vec![(vec![0.0, 0.0], vec![0.3], 2, 1)], Activation::Relu);
        for x in [[0.0, 0.0], [5.0, -3.0], [100.0, 7.0]] {
            assert_eq!(m.forward(&x).unwrap().0, vec![0.3]);
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let m = DenseModel::init(4, &[], 1, Activation::Relu, 0).unwrap();
        assert!(m.forward(&[1.0, 2.0]).is_err());
    }

    // Independent straight-line re-evaluation of the affine/activation chain,
    // kept deliberately index-by-index.
    #[allow(clippy::needless_range_loop)]
    fn oracle_forward(m: &DenseModel, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for (idx, layer) in m.layers.iter().enumerate() {
            let mut next = Vec::new();
            for row in 0..layer.out_dim {
                let mut acc = layer.biases[row];
                for col in 0..layer.in_dim {
                    acc += layer.weights[row * layer.in_dim + col] * cur[col];
                }
                next.push(acc);
            }
            if idx + 1 < m.layers.len() {
                next = next.iter().map(|&z| m.activation.apply(z)).collect();
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn forward_matches_reevaluation_oracle() {
        let m = DenseModel::init(6, &[9, 5], 3, Activation::Tanh, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (out, _) = m.forward(&x).unwrap();
            let expect = oracle_forward(&m, &x);
            for (a, b) in out.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_zero_upstream_gives_zero_gradients() {
        let m = DenseModel::init(4, &[6], 2, Activation::Relu, 3).unwrap();
        let (_, tape) = m.forward(&[0.5, -1.0, 2.0, 0.1]).unwrap();
        let g = m.backward(&tape, &[0.0, 0.0]).unwrap();
        for i in 0..m.param_count() {
            assert_eq!(g.param_grad(i), 0.0);
        }
    }

    #[test]
    fn backward_single_affine_layer_identities() {
        let m = model_with(
            vec![(vec![0.2, -0.4, 0.6], vec![0.1], 3, 1)],
            Activation::Identity,
        );
        let x = [1.5, -2.0, 0.5];
        let (_, tape) = m.forward(&x).unwrap();
        let g = m.backward(&tape, &[1.0]).unwrap();
        assert_eq!(g.layer_weight_grads(0), &x);
        assert_eq!(g.layer_bias_grads(0), &[1.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Tanh keeps the surface smooth everywhere so the check cannot land
        // on a kink.
        let m = DenseModel::init(5, &[7, 6], 2, Activation::Tanh, 11).unwrap();
        let x: Vec<f64> = vec![0.3, -0.8, 1.2, 0.05, -0.4];
        let upstream = [0.7, -1.3];
        let (_, tape) = m.forward(&x).unwrap();
        let analytic = m.backward(&tape, &upstream).unwrap();

        let h = 1e-5;
        for idx in 0..m.param_count() {
            let orig = m.param(idx);
            let mut plus = m.clone();
            plus.set_param(idx, orig + h);
            let mut minus = m.clone();
            minus.set_param(idx, orig - h);
            let f = |model: &DenseModel| -> f64 {
                let out = model.predict(&x).unwrap();
                out.iter().zip(&upstream).map(|(o, u)| o * u).sum()
            };
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let a = analytic.param_grad(idx);
            let denom = a.abs().max(fd.abs()).max(1e-8);
            assert!(
                (a - fd).abs() / denom < 1e-4,
                "param {idx}: analytic {a} vs fd {fd}"
            );
        }
    }

    #[test]
    fn sgd_rejects_zero_learning_rate() {
        let mut m = DenseModel::init(2, &[], 1, Activation::Relu, 0).unwrap();
        let g = GradientBuffer::zeros_like(&m);
        assert!(m.sgd_step(&g, 0.0).is_err());
        assert!(m.sgd_step(&g, -0.1).is_err());
    }

    #[test]
    fn sgd_single_weight_arithmetic() {
        let mut m = model_with(vec![(vec![1.0], vec![0.0], 1, 1)], Activation::Identity);
        let mut g = GradientBuffer::zeros_like(&m);
        g.d_weights[0][0] = 2.0;
        m.sgd_step(&g, 0.1).unwrap();
        assert!((m.param(0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_two_steps_equal_summed_delta() {
        let mut a = DenseModel::init(3, &[4], 2, Activation::Relu, 5).unwrap();
        let mut b = a.clone();
        let mut g = GradientBuffer::zeros_like(&a);
        for (i, w) in g.d_weights.iter_mut().enumerate() {
            w.iter_mut()
                .enumerate()
                .for_each(|(j, v)| *v = (i + j) as f64 * 0.01);
        }
        a.sgd_step(&g, 0.1).unwrap();
        a.sgd_step(&g, 0.1).unwrap();
        b.sgd_step(&g, 0.2).unwrap();
        for i in 0..a.param_count() {
            assert!((a.param(i) - b.param(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn sgd_rejects_non_finite_gradients() {
        let mut m = DenseModel::init(2, &[], 1, Activation::Relu, 0).unwrap();
        let mut g = GradientBuffer::zeros_like(&m);
        g.d_weights[0][0] = f64::NAN;
        assert!(matches!(m.sgd_step(&g, 0.1), Err(Error::NumericFault(_))));
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut m = DenseModel::init(2, &[3], 1, Activation::Relu, 0).unwrap();
        let (_, tape) = m.forward(&[1.0, -1.0]).unwrap();
        let g = m.backward(&tape, &[1.0]).unwrap();
        m.sgd_step(&g, 0.1).unwrap();
        assert!(matches!(m.backward(&tape, &[1.0]), Err(Error::StaleTape)));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut m = DenseModel::init(4, &[6, 3], 2, Activation::Tanh, 17).unwrap();
        // Push parameters through a few updates so they are not "nice" values.
        let (_, tape) = m.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = m.backward(&tape, &[1.0, -1.0]).unwrap();
        m.sgd_step(&g, 0.0137).unwrap();

        let aux = vec![vec![0.1, -0.25, 1.0 / 3.0]];
        save_checkpoint(&path, &m, &aux).unwrap();
        let (loaded, loaded_aux) = load_checkpoint(&path).unwrap();
        for i in 0..m.param_count() {
            assert_eq!(m.param(i).to_bits(), loaded.param(i).to_bits());
        }
        assert_eq!(loaded_aux.len(), 1);
        for (a, b) in aux[0].iter().zip(&loaded_aux[0]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(loaded.activation(), Activation::Tanh);
        assert_eq!(loaded.hidden_widths(), vec![6, 3]);

        // Saving the loaded model again reproduces identical bytes.
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded, &loaded_aux).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn checkpoint_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "thor-ckpt v9\n2 1 relu\n").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn checkpoint_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.ckpt");
        std::fs::write(
            &path,
            format!("{CHECKPOINT_HEADER}\n2 3 1 relu\n1 2 3 4 5 6\n"),
        )
        .unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
