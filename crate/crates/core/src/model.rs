//! Target classifier: a linear or one-hidden-layer softmax model with exact
//! per-example gradients and a decoupled-weight-decay Adam optimizer.
//!
//! Parameters live in one flat vector. For the linear model the layout is
//! `W[K][D]` (row-major) followed by `b[K]`. The hidden-layer model stores
//! `W1[H][D]`, `b1[H]`, `W2[K][H]`, `b2[K]`; the output block (`W2`, `b2`)
//! is always the tail of the vector, which is what the gradient-norm
//! selectors measure.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::error::{Error, Result};

/// Probability floor applied before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    Linear,
    MlpOneHidden { hidden_width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    /// Number of feature columns in the dataset.
    pub input_dim: usize,
    pub num_classes: usize,
    /// Append the group index as one extra input.
    pub include_sensitive_as_feature: bool,
}

impl ModelSpec {
    pub fn linear(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            architecture: Architecture::Linear,
            input_dim,
            num_classes,
            include_sensitive_as_feature: false,
        }
    }

    pub fn mlp(input_dim: usize, hidden_width: usize, num_classes: usize) -> Self {
        ModelSpec {
            architecture: Architecture::MlpOneHidden { hidden_width },
            input_dim,
            num_classes,
            include_sensitive_as_feature: false,
        }
    }

    pub fn with_sensitive(mut self, include: bool) -> Self {
        self.include_sensitive_as_feature = include;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::input("input_dim must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::input("num_classes must be at least 2"));
        }
        if let Architecture::MlpOneHidden { hidden_width } = self.architecture {
            if hidden_width == 0 {
                return Err(Error::input("hidden_width must be at least 1"));
            }
        }
        Ok(())
    }

    /// Width of the vector actually fed to the first layer.
    pub fn model_input_dim(&self) -> usize {
        self.input_dim + usize::from(self.include_sensitive_as_feature)
    }

    pub fn num_params(&self) -> usize {
        let d = self.model_input_dim();
        let k = self.num_classes;
        match self.architecture {
            Architecture::Linear => k * d + k,
            Architecture::MlpOneHidden { hidden_width: h } => h * d + h + k * h + k,
        }
    }

    /// Range of the output-layer block (weights then biases) in the flat vector.
    pub fn last_layer_range(&self) -> std::ops::Range<usize> {
        let n = self.num_params();
        let k = self.num_classes;
        let fan_in = match self.architecture {
            Architecture::Linear => self.model_input_dim(),
            Architecture::MlpOneHidden { hidden_width } => hidden_width,
        };
        n - (k * fan_in + k)..n
    }
}

/// A model specification together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<f64>,
}

impl Model {
    pub fn new(spec: ModelSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.num_params() {
            return Err(Error::input(format!(
                "parameter vector has {} entries, spec needs {}",
                params.len(),
                spec.num_params()
            )));
        }
        Ok(Model { spec, params })
    }

    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        Model::new(spec, vec![0.0; spec.num_params()])
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let d = spec.model_input_dim();
        let k = spec.num_classes;
        let mut params = Vec::with_capacity(spec.num_params());
        let mut push_layer = |fan_out: usize, fan_in: usize, params: &mut Vec<f64>| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_out * fan_in {
                params.push(rng.random_range(-limit..=limit));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        };
        match spec.architecture {
            Architecture::Linear => push_layer(k, d, &mut params),
            Architecture::MlpOneHidden { hidden_width: h } => {
                push_layer(h, d, &mut params);
                push_layer(k, h, &mut params);
            }
        }
        Model::new(spec, params)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    /// Builds the first-layer input for an example.
    pub fn input_for(&self, example: &Example) -> Result<Vec<f64>> {
        if example.features.len() != self.spec.input_dim {
            return Err(Error::input(format!(
                "example {} has {} features, model expects {}",
                example.id,
                example.features.len(),
                self.spec.input_dim
            )));
        }
        let mut x = example.features.clone();
        if self.spec.include_sensitive_as_feature {
            x.push(example.s as f64);
        }
        Ok(x)
    }

    fn check_finite(&self) -> Result<()> {
        match self.params.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(Error::numeric(format!("parameter {i} is not finite"))),
            None => Ok(()),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let d = self.spec.model_input_dim();
        if x.len() != d {
            return Err(Error::input(format!(
                "input has dimension {}, model expects {d}",
                x.len()
            )));
        }
        Ok(())
    }

    /// Runs the network on a prepared input; returns (hidden activations, logits).
    fn activations(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.spec.model_input_dim();
        let k = self.spec.num_classes;
        match self.spec.architecture {
            Architecture::Linear => {
                let (w, b) = self.params.split_at(k * d);
                (Vec::new(), affine(w, b, x))
            }
            Architecture::MlpOneHidden { hidden_width: h } => {
                let (w1, rest) = self.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(k * h);
                let hidden: Vec<f64> = affine(w1, b1, x).into_iter().map(f64::tanh).collect();
                let logits = affine(w2, b2, &hidden);
                (hidden, logits)
            }
        }
    }

    /// Class probabilities for a prepared input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_finite()?;
        let (_, logits) = self.activations(x);
        Ok(softmax(&logits))
    }

    pub fn predict_proba(&self, example: &Example) -> Result<Vec<f64>> {
        self.forward(&self.input_for(example)?)
    }

    /// Cross-entropy of the example's observed label.
    pub fn example_loss(&self, example: &Example) -> Result<f64> {
        cross_entropy(&self.predict_proba(example)?, example.y)
    }

    /// Exact gradient of the cross-entropy loss for `label` at input `x`.
    pub fn loss_grad(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_finite()?;
        let k = self.spec.num_classes;
        if label >= k {
            return Err(Error::input(format!("label {label} out of range for {k} classes")));
        }
        let d = x.len();
        let (hidden, logits) = self.activations(x);
        let mut delta = softmax(&logits);
        delta[label] -= 1.0;

        let mut grad = vec![0.0; self.params.len()];
        match self.spec.architecture {
            Architecture::Linear => {
                let (gw, gb) = grad.split_at_mut(k * d);
                outer_into(gw, &delta, x);
                gb.copy_from_slice(&delta);
            }
            Architecture::MlpOneHidden { hidden_width: h } => {
                let w2 = &self.params[h * d + h..h * d + h + k * h];
                let (gw1, rest) = grad.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(k * h);
                outer_into(gw2, &delta, &hidden);
                gb2.copy_from_slice(&delta);
                // back through W2 and tanh
                for j in 0..h {
                    let back: f64 = (0..k).map(|c| w2[c * h + j] * delta[c]).sum();
                    gb1[j] = back * (1.0 - hidden[j] * hidden[j]);
                }
                outer_into(gw1, gb1, x);
            }
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::numeric(format!("gradient entry {i} is not finite")));
        }
        Ok(grad)
    }

    pub fn example_grad(&self, example: &Example) -> Result<Vec<f64>> {
        self.loss_grad(&self.input_for(example)?, example.y)
    }

    /// Euclidean norm of the output-layer block of the per-example gradient.
    pub fn example_grad_norm(&self, example: &Example) -> Result<f64> {
        let grad = self.example_grad(example)?;
        Ok(l2_norm(&grad[self.spec.last_layer_range()]))
    }

    /// Largest relative error between the analytic gradient and central
    /// differences with step `eps`, over all parameters.
    pub fn finite_difference_check(&self, x: &[f64], label: usize, eps: f64) -> Result<f64> {
        if !(1e-7..=1e-3).contains(&eps) {
            return Err(Error::input(format!("eps {eps} outside [1e-7, 1e-3]")));
        }
        let analytic = self.loss_grad(x, label)?;
        let mut probe = self.clone();
        let mut worst = 0.0_f64;
        for (i, &a) in analytic.iter().enumerate() {
            let original = probe.params[i];
            probe.params[i] = original + eps;
            let plus = cross_entropy(&probe.forward(x)?, label)?;
            probe.params[i] = original - eps;
            let minus = cross_entropy(&probe.forward(x)?, label)?;
            probe.params[i] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max((a - numeric).abs() / (a.abs() + 1e-8));
        }
        Ok(worst)
    }

    /// Writes a checkpoint: magic `FSEL1`, the spec fields, then the
    /// parameters as little-endian f64.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (arch, hidden) = match self.spec.architecture {
            Architecture::Linear => (0u8, 0u32),
            Architecture::MlpOneHidden { hidden_width } => (1u8, hidden_width as u32),
        };
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&[arch])?;
        out.write_all(&hidden.to_le_bytes())?;
        out.write_all(&(self.spec.input_dim as u32).to_le_bytes())?;
        out.write_all(&(self.spec.num_classes as u32).to_le_bytes())?;
        out.write_all(&[u8::from(self.spec.include_sensitive_as_feature)])?;
        out.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            out.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let bad = |m: &str| Error::input(format!("malformed checkpoint: {m}"));
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut header = [0u8; 1 + 4 + 4 + 4 + 1 + 8];
        input.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let architecture = match header[0] {
            0 => Architecture::Linear,
            1 => Architecture::MlpOneHidden {
                hidden_width: u32_at(1),
            },
            other => return Err(bad(&format!("unknown architecture tag {other}"))),
        };
        let spec = ModelSpec {
            architecture,
            input_dim: u32_at(5),
            num_classes: u32_at(9),
            include_sensitive_as_feature: header[13] != 0,
        };
        let count = u64::from_le_bytes(header[14..22].try_into().unwrap()) as usize;
        spec.validate()?;
        if count != spec.num_params() {
            return Err(bad("parameter count does not match spec"));
        }
        let mut params = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            input.read_exact(&mut buf).map_err(|_| bad("truncated parameters"))?;
            params.push(f64::from_le_bytes(buf));
        }
        Model::new(spec, params)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_checkpoint(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Model::read_checkpoint(std::io::BufReader::new(file))
    }
}

const CHECKPOINT_MAGIC: &[u8; 5] = b"FSEL1";

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + w[r * d..(r + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn outer_into(out: &mut [f64], rows: &[f64], cols: &[f64]) {
    let d = cols.len();
    for (r, &a) in rows.iter().enumerate() {
        for (o, &b) in out[r * d..(r + 1) * d].iter_mut().zip(cols) {
            *o = a * b;
        }
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-ln(max(probs[label], 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::input(format!("label {label} out of range for {} classes", probs.len()))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Index of the largest probability; ties go to the lower class.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-3,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates and step counter for [`AdamWConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig, num_params: usize) -> Self {
        OptimizerState {
            config,
            step_count: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    /// One AdamW step: decay, moment update, bias-corrected Adam step.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() || params.len() != self.first_moment.len() {
            return Err(Error::input(format!(
                "shape mismatch: {} params, {} gradient entries, {} moments",
                params.len(),
                grad.len(),
                self.first_moment.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::numeric(format!("gradient entry {i} is not finite")));
        }
        let AdamWConfig {
            learning_rate: lr,
            weight_decay: wd,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let correct1 = 1.0 - beta1.powi(t);
        let correct2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *p *= 1.0 - lr * wd;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand_distr::{Distribution, StandardNormal};

    fn example(features: Vec<f64>, y: usize) -> Example {
        Example {
            id: 0,
            features,
            y,
            z: Some(y),
            s: 0,
        }
    }

    #[test]
    fn zero_linear_model_is_uniform() {
        let model = Model::zeros(ModelSpec::linear(3, 4)).unwrap();
        let p = model.forward(&[1.0, -2.0, 5.0]).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_of_zero_and_ln3() {
        let p = softmax(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn tied_weights_ignore_feature_swap() {
        let spec = ModelSpec::linear(3, 2);
        // columns 0 and 2 tied
        let model = Model::new(spec, vec![0.3, -1.0, 0.3, -0.7, 2.0, -0.7, 0.1, -0.2]).unwrap();
        let a = model.forward(&[1.5, 0.2, -0.4]).unwrap();
        let b = model.forward(&[-0.4, 0.2, 1.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let mut model = Model::zeros(ModelSpec::linear(2, 2)).unwrap();
        assert!(matches!(model.forward(&[1.0]), Err(Error::Input(_))));
        model.params_mut()[0] = f64::NAN;
        assert!(matches!(model.forward(&[1.0, 2.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn cross_entropy_values() {
        assert!(cross_entropy(&[1.0, 0.0], 0).unwrap().abs() < 1e-15);
        assert!((cross_entropy(&[0.5, 0.5], 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.25, 0.75], 0).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.0, 1.0], 0).unwrap() - 1e12f64.ln()).abs() < 1e-9);
        assert!(matches!(cross_entropy(&[0.5, 0.5], 2), Err(Error::Input(_))));
    }

    #[test]
    fn zero_linear_gradient_closed_form() {
        let model = Model::zeros(ModelSpec::linear(3, 2)).unwrap();
        let x = [0.5, -1.0, 2.0];
        let g = model.loss_grad(&x, 1).unwrap();
        // delta = p - onehot = (0.5, -0.5)
        let delta = [0.5, -0.5];
        for j in 0..2 {
            for d in 0..3 {
                assert_eq!(g[j * 3 + d], delta[j] * x[d]);
            }
            assert_eq!(g[6 + j], delta[j]);
        }
    }

    #[test]
    fn gradient_vanishes_at_one_parameter_minimum() {
        // loss summed over both labels at x = 1 is minimised by zero parameters
        let model = Model::zeros(ModelSpec::linear(1, 2)).unwrap();
        let g0 = model.loss_grad(&[1.0], 0).unwrap();
        let g1 = model.loss_grad(&[1.0], 1).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            assert!((a + b).abs() < 1e-8);
        }
    }

    #[test]
    fn grad_norm_of_uniform_unit_example_is_one() {
        let model = Model::zeros(ModelSpec::linear(2, 2)).unwrap();
        let ex = example(vec![0.6, 0.8], 0);
        assert!((model.example_grad_norm(&ex).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grad_norm_small_for_confident_correct() {
        let model = Model::new(ModelSpec::linear(1, 2), vec![-20.0, 20.0, 0.0, 0.0]).unwrap();
        let ex = example(vec![1.0], 1);
        assert!(model.example_grad_norm(&ex).unwrap() < 1e-12);
    }

    #[test]
    fn grad_norm_grows_with_feature_scale_at_fixed_probs() {
        // zero weights keep probabilities fixed at uniform while x scales
        let model = Model::zeros(ModelSpec::linear(2, 2)).unwrap();
        let base = model.example_grad_norm(&example(vec![0.3, -0.4], 0)).unwrap();
        let mut last = base;
        for c in [1.5, 2.0, 4.0] {
            let n = model
                .example_grad_norm(&example(vec![0.3 * c, -0.4 * c], 0))
                .unwrap();
            assert!(n > last);
            // sqrt(0.5 * c^2 |x|^2 + 0.5)
            let expected = (0.5 * c * c * 0.25 + 0.5f64).sqrt();
            assert!((n - expected).abs() < 1e-12);
            last = n;
        }
    }

    #[test]
    fn mlp_last_layer_range_is_tail() {
        let spec = ModelSpec::mlp(3, 4, 2);
        assert_eq!(spec.num_params(), 12 + 4 + 8 + 2);
        assert_eq!(spec.last_layer_range(), 16..26);
        assert_eq!(ModelSpec::linear(3, 2).last_layer_range(), 0..8);
    }

    #[test]
    fn finite_differences_match_both_architectures() {
        let mut rng = stream(11, Stream::Init);
        for spec in [ModelSpec::linear(4, 3), ModelSpec::mlp(4, 8, 3)] {
            let model = Model::init(spec, &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
            let err = model.finite_difference_check(&x, 1, 1e-5).unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn finite_difference_zero_input_weights_exact() {
        let model = Model::zeros(ModelSpec::linear(2, 2)).unwrap();
        // weight gradients are exactly zero and so are their differences
        assert!(model.finite_difference_check(&[0.0, 0.0], 0, 1e-5).unwrap() < 1e-6);
        assert!(model.finite_difference_check(&[0.0, 0.0], 0, 1.0).is_err());
    }

    #[test]
    fn adamw_zero_grad_no_decay_keeps_params() {
        let mut opt = OptimizerState::new(
            AdamWConfig {
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
            3,
        );
        let mut p = vec![1.0, -2.0, 0.5];
        opt.update(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn adamw_first_step_is_sign_of_gradient() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        let mut opt = OptimizerState::new(cfg, 3);
        let mut p = vec![0.0; 3];
        opt.update(&mut p, &[0.3, -5.0, 1e-2]).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-9);
        assert!((p[2] + 1e-3).abs() < 1e-8);
    }

    #[test]
    fn adamw_decay_shrinks_geometrically() {
        let cfg = AdamWConfig::default();
        let mut opt = OptimizerState::new(cfg, 2);
        let mut p = vec![2.0, -1.0];
        for _ in 0..5 {
            opt.update(&mut p, &[0.0, 0.0]).unwrap();
        }
        let factor = (1.0 - cfg.learning_rate * cfg.weight_decay).powi(5);
        assert!((p[0] - 2.0 * factor).abs() < 1e-15);
        assert!((p[1] + factor).abs() < 1e-15);
    }

    #[test]
    fn adamw_rejects_bad_gradients() {
        let mut opt = OptimizerState::new(AdamWConfig::default(), 2);
        let mut p = vec![0.0; 2];
        assert!(matches!(opt.update(&mut p, &[f64::INFINITY, 0.0]), Err(Error::Numeric(_))));
        assert!(matches!(opt.update(&mut p, &[0.0]), Err(Error::Input(_))));
        assert_eq!(opt.step_count, 0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = stream(3, Stream::Init);
        let spec = ModelSpec::mlp(3, 5, 2).with_sensitive(true);
        let model = Model::init(spec, &mut rng).unwrap();
        let mut bytes = Vec::new();
        model.write_checkpoint(&mut bytes).unwrap();
        assert_eq!(&bytes[..5], b"FSEL1");
        assert_eq!(bytes.len(), 5 + 22 + 8 * spec.num_params());
        let back = Model::read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(back, model);
        assert!(Model::read_checkpoint(&bytes[..20]).is_err());
    }
}
