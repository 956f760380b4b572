//! Small feedforward classifier used for floor detection: fully connected
//! ReLU layers, inverted dropout after the first hidden layer, a softmax
//! head trained with categorical cross-entropy and Adam.
//!
//! Written directly against the math rather than pulling in a framework —
//! the networks here are tiny (tens of thousands of parameters) and the
//! gradient-check test keeps the backprop honest.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One fully connected layer; `w[out][in]` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeroed(n_in: usize, n_out: usize) -> Self {
        Self {
            w: vec![vec![0.0; n_in]; n_out],
            b: vec![0.0; n_out],
        }
    }

    /// He-uniform initialization: U(−√(6/fan_in), +√(6/fan_in)), zero bias.
    fn he_uniform(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / n_in as f64).sqrt();
        Self {
            w: (0..n_out)
                .map(|_| (0..n_in).map(|_| rng.gen_range(-limit..limit)).collect())
                .collect(),
            b: vec![0.0; n_out],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// Multi-layer perceptron with a softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    /// Drop probability after the first hidden activation (0 disables).
    dropout: f64,
}

/// Optimizer settings. Defaults follow common Adam practice: lr 1e-3,
/// β1 0.9, β2 0.999, ε 1e-8, batches of 10; training stops early when the
/// held-out split stops improving for `patience` epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of the data held out for early stopping (0 disables).
    pub val_fraction: f64,
    /// Early-stop patience in epochs (0 disables).
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 10,
            epochs: 100,
            val_fraction: 0.1,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate >= 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.batch_size >= 1
            && self.epochs >= 1
            && (0.0..1.0).contains(&self.val_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Pipeline(format!("invalid training config: {self:?}")))
        }
    }
}

/// Per-epoch training/validation losses and where the best model landed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    /// Epoch whose validation loss was restored into the model (0-based);
    /// equals the final epoch when early stopping never fired.
    pub best_epoch: usize,
}

/// Gradient buffers, same shapes as the model parameters.
struct Grads {
    layers: Vec<Layer>,
}

impl Grads {
    fn zeroed(model: &Mlp) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer::zeroed(l.w[0].len(), l.w.len()))
                .collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            for row in &mut l.w {
                for v in row {
                    *v *= s;
                }
            }
            for v in &mut l.b {
                *v *= s;
            }
        }
    }
}

impl Mlp {
    /// Randomly initialized network: `input → hidden… → output`.
    pub fn new(input: usize, hidden: &[usize], output: usize, dropout: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims: Vec<usize> = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(output))
            .collect();
        let layers = dims
            .windows(2)
            .map(|d| Layer::he_uniform(d[0], d[1], &mut rng))
            .collect();
        Self { layers, dropout }
    }

    /// All-zero parameters; useful as a known-symmetric reference.
    pub fn zeroed(input: usize, hidden: &[usize], output: usize) -> Self {
        let dims: Vec<usize> = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(output))
            .collect();
        let layers = dims.windows(2).map(|d| Layer::zeroed(d[0], d[1])).collect();
        Self { layers, dropout: 0.0 }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.w[0].len()).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.w.len()).unwrap_or(0)
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// Structural sanity for deserialized models: chained dimensions, finite
    /// parameters, dropout in [0, 1).
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Schema("model has no layers".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Schema(format!("dropout {} out of range", self.dropout)));
        }
        let mut prev = self.input_dim();
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.is_empty() || l.b.len() != l.w.len() {
                return Err(Error::Schema(format!("layer {i} shape mismatch")));
            }
            for row in &l.w {
                if row.len() != prev {
                    return Err(Error::DimensionMismatch { expected: prev, got: row.len() });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Schema(format!("layer {i} has non-finite weights")));
                }
            }
            if l.b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("layer {i} has non-finite biases")));
            }
            prev = l.w.len();
        }
        Ok(())
    }

    /// Deterministic inference: dropout disabled.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, probs) = self.forward_full(x, None)?;
        Ok(probs)
    }

    /// Forward pass keeping pre-activations for backprop. `scale` is the
    /// inverted-dropout multiplier per first-hidden unit (0 dropped,
    /// 1/(1−d) kept); `None` means inference mode.
    fn forward_full(&self, x: &[f64], scale: Option<&[f64]>) -> Result<(Caches, Vec<f64>)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let n_layers = self.layers.len();
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        activations.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(activations.last().expect("pushed"));
            if i + 1 == n_layers {
                let probs = softmax(&z);
                pre.push(z);
                return Ok((Caches { activations, pre }, probs));
            }
            let mut h: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            if i == 0 {
                if let Some(s) = scale {
                    for (hv, sv) in h.iter_mut().zip(s) {
                        *hv *= sv;
                    }
                }
            }
            pre.push(z);
            activations.push(h);
        }
        unreachable!("validated non-empty layer list")
    }

    /// Draw an inverted-dropout scale vector for the first hidden layer.
    fn draw_scale(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.layers[0].w.len();
        if self.dropout == 0.0 || self.layers.len() < 2 {
            return vec![1.0; n];
        }
        let keep = 1.0 - self.dropout;
        (0..n)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    /// Cross-entropy gradient for one example; `scale` as in `forward_full`.
    fn backward(
        &self,
        caches: &Caches,
        probs: &[f64],
        label: usize,
        scale: Option<&[f64]>,
        grads: &mut Grads,
    ) {
        let n_layers = self.layers.len();
        // Softmax + cross-entropy collapses to p − 1[label].
        let mut delta: Vec<f64> = probs.to_vec();
        delta[label] -= 1.0;

        for l in (0..n_layers).rev() {
            let a_in = &caches.activations[l];
            for (o, d) in delta.iter().enumerate() {
                let row = &mut grads.layers[l].w[o];
                for (i, a) in a_in.iter().enumerate() {
                    row[i] += d * a;
                }
                grads.layers[l].b[o] += d;
            }
            if l == 0 {
                break;
            }
            // Propagate to the previous layer's pre-activation.
            let w = &self.layers[l].w;
            let n_in = w[0].len();
            let mut da = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                for (i, dv) in da.iter_mut().enumerate() {
                    *dv += w[o][i] * d;
                }
            }
            let z_prev = &caches.pre[l - 1];
            if l - 1 == 0 {
                if let Some(s) = scale {
                    for (dv, sv) in da.iter_mut().zip(s) {
                        *dv *= sv;
                    }
                }
            }
            for (dv, z) in da.iter_mut().zip(z_prev) {
                if *z <= 0.0 {
                    *dv = 0.0;
                }
            }
            delta = da;
        }
    }

    /// Train in place with Adam. Deterministic for a fixed seed: the
    /// validation split, shuffle order, and dropout masks all come from one
    /// seeded generator. When a validation split is configured, the epoch
    /// with the best validation loss is restored on exit.
    pub fn train(&mut self, data: &[(Vec<f64>, usize)], cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::Pipeline("empty training set".into()));
        }
        for (x, label) in data {
            if x.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: x.len(),
                });
            }
            if *label >= self.output_dim() {
                return Err(Error::Pipeline(format!(
                    "label {label} out of range for {} classes",
                    self.output_dim()
                )));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut split: Vec<usize> = (0..data.len()).collect();
        split.shuffle(&mut rng);
        let n_val = (data.len() as f64 * cfg.val_fraction).floor() as usize;
        let (val_idx, train_idx) = split.split_at(n_val);
        let early_stop = cfg.patience > 0 && !val_idx.is_empty();

        let mut m = Grads::zeroed(self);
        let mut v = Grads::zeroed(self);
        let mut t = 0u64;
        let mut order: Vec<usize> = train_idx.to_vec();
        let mut curve = Vec::with_capacity(cfg.epochs);
        let mut val_curve = Vec::with_capacity(cfg.epochs);
        let mut best: Option<(f64, usize, Vec<Layer>)> = None;

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let mut grads = Grads::zeroed(self);
                for &idx in batch {
                    let (x, label) = &data[idx];
                    let s = self.draw_scale(&mut rng);
                    let (caches, probs) = self.forward_full(x, Some(&s))?;
                    epoch_loss += cross_entropy(&probs, *label);
                    self.backward(&caches, &probs, *label, Some(&s), &mut grads);
                }
                grads.scale(1.0 / batch.len() as f64);
                t += 1;
                self.adam_step(cfg, t, &grads, &mut m, &mut v);
            }
            let mean = epoch_loss / order.len().max(1) as f64;
            if !mean.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            curve.push(mean);

            let val_loss = if val_idx.is_empty() {
                mean
            } else {
                let mut sum = 0.0;
                for &idx in val_idx {
                    let (x, label) = &data[idx];
                    let (_, probs) = self.forward_full(x, None)?;
                    sum += cross_entropy(&probs, *label);
                }
                sum / val_idx.len() as f64
            };
            if !val_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            val_curve.push(val_loss);

            let improved = best.as_ref().map(|(b, _, _)| val_loss < *b).unwrap_or(true);
            if improved {
                best = Some((val_loss, epoch, self.layers.clone()));
            } else if early_stop {
                let since_best = epoch - best.as_ref().expect("set on first epoch").1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }

        let (_, best_epoch, layers) = best.expect("at least one epoch ran");
        if early_stop {
            self.layers = layers;
        }
        Ok(TrainReport {
            loss_curve: curve,
            val_curve,
            best_epoch,
        })
    }

    fn adam_step(&mut self, cfg: &TrainConfig, t: u64, g: &Grads, m: &mut Grads, v: &mut Grads) {
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (o, row) in layer.w.iter_mut().enumerate() {
                for (i, w) in row.iter_mut().enumerate() {
                    let grad = g.layers[l].w[o][i];
                    let mm = &mut m.layers[l].w[o][i];
                    let vv = &mut v.layers[l].w[o][i];
                    *mm = cfg.beta1 * *mm + (1.0 - cfg.beta1) * grad;
                    *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * grad * grad;
                    *w -= cfg.learning_rate * (*mm / bc1) / ((*vv / bc2).sqrt() + cfg.epsilon);
                }
                let grad = g.layers[l].b[o];
                let mm = &mut m.layers[l].b[o];
                let vv = &mut v.layers[l].b[o];
                *mm = cfg.beta1 * *mm + (1.0 - cfg.beta1) * grad;
                *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * grad * grad;
                layer.b[o] -= cfg.learning_rate * (*mm / bc1) / ((*vv / bc2).sqrt() + cfg.epsilon);
            }
        }
    }

    /// Classification accuracy over a labelled set (argmax of inference).
    pub fn accuracy(&self, data: &[(Vec<f64>, usize)]) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for (x, label) in data {
            let probs = self.infer(x)?;
            let pred = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probs"))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if pred == *label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Compare analytic backprop gradients against central finite differences
    /// at step `h`, dropout disabled. Returns the maximum relative error over
    /// every parameter.
    pub fn grad_check(&self, x: &[f64], label: usize, h: f64) -> Result<f64> {
        let (caches, probs) = self.forward_full(x, None)?;
        let mut analytic = Grads::zeroed(self);
        self.backward(&caches, &probs, label, None, &mut analytic);

        let mut worst = 0.0f64;
        let mut probe = self.clone();
        for l in 0..self.layers.len() {
            let (n_out, n_in) = (self.layers[l].w.len(), self.layers[l].w[0].len());
            for o in 0..n_out {
                for i in 0..=n_in {
                    // i == n_in probes the bias.
                    let read = |m: &Mlp| {
                        if i == n_in {
                            m.layers[l].b[o]
                        } else {
                            m.layers[l].w[o][i]
                        }
                    };
                    let write = |m: &mut Mlp, v: f64| {
                        if i == n_in {
                            m.layers[l].b[o] = v;
                        } else {
                            m.layers[l].w[o][i] = v;
                        }
                    };
                    let orig = read(&probe);
                    write(&mut probe, orig + h);
                    let (_, p_plus) = probe.forward_full(x, None)?;
                    write(&mut probe, orig - h);
                    let (_, p_minus) = probe.forward_full(x, None)?;
                    write(&mut probe, orig);
                    let numeric =
                        (cross_entropy(&p_plus, label) - cross_entropy(&p_minus, label)) / (2.0 * h);
                    let a = if i == n_in {
                        analytic.layers[l].b[o]
                    } else {
                        analytic.layers[l].w[o][i]
                    };
                    // Floor the denominator so near-zero gradients (dead ReLU
                    // paths) don't turn finite-difference noise into spurious
                    // relative error.
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5);
                    worst = worst.max(rel);
                }
            }
        }
        Ok(worst)
    }
}

/// Intermediate forward-pass state: layer inputs and pre-activations.
struct Caches {
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

/// Numerically stable softmax.
fn softmax(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Categorical cross-entropy: −ln p_label, with p clamped to 1e-12.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(1e-12).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_uniform() {
        let m = Mlp::zeroed(8, &[10, 10], 4);
        let p = m.infer(&[1.0; 8]).unwrap();
        for v in &p {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn inference_is_deterministic() {
        let m = Mlp::new(8, &[16, 16], 4, 0.25, 3);
        let x: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        assert_eq!(m.infer(&x).unwrap(), m.infer(&x).unwrap());
    }

    #[test]
    fn softmax_outputs_are_distributions() {
        for seed in 0..20 {
            let m = Mlp::new(6, &[12], 5, 0.0, seed);
            let x: Vec<f64> = (0..6).map(|i| (i as f64 - 2.0) * 0.7).collect();
            let p = m.infer(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = Mlp::new(8, &[16], 4, 0.0, 0);
        assert!(matches!(
            m.infer(&[0.0; 7]),
            Err(Error::DimensionMismatch { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn cross_entropy_known_values() {
        assert_eq!(cross_entropy(&[1.0, 0.0, 0.0, 0.0], 0), 0.0);
        let uniform = [0.25; 4];
        assert!((cross_entropy(&uniform, 2) - 4.0f64.ln()).abs() < 1e-12);
        // Independent arithmetic for an arbitrary distribution.
        let p = [0.1, 0.6, 0.3];
        assert!((cross_entropy(&p, 1) - (-(0.6f64.ln()))).abs() < 1e-12);
        // Zero probability clamps instead of producing infinity.
        assert!(cross_entropy(&[0.0, 1.0], 0).is_finite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..6 {
            let m = Mlp::new(6, &[9, 7], 4, 0.25, seed);
            let x: Vec<f64> = (0..6).map(|i| ((i * 13 + seed as usize) % 7) as f64 * 0.3 - 0.9).collect();
            let worst = m.grad_check(&x, (seed % 4) as usize, 1e-5).unwrap();
            assert!(worst < 1e-4, "seed {seed}: relative error {worst}");
        }
    }

    #[test]
    fn single_layer_matches_closed_form_gradient() {
        // Softmax regression: ∂L/∂W = (p − onehot) ⊗ x, ∂L/∂b = p − onehot.
        let m = Mlp::new(3, &[], 4, 0.0, 2);
        let x = [0.5, -1.2, 0.8];
        let label = 2usize;
        let p = m.infer(&x).unwrap();

        let (caches, probs) = m.forward_full(&x, None).unwrap();
        let mut g = Grads::zeroed(&m);
        m.backward(&caches, &probs, label, None, &mut g);

        for o in 0..4 {
            let delta = p[o] - if o == label { 1.0 } else { 0.0 };
            for i in 0..3 {
                assert!((g.layers[0].w[o][i] - delta * x[i]).abs() < 1e-8);
            }
            assert!((g.layers[0].b[o] - delta).abs() < 1e-8);
        }
        assert!(m.grad_check(&x, label, 1e-5).unwrap() < 1e-8);

        // Zero input: weight gradients vanish analytically and numerically.
        let z = [0.0, 0.0, 0.0];
        assert!(m.grad_check(&z, 0, 1e-5).unwrap() < 1e-4);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let mut m = Mlp::new(4, &[8], 3, 0.25, 9);
        let before = m.clone();
        let data: Vec<(Vec<f64>, usize)> = (0..20)
            .map(|i| (vec![i as f64 * 0.1; 4], i % 3))
            .collect();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        m.train(&data, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let data: Vec<(Vec<f64>, usize)> = (0..40)
            .map(|i| {
                let c = i % 2;
                (vec![c as f64, 1.0 - c as f64, 0.3], c)
            })
            .collect();
        let cfg = TrainConfig { epochs: 5, seed: 42, ..TrainConfig::default() };
        let mut a = Mlp::new(3, &[8], 2, 0.25, 1);
        let mut b = Mlp::new(3, &[8], 2, 0.25, 1);
        let ra = a.train(&data, &cfg).unwrap();
        let rb = b.train(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.loss_curve, rb.loss_curve);
    }

    #[test]
    fn learns_linearly_separable_toy_set() {
        // Two well-separated 2D blobs.
        let mut data = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let x: f64 = rng.gen_range(-1.0..-0.2);
            let y: f64 = rng.gen_range(-1.0..1.0);
            data.push((vec![x, y], 0usize));
            data.push((vec![-x, y], 1usize));
        }
        let mut m = Mlp::new(2, &[16, 16], 2, 0.25, 7);
        let cfg = TrainConfig { epochs: 200, seed: 11, ..TrainConfig::default() };
        let report = m.train(&data, &cfg).unwrap();
        assert!(report.loss_curve.len() <= 200);
        assert_eq!(report.loss_curve.len(), report.val_curve.len());
        assert!(m.accuracy(&data).unwrap() >= 0.99);
    }

    #[test]
    fn dropout_preserves_expected_activations() {
        // Average many train-mode forwards; inverted scaling should keep the
        // expectation near the inference output.
        let m = Mlp::new(4, &[50, 20], 3, 0.25, 13);
        let x = [0.4, -0.2, 0.9, 0.1];
        let reference = m.infer(&x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut mean = vec![0.0; 3];
        let draws = 10_000;
        for _ in 0..draws {
            let s = m.draw_scale(&mut rng);
            let (_, p) = m.forward_full(&x, Some(&s)).unwrap();
            for (acc, v) in mean.iter_mut().zip(&p) {
                *acc += v / draws as f64;
            }
        }
        for (avg, refv) in mean.iter().zip(&reference) {
            assert!(
                (avg - refv).abs() < 0.02,
                "dropout expectation drifted: {avg} vs {refv}"
            );
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut m = Mlp::new(3, &[5], 2, 0.0, 4);
        let before = m.clone();
        let g = Grads::zeroed(&m);
        let mut first = Grads::zeroed(&m);
        let mut second = Grads::zeroed(&m);
        m.adam_step(&TrainConfig::default(), 1, &g, &mut first, &mut second);
        assert_eq!(m, before);
    }

    #[test]
    fn validate_catches_bad_shapes() {
        let m = Mlp::new(4, &[8], 3, 0.25, 1);
        assert!(m.validate().is_ok());
        let mut bad = m.clone();
        bad.layers[0].w[0].push(1.0);
        assert!(bad.validate().is_err());
        let mut nan = m.clone();
        nan.layers[1].b[0] = f64::NAN;
        assert!(nan.validate().is_err());
    }
}
