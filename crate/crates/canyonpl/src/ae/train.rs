//! Autoencoder training: masked log-cosh loss, Adam, and the epoch loop.
//!
//! The loss treats the input patch as its own reconstruction target and
//! downweights cells that are zero in the input (padding and empty
//! ground), so facades dominate: full weight on nonzero cells, 0.1 on
//! everything. Optimization is plain Adam over mini-batches of 16 with
//! a seeded per-epoch shuffle; the run is bitwise deterministic for a
//! fixed seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ae::layers::{
    backward_seq, for_each_param_grad, forward_only, forward_seq, Layer, LayerGrads, Signal,
};
use crate::error::{Error, Result};

/// Weight on the unmasked (all cells) term of the loss.
const BACKGROUND_WEIGHT: f64 = 0.1;

/// Numerically stable log(cosh(x)) = |x| + log1p(e^{-2|x|}) - log 2.
#[inline]
pub fn logcosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Masked log-cosh reconstruction loss and its gradient wrt `y`.
///
/// L = mean(logcosh(ŷ - i)) + 0.1 * mean(logcosh(y - i)), where ŷ is y
/// with cells zeroed wherever the input is zero; both means run over
/// all cells. dL/dy = ([i != 0] + 0.1) * tanh(y - i) / N.
pub fn masked_logcosh_loss(y: &Signal, input: &Signal) -> Result<(f64, Signal)> {
    if y.shape() != input.shape() {
        return Err(Error::invalid(format!(
            "loss shapes differ: {:?} vs {:?}",
            y.shape(),
            input.shape()
        )));
    }
    let n = y.data.len() as f64;
    let mut loss = 0.0;
    let mut grad = Signal::zeros(y.len, y.channels);
    for (j, (&yv, &iv)) in y.data.iter().zip(&input.data).enumerate() {
        let diff = yv - iv;
        let background = BACKGROUND_WEIGHT * logcosh(diff);
        let mut g = BACKGROUND_WEIGHT * diff.tanh();
        if iv != 0.0 {
            loss += logcosh(diff) + background;
            g += diff.tanh();
        } else {
            // Masked cell: ŷ = 0 regardless of y, so only the background
            // term depends on y; the masked term is logcosh(-i) = const.
            loss += logcosh(0.0 - iv) + background;
        }
        grad.data[j] = g / n;
    }
    Ok((loss / n, grad))
}

/// Adam with bias correction; one state slot per parameter, in the
/// network's fixed parameter order.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub learning_rate: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(param_count: usize, learning_rate: f64) -> AdamState {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            learning_rate,
        }
    }

    /// One update from summed gradients; `scale` (1/batch size) turns
    /// the sums into means.
    pub fn step(&mut self, layers: &mut [Layer], grads: &[LayerGrads], scale: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let lr = self.learning_rate;
        let mut idx = 0;
        let (m, v) = (&mut self.m, &mut self.v);
        for_each_param_grad(layers, grads, &mut |p, g_sum| {
            let g = g_sum * scale;
            m[idx] = BETA1 * m[idx] + (1.0 - BETA1) * g;
            v[idx] = BETA2 * v[idx] + (1.0 - BETA2) * g * g;
            let m_hat = m[idx] / bc1;
            let v_hat = v[idx] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPS);
            idx += 1;
        });
        assert_eq!(idx, self.m.len(), "Adam state must match parameter count");
    }
}

/// Per-epoch mean losses; validation stays empty when fewer than ten
/// patches leave no held-out slice.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct LossCurve {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Optional early stop: quit once the epoch-over-epoch change in
    /// training loss falls below this.
    pub stop_tol: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.0012,
            batch_size: 16,
            epochs: 100,
            stop_tol: None,
        }
    }
}

/// Runs the optimizer over normalized patch signals, mutating `layers`
/// in place. The last tenth of `patches` (in the given order) is the
/// validation slice and never trains or shuffles.
pub fn train_layers(
    layers: &mut [Layer],
    patches: &[Signal],
    config: &TrainConfig,
    seed: u64,
) -> Result<LossCurve> {
    if patches.len() < config.batch_size {
        return Err(Error::invalid(format!(
            "training needs at least {} patches, got {}",
            config.batch_size,
            patches.len()
        )));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::invalid("batch size and epochs must be positive"));
    }
    let val_count = patches.len() / 10;
    let train_count = patches.len() - val_count;
    let (train_set, val_set) = patches.split_at(train_count);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in layers.iter_mut() {
        layer.init_params(&mut rng);
    }
    let mut adam = AdamState::new(crate::ae::layers::param_count(layers), config.learning_rate);

    let mut curve = LossCurve::default();
    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in indices.chunks(config.batch_size).enumerate() {
            let mut grads: Vec<LayerGrads> = layers.iter().map(Layer::zero_grads).collect();
            let mut batch_loss = 0.0;
            for &i in batch {
                let input = &train_set[i];
                let (traces, output) = forward_seq(layers, input);
                let (loss, grad_y) = masked_logcosh_loss(&output, input)?;
                batch_loss += loss;
                backward_seq(layers, input, &traces, grad_y, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite loss at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += batch_loss;
            adam.step(layers, &grads, 1.0 / batch.len() as f64);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        curve.train.push(train_loss);
        if !val_set.is_empty() {
            let mut val_loss = 0.0;
            for input in val_set {
                let output = forward_only(layers, input);
                let (loss, _) = masked_logcosh_loss(&output, input)?;
                val_loss += loss;
            }
            curve.validation.push(val_loss / val_set.len() as f64);
        }
        if let Some(tol) = config.stop_tol {
            let n = curve.train.len();
            if n >= 2 && (curve.train[n - 2] - curve.train[n - 1]).abs() < tol {
                break;
            }
        }
    }
    Ok(curve)
}
