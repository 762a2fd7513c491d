//! Convolutional autoencoder that compresses 500x40 facade patches to
//! 12 features.
//!
//! The encoder stacks same-padded 1-D convolutions and max-pooling down
//! to a 12-unit tanh bottleneck; in the default `Grouped` variant the
//! block after the first pooling runs two identical conv+pool branches
//! in parallel and adds them. The decoder mirrors the encoder with
//! upsampling and ends in a ReLU so reconstructions stay nonnegative.
//! `Single` drops the second branch; `Serial` chains the two branch
//! convolutions instead of adding them.
//!
//! Every hidden activation is tanh; training uses the masked log-cosh
//! loss from [`train`] with Adam (lr 0.0012, batch 16).

pub mod layers;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::building::{FacadePatch, GridScaler, ACROSS_CELLS, ALONG_CELLS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use layers::{forward_only, infer_shapes, Act, Layer, Signal};
pub use train::{masked_logcosh_loss, LossCurve, TrainConfig};

/// Latent feature width produced by the encoder.
pub const LATENT_DIM: usize = 12;

/// Encoder wiring after the first pooling stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Two parallel conv+pool branches, outputs added.
    Grouped,
    /// One conv+pool branch.
    Single,
    /// The two branch convolutions chained one after the other.
    Serial,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Grouped, Variant::Single, Variant::Serial];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Grouped => "grouped",
            Variant::Single => "single",
            Variant::Serial => "serial",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        match s {
            "grouped" => Ok(Variant::Grouped),
            "single" => Ok(Variant::Single),
            "serial" => Ok(Variant::Serial),
            other => Err(Error::invalid(format!(
                "unknown autoencoder variant '{other}' (grouped|single|serial)"
            ))),
        }
    }
}

fn branch() -> Vec<Layer> {
    vec![Layer::conv1d(32, 32, 5, Act::Tanh), Layer::MaxPool1D { factor: 5 }]
}

/// Builds the full network and the encoder/decoder boundary index,
/// shape-checked end to end: (500,40) -> (1,12) -> (500,40).
fn build_network(variant: Variant) -> Result<(Vec<Layer>, usize)> {
    let mut enc = vec![
        Layer::conv1d(ACROSS_CELLS, 32, 7, Act::Tanh),
        Layer::MaxPool1D { factor: 2 },
    ];
    match variant {
        Variant::Grouped => enc.push(Layer::ParallelAdd {
            a: branch(),
            b: branch(),
        }),
        Variant::Single => enc.extend(branch()),
        Variant::Serial => {
            enc.extend(branch());
            enc.extend(branch());
        }
    }
    enc.push(Layer::conv1d(32, 16, 3, Act::Tanh));
    enc.push(Layer::MaxPool1D { factor: 5 });
    enc.push(Layer::Flatten);
    // The flattened width depends on the variant's pooling depth.
    let (_, flat) = infer_shapes(&enc, (ALONG_CELLS, ACROSS_CELLS))?;
    enc.push(Layer::dense(flat, 64, Act::Tanh));
    enc.push(Layer::dense(64, LATENT_DIM, Act::Tanh));

    let boundary = enc.len();
    let mut all = enc;
    all.extend([
        Layer::dense(LATENT_DIM, 64, Act::Tanh),
        Layer::dense(64, 160, Act::Tanh),
        Layer::Reshape { len: 10, channels: 16 },
        Layer::UpSample1D { factor: 5 },
        Layer::conv1d(16, 32, 3, Act::Tanh),
        Layer::UpSample1D { factor: 5 },
        Layer::conv1d(32, 32, 5, Act::Tanh),
        Layer::UpSample1D { factor: 2 },
        Layer::conv1d(32, ACROSS_CELLS, 3, Act::Relu),
    ]);

    let latent = infer_shapes(&all[..boundary], (ALONG_CELLS, ACROSS_CELLS))?;
    if latent != (1, LATENT_DIM) {
        return Err(Error::invalid(format!(
            "encoder must end at (1, {LATENT_DIM}), got {latent:?}"
        )));
    }
    let out = infer_shapes(&all[boundary..], latent)?;
    if out != (ALONG_CELLS, ACROSS_CELLS) {
        return Err(Error::invalid(format!(
            "decoder must end at ({ALONG_CELLS}, {ACROSS_CELLS}), got {out:?}"
        )));
    }
    Ok((all, boundary))
}

/// A trained (or freshly initialized) autoencoder plus the per-cell
/// scaler its inputs were normalized with.
#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    pub variant: Variant,
    pub seed: u64,
    pub config: TrainConfig,
    pub scaler: GridScaler,
    layers: Vec<Layer>,
    boundary: usize,
}

const NORMALIZED_SLACK: f64 = 1e-9;

fn patch_signal(patch: &FacadePatch) -> Result<Signal> {
    for &v in patch.as_slice() {
        if !(-NORMALIZED_SLACK..=1.0 + NORMALIZED_SLACK).contains(&v) {
            return Err(Error::invalid(format!(
                "patch value {v} outside [0, 1]; normalize patches before encoding"
            )));
        }
    }
    Signal::from_data(ALONG_CELLS, ACROSS_CELLS, patch.as_slice().to_vec())
}

impl AutoencoderModel {
    /// Seeded initialization without any training; encode/decode work
    /// immediately, which keeps forward-pass tests cheap.
    pub fn initialized(
        variant: Variant,
        scaler: GridScaler,
        config: TrainConfig,
        seed: u64,
    ) -> Result<AutoencoderModel> {
        let (mut layers, boundary) = build_network(variant)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in layers.iter_mut() {
            layer.init_params(&mut rng);
        }
        Ok(AutoencoderModel {
            variant,
            seed,
            config,
            scaler,
            layers,
            boundary,
        })
    }

    /// Compresses a normalized patch to the 12 latent features.
    pub fn encode(&self, patch: &FacadePatch) -> Result<Vec<f64>> {
        let signal = patch_signal(patch)?;
        let latent = forward_only(&self.layers[..self.boundary], &signal);
        debug_assert_eq!(latent.shape(), (1, LATENT_DIM));
        Ok(latent.data)
    }

    /// Encodes many patches into an n x 12 feature matrix.
    pub fn encode_batch(&self, patches: &[FacadePatch]) -> Result<Matrix> {
        let mut rows = Vec::with_capacity(patches.len());
        for p in patches {
            rows.push(self.encode(p)?);
        }
        Matrix::from_rows(&rows)
    }

    /// Reconstructs a patch from 12 latent features.
    pub fn decode(&self, latent: &[f64]) -> Result<FacadePatch> {
        if latent.len() != LATENT_DIM {
            return Err(Error::invalid(format!(
                "latent vector must have {LATENT_DIM} entries, got {}",
                latent.len()
            )));
        }
        let sig = Signal::from_data(1, LATENT_DIM, latent.to_vec())?;
        let out = forward_only(&self.layers[self.boundary..], &sig);
        debug_assert_eq!(out.shape(), (ALONG_CELLS, ACROSS_CELLS));
        FacadePatch::from_values(out.data)
    }

    /// encode then decode; output is nonnegative by the final ReLU.
    pub fn reconstruct(&self, patch: &FacadePatch) -> Result<FacadePatch> {
        let latent = self.encode(patch)?;
        self.decode(&latent)
    }

    /// Mean masked log-cosh reconstruction loss over normalized patches.
    pub fn loss_on(&self, patches: &[FacadePatch]) -> Result<f64> {
        if patches.is_empty() {
            return Err(Error::invalid("loss needs at least one patch"));
        }
        let mut total = 0.0;
        for patch in patches {
            let input = patch_signal(patch)?;
            let output = forward_only(&self.layers, &input);
            let (loss, _) = masked_logcosh_loss(&output, &input)?;
            total += loss;
        }
        Ok(total / patches.len() as f64)
    }

    /// [`AutoencoderModel::loss_on`] plus its analytic gradient with
    /// respect to the flat parameter vector (same order as
    /// [`AutoencoderModel::flat_params`]).
    pub fn loss_gradient(&self, patches: &[FacadePatch]) -> Result<(f64, Vec<f64>)> {
        if patches.is_empty() {
            return Err(Error::invalid("loss gradient needs at least one patch"));
        }
        let mut grads: Vec<layers::LayerGrads> =
            self.layers.iter().map(Layer::zero_grads).collect();
        let mut total = 0.0;
        for patch in patches {
            let input = patch_signal(patch)?;
            let (traces, output) = layers::forward_seq(&self.layers, &input);
            let (loss, grad_y) = masked_logcosh_loss(&output, &input)?;
            total += loss;
            layers::backward_seq(&self.layers, &input, &traces, grad_y, &mut grads);
        }
        let scale = 1.0 / patches.len() as f64;
        let mut flat = Vec::with_capacity(self.param_count());
        // for_each_param_grad pairs parameters with gradient sums in the
        // flat order; the parameters themselves are left untouched.
        let mut layers_view = self.layers.clone();
        layers::for_each_param_grad(&mut layers_view, &grads, &mut |_, g_sum| {
            flat.push(g_sum * scale);
        });
        Ok((total * scale, flat))
    }

    /// All parameters in the fixed visit order (persistence contract).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        let mut layers = self.layers.clone();
        layers::for_each_param(&mut layers, &mut |p| out.push(*p));
        out
    }

    /// Restores parameters captured by [`flat_params`].
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut i = 0;
        layers::for_each_param(&mut self.layers, &mut |p| {
            *p = params[i];
            i += 1;
        });
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        layers::param_count(&self.layers)
    }

    /// Rebuilds a model skeleton for `variant` and restores parameters
    /// captured by [`AutoencoderModel::flat_params`].
    pub fn from_flat_params(
        variant: Variant,
        seed: u64,
        config: TrainConfig,
        scaler: GridScaler,
        params: &[f64],
    ) -> Result<AutoencoderModel> {
        let (layers, boundary) = build_network(variant)?;
        let mut model = AutoencoderModel {
            variant,
            seed,
            config,
            scaler,
            layers,
            boundary,
        };
        model.set_flat_params(params)?;
        Ok(model)
    }
}

/// Trains an autoencoder on normalized patches (values in [0, 1]) and
/// attaches the scaler that produced them. Deterministic in `seed`.
pub fn train_autoencoder(
    patches: &[FacadePatch],
    scaler: GridScaler,
    variant: Variant,
    config: TrainConfig,
    seed: u64,
) -> Result<(AutoencoderModel, LossCurve)> {
    let signals: Vec<Signal> = patches.iter().map(patch_signal).collect::<Result<_>>()?;
    let (mut layers, boundary) = build_network(variant)?;
    // train_layers re-seeds and initializes internally so the whole run
    // (init + shuffles) comes from one stream.
    let curve = train::train_layers(&mut layers, &signals, &config, seed)?;
    Ok((
        AutoencoderModel {
            variant,
            seed,
            config,
            scaler,
            layers,
            boundary,
        },
        curve,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use layers::{backward_seq, for_each_param, for_each_param_grad, forward_seq, LayerGrads};
    use rand::Rng;

    fn unit_scaler() -> GridScaler {
        // A do-nothing scaler for tests that build patches directly.
        GridScaler::fit(&[FacadePatch::zero(), {
            let mut p = FacadePatch::zero();
            for a in 0..ALONG_CELLS {
                for c in 0..ACROSS_CELLS {
                    p.set(a, c, 1.0);
                }
            }
            p
        }])
        .unwrap()
    }

    fn block_patch(fill_along: usize, height: f64) -> FacadePatch {
        let mut p = FacadePatch::zero();
        for a in 0..fill_along {
            for c in 0..4 {
                p.set(a, c, height);
            }
            for c in ACROSS_CELLS - 4..ACROSS_CELLS {
                p.set(a, c, height * 0.6);
            }
        }
        p
    }

    #[test]
    fn shape_contract_holds_for_every_variant() {
        for v in Variant::ALL {
            let (layers, boundary) = build_network(v).unwrap();
            let latent = infer_shapes(&layers[..boundary], (ALONG_CELLS, ACROSS_CELLS)).unwrap();
            assert_eq!(latent, (1, LATENT_DIM), "variant {v:?}");
            let out = infer_shapes(&layers[boundary..], latent).unwrap();
            assert_eq!(out, (ALONG_CELLS, ACROSS_CELLS), "variant {v:?}");
        }
    }

    #[test]
    fn grouped_network_parameter_count_is_pinned() {
        let (layers, _) = build_network(Variant::Grouped).unwrap();
        assert_eq!(layers::param_count(&layers), 53_764);
    }

    #[test]
    fn encode_is_deterministic_and_twelve_wide() {
        let model =
            AutoencoderModel::initialized(Variant::Grouped, unit_scaler(), TrainConfig::default(), 7)
                .unwrap();
        let patch = block_patch(120, 0.8);
        let a = model.encode(&patch).unwrap();
        let b = model.encode(&patch).unwrap();
        assert_eq!(a.len(), LATENT_DIM);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn all_zero_patch_encodes_finite() {
        let model =
            AutoencoderModel::initialized(Variant::Grouped, unit_scaler(), TrainConfig::default(), 3)
                .unwrap();
        let z = model.encode(&FacadePatch::zero()).unwrap();
        assert_eq!(z.len(), LATENT_DIM);
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn decoded_values_are_nonnegative() {
        let model =
            AutoencoderModel::initialized(Variant::Grouped, unit_scaler(), TrainConfig::default(), 9)
                .unwrap();
        let rec = model.reconstruct(&block_patch(300, 1.0)).unwrap();
        assert!(rec.as_slice().iter().all(|&v| v >= 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let latent: Vec<f64> = (0..LATENT_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dec = model.decode(&latent).unwrap();
        assert!(dec.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn encode_rejects_unnormalized_patches() {
        let model =
            AutoencoderModel::initialized(Variant::Grouped, unit_scaler(), TrainConfig::default(), 5)
                .unwrap();
        let mut p = FacadePatch::zero();
        p.set(10, 10, 17.5);
        let err = model.encode(&p).unwrap_err();
        assert!(err.to_string().contains("normalize"));
    }

    #[test]
    fn public_loss_gradient_matches_finite_differences() {
        let mut model =
            AutoencoderModel::initialized(Variant::Single, unit_scaler(), TrainConfig::default(), 6)
                .unwrap();
        let patches = vec![block_patch(80, 0.7), block_patch(40, 0.3)];
        let (loss, grad) = model.loss_gradient(&patches).unwrap();
        assert_eq!(grad.len(), model.param_count());
        assert!((loss - model.loss_on(&patches).unwrap()).abs() < 1e-12);

        // Central differences on parameters spread across every layer.
        let params = model.flat_params();
        let h = 1e-5;
        let step = params.len() / 23;
        for j in (0..params.len()).step_by(step.max(1)) {
            let mut plus = params.clone();
            plus[j] += h;
            model.set_flat_params(&plus).unwrap();
            let up = model.loss_on(&patches).unwrap();
            let mut minus = params.clone();
            minus[j] -= h;
            model.set_flat_params(&minus).unwrap();
            let down = model.loss_on(&patches).unwrap();
            let fd = (up - down) / (2.0 * h);
            // Floor keeps near-zero gradients (where central differences
            // bottom out in rounding noise, here ~1e-10 absolute) from
            // failing the relative test.
            let denom = grad[j].abs().max(fd.abs()).max(1e-5);
            assert!(
                (grad[j] - fd).abs() / denom < 1e-4,
                "param {j}: analytic {} vs fd {fd}",
                grad[j]
            );
        }
        model.set_flat_params(&params).unwrap();
    }

    #[test]
    fn flat_params_round_trip() {
        let mut model =
            AutoencoderModel::initialized(Variant::Serial, unit_scaler(), TrainConfig::default(), 2)
                .unwrap();
        let params = model.flat_params();
        assert_eq!(params.len(), model.param_count());
        let patch = block_patch(50, 0.4);
        let before = model.encode(&patch).unwrap();
        let mut perturbed = params.clone();
        for v in perturbed.iter_mut() {
            *v += 0.01;
        }
        model.set_flat_params(&perturbed).unwrap();
        assert_ne!(model.encode(&patch).unwrap(), before);
        model.set_flat_params(&params).unwrap();
        assert_eq!(model.encode(&patch).unwrap(), before);
        assert!(model.set_flat_params(&params[1..]).is_err());
    }

    /// Miniature network with every layer type: input (20, 4), latent 3.
    fn mini_network() -> (Vec<Layer>, usize) {
        let enc = vec![
            Layer::conv1d(4, 6, 3, Act::Tanh),
            Layer::MaxPool1D { factor: 2 },
            Layer::ParallelAdd {
                a: vec![Layer::conv1d(6, 6, 3, Act::Tanh), Layer::MaxPool1D { factor: 5 }],
                b: vec![Layer::conv1d(6, 6, 3, Act::Tanh), Layer::MaxPool1D { factor: 5 }],
            },
            Layer::Flatten,
            Layer::dense(12, 8, Act::Tanh),
            Layer::dense(8, 3, Act::Tanh),
        ];
        let boundary = enc.len();
        let mut all = enc;
        all.extend([
            Layer::dense(3, 8, Act::Tanh),
            Layer::dense(8, 12, Act::Tanh),
            Layer::Reshape { len: 2, channels: 6 },
            Layer::UpSample1D { factor: 5 },
            Layer::conv1d(6, 6, 3, Act::Tanh),
            Layer::UpSample1D { factor: 2 },
            Layer::conv1d(6, 4, 3, Act::Relu),
        ]);
        assert_eq!(infer_shapes(&all[..boundary], (20, 4)).unwrap(), (1, 3));
        assert_eq!(infer_shapes(&all[boundary..], (1, 3)).unwrap(), (20, 4));
        (all, boundary)
    }

    /// Full-loss finite-difference sweep over every parameter of the
    /// miniature network. The step is 1e-5: small enough that no ReLU
    /// pre-activation crosses its kink during a bump, large enough
    /// that f64 rounding stays orders of magnitude below the 1e-4 gate.
    fn end_to_end_fd_check(net_seed: u64, input_seed: u64) -> std::result::Result<(), String> {
        let (mut net, _) = mini_network();
        let mut rng = ChaCha8Rng::seed_from_u64(net_seed);
        for l in net.iter_mut() {
            l.init_params(&mut rng);
        }
        let mut irng = ChaCha8Rng::seed_from_u64(input_seed);
        let input = Signal::from_data(
            20,
            4,
            (0..80)
                .map(|j| if j % 5 == 0 { 0.0 } else { irng.gen_range(0.0..1.0) })
                .collect(),
        )
        .unwrap();

        let loss_of = |net: &[Layer]| -> f64 {
            let y = forward_only(net, &input);
            masked_logcosh_loss(&y, &input).unwrap().0
        };

        let (traces, y) = forward_seq(&net, &input);
        let (_, grad_y) = masked_logcosh_loss(&y, &input).unwrap();
        let mut grads: Vec<LayerGrads> = net.iter().map(Layer::zero_grads).collect();
        backward_seq(&net, &input, &traces, grad_y, &mut grads);

        let mut analytic = Vec::new();
        for_each_param_grad(&mut net, &grads, &mut |_, g| analytic.push(g));

        let h = 1e-5;
        for slot in 0..analytic.len() {
            let mut bump = |delta: f64, net: &mut [Layer]| {
                let mut i = 0;
                for_each_param(net, &mut |p| {
                    if i == slot {
                        *p += delta;
                    }
                    i += 1;
                });
            };
            bump(h, &mut net);
            let up = loss_of(&net);
            bump(-2.0 * h, &mut net);
            let down = loss_of(&net);
            bump(h, &mut net);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[slot];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            if ((a - numeric) / denom).abs() >= 1e-4 {
                return Err(format!("param {slot}: analytic {a} vs numeric {numeric}"));
            }
        }
        Ok(())
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        end_to_end_fd_check(20, 1).unwrap();
    }

    #[test]
    fn training_loss_decreases_on_identical_patches() {
        let patches: Vec<FacadePatch> = (0..32).map(|_| block_patch(200, 0.9)).collect();
        let config = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        let (_, curve) =
            train_autoencoder(&patches, unit_scaler(), Variant::Grouped, config, 40).unwrap();
        assert_eq!(curve.train.len(), 10);
        for w in curve.train.windows(2) {
            assert!(w[1] < w[0], "training loss must strictly decrease: {:?}", curve.train);
        }
        // 32 patches -> last 3 are the validation slice.
        assert_eq!(curve.validation.len(), 10);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let patches: Vec<FacadePatch> = (0..16)
            .map(|i| block_patch(40 + 10 * i, 0.5 + 0.02 * i as f64))
            .collect();
        let config = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let (m1, c1) =
            train_autoencoder(&patches, unit_scaler(), Variant::Grouped, config, 77).unwrap();
        let (m2, c2) =
            train_autoencoder(&patches, unit_scaler(), Variant::Grouped, config, 77).unwrap();
        assert_eq!(m1.flat_params(), m2.flat_params());
        assert_eq!(c1.train, c2.train);
        let (m3, _) =
            train_autoencoder(&patches, unit_scaler(), Variant::Grouped, config, 78).unwrap();
        assert_ne!(m1.flat_params(), m3.flat_params());
    }

    #[test]
    fn single_and_serial_variants_train_and_record_curves() {
        let patches: Vec<FacadePatch> = (0..16)
            .map(|i| block_patch(60 + 15 * i, 0.7))
            .collect();
        let config = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        for v in [Variant::Single, Variant::Serial] {
            let (model, curve) =
                train_autoencoder(&patches, unit_scaler(), v, config, 5).unwrap();
            assert_eq!(curve.train.len(), 3);
            assert!(
                curve.train[2] < curve.train[0],
                "variant {v:?} should improve: {:?}",
                curve.train
            );
            assert_eq!(model.encode(&patches[0]).unwrap().len(), LATENT_DIM);
        }
    }

    #[test]
    fn early_stop_cuts_the_epoch_count() {
        let patches: Vec<FacadePatch> = (0..16).map(|_| block_patch(100, 0.8)).collect();
        let config = TrainConfig {
            epochs: 50,
            stop_tol: Some(1e30), // any change triggers the stop
            ..TrainConfig::default()
        };
        let (_, curve) =
            train_autoencoder(&patches, unit_scaler(), Variant::Single, config, 1).unwrap();
        assert_eq!(curve.train.len(), 2, "stop fires at the first comparison");
    }

    #[test]
    fn variant_parse_round_trips() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()).unwrap(), v);
        }
        assert!(Variant::parse("vae").is_err());
    }
}
