//! Differentiable layer kernels for the facade autoencoder.
//!
//! Six layer types cover the whole network: 1-D convolution with same
//! padding, non-overlapping max-pooling, nearest-neighbor upsampling,
//! dense, flatten/reshape, and a two-branch parallel block whose
//! outputs are added. Signals are (length, channels) with row-major
//! data, so a 500x40 facade patch maps straight onto a length-500
//! sequence with 40 channels.
//!
//! Backward passes produce exact analytic gradients; the tests pin them
//! against central finite differences.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A (length, channels) sequence; `data[pos * channels + ch]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub len: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Signal {
    pub fn zeros(len: usize, channels: usize) -> Signal {
        Signal {
            len,
            channels,
            data: vec![0.0; len * channels],
        }
    }

    pub fn from_data(len: usize, channels: usize, data: Vec<f64>) -> Result<Signal> {
        if data.len() != len * channels {
            return Err(Error::invalid(format!(
                "signal {len}x{channels} needs {} values, got {}",
                len * channels,
                data.len()
            )));
        }
        Ok(Signal { len, channels, data })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.len, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Act {
    Linear,
    Tanh,
    Relu,
}

impl Act {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Act::Linear => x,
            Act::Tanh => x.tanh(),
            Act::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Act::Linear => 1.0,
            Act::Tanh => 1.0 - y * y,
            Act::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One network layer with its parameters.
///
/// Conv1D weights use layout `w[(k * in_ch + ci) * out_ch + co]` and
/// Dense `w[i * out_dim + o]`, keeping the innermost loops contiguous.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Layer {
    Conv1D {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        act: Act,
        w: Vec<f64>,
        b: Vec<f64>,
    },
    MaxPool1D {
        factor: usize,
    },
    UpSample1D {
        factor: usize,
    },
    Dense {
        in_dim: usize,
        out_dim: usize,
        act: Act,
        w: Vec<f64>,
        b: Vec<f64>,
    },
    Flatten,
    Reshape {
        len: usize,
        channels: usize,
    },
    ParallelAdd {
        a: Vec<Layer>,
        b: Vec<Layer>,
    },
}

/// Gradient buffers mirroring one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub branches: Option<(Vec<LayerGrads>, Vec<LayerGrads>)>,
}

impl Layer {
    pub fn conv1d(in_ch: usize, out_ch: usize, kernel: usize, act: Act) -> Layer {
        assert!(kernel % 2 == 1, "same padding needs an odd kernel");
        Layer::Conv1D {
            in_ch,
            out_ch,
            kernel,
            act,
            w: vec![0.0; kernel * in_ch * out_ch],
            b: vec![0.0; out_ch],
        }
    }

    pub fn dense(in_dim: usize, out_dim: usize, act: Act) -> Layer {
        Layer::Dense {
            in_dim,
            out_dim,
            act,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    /// Fan-in-scaled uniform init, biases zero; branch a before branch b
    /// so one seeded stream fills the whole network reproducibly.
    pub fn init_params(&mut self, rng: &mut ChaCha8Rng) {
        match self {
            Layer::Conv1D { in_ch, kernel, w, b, .. } => {
                let bound = 1.0 / ((*kernel * *in_ch) as f64).sqrt();
                for v in w.iter_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
                b.fill(0.0);
            }
            Layer::Dense { in_dim, w, b, .. } => {
                let bound = 1.0 / (*in_dim as f64).sqrt();
                for v in w.iter_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
                b.fill(0.0);
            }
            Layer::ParallelAdd { a, b } => {
                for l in a.iter_mut() {
                    l.init_params(rng);
                }
                for l in b.iter_mut() {
                    l.init_params(rng);
                }
            }
            _ => {}
        }
    }

    pub fn zero_grads(&self) -> LayerGrads {
        match self {
            Layer::Conv1D { w, b, .. } | Layer::Dense { w, b, .. } => LayerGrads {
                w: vec![0.0; w.len()],
                b: vec![0.0; b.len()],
                branches: None,
            },
            Layer::ParallelAdd { a, b } => LayerGrads {
                w: Vec::new(),
                b: Vec::new(),
                branches: Some((
                    a.iter().map(Layer::zero_grads).collect(),
                    b.iter().map(Layer::zero_grads).collect(),
                )),
            },
            _ => LayerGrads {
                w: Vec::new(),
                b: Vec::new(),
                branches: None,
            },
        }
    }

    /// Output shape for a given input shape; errors carry the layer index.
    fn infer_shape(&self, shape: (usize, usize), index: usize) -> Result<(usize, usize)> {
        let (len, ch) = shape;
        match self {
            Layer::Conv1D { in_ch, out_ch, .. } => {
                if ch != *in_ch {
                    return Err(Error::invalid(format!(
                        "layer {index}: conv expects {in_ch} channels, got {ch}"
                    )));
                }
                Ok((len, *out_ch))
            }
            Layer::MaxPool1D { factor } => {
                if *factor == 0 || len % factor != 0 {
                    return Err(Error::invalid(format!(
                        "layer {index}: pool factor {factor} must divide length {len}"
                    )));
                }
                Ok((len / factor, ch))
            }
            Layer::UpSample1D { factor } => {
                if *factor == 0 {
                    return Err(Error::invalid(format!("layer {index}: upsample factor 0")));
                }
                Ok((len * factor, ch))
            }
            Layer::Dense { in_dim, out_dim, .. } => {
                if len != 1 || ch != *in_dim {
                    return Err(Error::invalid(format!(
                        "layer {index}: dense expects (1, {in_dim}), got ({len}, {ch})"
                    )));
                }
                Ok((1, *out_dim))
            }
            Layer::Flatten => Ok((1, len * ch)),
            Layer::Reshape { len: l, channels } => {
                if len * ch != l * channels {
                    return Err(Error::invalid(format!(
                        "layer {index}: cannot reshape ({len}, {ch}) to ({l}, {channels})"
                    )));
                }
                Ok((*l, *channels))
            }
            Layer::ParallelAdd { a, b } => {
                let sa = infer_shapes(a, shape)?;
                let sb = infer_shapes(b, shape)?;
                if sa != sb {
                    return Err(Error::invalid(format!(
                        "layer {index}: parallel branches disagree: {sa:?} vs {sb:?}"
                    )));
                }
                Ok(sa)
            }
        }
    }

    pub fn forward(&self, x: &Signal) -> Signal {
        match self {
            Layer::Conv1D {
                in_ch,
                out_ch,
                kernel,
                act,
                w,
                b,
            } => conv1d_forward(x, *in_ch, *out_ch, *kernel, *act, w, b),
            Layer::MaxPool1D { factor } => {
                let out_len = x.len / factor;
                let mut out = Signal::zeros(out_len, x.channels);
                for p in 0..out_len {
                    for c in 0..x.channels {
                        let mut best = f64::NEG_INFINITY;
                        for q in p * factor..(p + 1) * factor {
                            let v = x.data[q * x.channels + c];
                            if v > best {
                                best = v;
                            }
                        }
                        out.data[p * x.channels + c] = best;
                    }
                }
                out
            }
            Layer::UpSample1D { factor } => {
                let mut out = Signal::zeros(x.len * factor, x.channels);
                for p in 0..x.len {
                    let row = &x.data[p * x.channels..(p + 1) * x.channels];
                    for r in 0..*factor {
                        let off = (p * factor + r) * x.channels;
                        out.data[off..off + x.channels].copy_from_slice(row);
                    }
                }
                out
            }
            Layer::Dense {
                in_dim,
                out_dim,
                act,
                w,
                b,
            } => {
                debug_assert_eq!(x.len, 1);
                debug_assert_eq!(x.channels, *in_dim);
                let mut out = Signal::zeros(1, *out_dim);
                out.data.copy_from_slice(b);
                for i in 0..*in_dim {
                    let xv = x.data[i];
                    let wrow = &w[i * out_dim..(i + 1) * out_dim];
                    for (o, wv) in wrow.iter().enumerate() {
                        out.data[o] += xv * wv;
                    }
                }
                for v in out.data.iter_mut() {
                    *v = act.apply(*v);
                }
                out
            }
            Layer::Flatten => Signal {
                len: 1,
                channels: x.len * x.channels,
                data: x.data.clone(),
            },
            Layer::Reshape { len, channels } => Signal {
                len: *len,
                channels: *channels,
                data: x.data.clone(),
            },
            Layer::ParallelAdd { a, b } => {
                let ya = forward_seq(a, x).1;
                let yb = forward_seq(b, x).1;
                debug_assert_eq!(ya.shape(), yb.shape());
                let mut out = ya;
                for (o, v) in out.data.iter_mut().zip(&yb.data) {
                    *o += v;
                }
                out
            }
        }
    }

    /// Pushes `grad_y` (loss gradient at this layer's output) back to the
    /// input, accumulating parameter gradients into `grads`.
    pub fn backward(
        &self,
        x: &Signal,
        y: &Signal,
        trace: &StepTrace,
        grad_y: &Signal,
        grads: &mut LayerGrads,
    ) -> Signal {
        match self {
            Layer::Conv1D {
                in_ch,
                out_ch,
                kernel,
                act,
                w,
                ..
            } => conv1d_backward(x, y, grad_y, *in_ch, *out_ch, *kernel, *act, w, grads),
            Layer::MaxPool1D { factor } => {
                let mut gx = Signal::zeros(x.len, x.channels);
                for p in 0..y.len {
                    for c in 0..x.channels {
                        // First maximum wins on ties: deterministic routing.
                        let mut best = f64::NEG_INFINITY;
                        let mut best_q = p * factor;
                        for q in p * factor..(p + 1) * factor {
                            let v = x.data[q * x.channels + c];
                            if v > best {
                                best = v;
                                best_q = q;
                            }
                        }
                        gx.data[best_q * x.channels + c] += grad_y.data[p * x.channels + c];
                    }
                }
                gx
            }
            Layer::UpSample1D { factor } => {
                let mut gx = Signal::zeros(x.len, x.channels);
                for p in 0..y.len {
                    let src = p / factor;
                    for c in 0..x.channels {
                        gx.data[src * x.channels + c] += grad_y.data[p * x.channels + c];
                    }
                }
                gx
            }
            Layer::Dense {
                in_dim,
                out_dim,
                act,
                w,
                ..
            } => {
                let mut gpre = vec![0.0; *out_dim];
                for o in 0..*out_dim {
                    gpre[o] = grad_y.data[o] * act.deriv_from_output(y.data[o]);
                }
                for (o, g) in gpre.iter().enumerate() {
                    grads.b[o] += g;
                }
                let mut gx = Signal::zeros(1, *in_dim);
                for i in 0..*in_dim {
                    let xv = x.data[i];
                    let wrow = &w[i * out_dim..(i + 1) * out_dim];
                    let grow = &mut grads.w[i * out_dim..(i + 1) * out_dim];
                    let mut acc = 0.0;
                    for o in 0..*out_dim {
                        grow[o] += xv * gpre[o];
                        acc += wrow[o] * gpre[o];
                    }
                    gx.data[i] = acc;
                }
                gx
            }
            Layer::Flatten => Signal {
                len: x.len,
                channels: x.channels,
                data: grad_y.data.clone(),
            },
            Layer::Reshape { .. } => Signal {
                len: x.len,
                channels: x.channels,
                data: grad_y.data.clone(),
            },
            Layer::ParallelAdd { a, b } => {
                let (ta, tb) = trace
                    .branches
                    .as_ref()
                    .expect("parallel trace recorded in forward");
                let (ga, gb) = grads
                    .branches
                    .as_mut()
                    .expect("parallel grads allocated by zero_grads");
                let gxa = backward_seq(a, x, ta, grad_y.clone(), ga);
                let gxb = backward_seq(b, x, tb, grad_y.clone(), gb);
                let mut gx = gxa;
                for (o, v) in gx.data.iter_mut().zip(&gxb.data) {
                    *o += v;
                }
                gx
            }
        }
    }
}

fn conv1d_forward(
    x: &Signal,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    act: Act,
    w: &[f64],
    b: &[f64],
) -> Signal {
    debug_assert_eq!(x.channels, in_ch);
    let pad = (kernel - 1) / 2;
    let mut out = Signal::zeros(x.len, out_ch);
    let mut acc = vec![0.0; out_ch];
    for p in 0..x.len {
        acc.copy_from_slice(b);
        for k in 0..kernel {
            let q = p + k;
            if q < pad || q - pad >= x.len {
                continue;
            }
            let q = q - pad;
            let xrow = &x.data[q * in_ch..(q + 1) * in_ch];
            let wblock = &w[k * in_ch * out_ch..(k + 1) * in_ch * out_ch];
            for (ci, &xv) in xrow.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &wblock[ci * out_ch..(ci + 1) * out_ch];
                for (o, wv) in wrow.iter().enumerate() {
                    acc[o] += xv * wv;
                }
            }
        }
        let orow = &mut out.data[p * out_ch..(p + 1) * out_ch];
        for (o, &a) in acc.iter().enumerate() {
            orow[o] = act.apply(a);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward(
    x: &Signal,
    y: &Signal,
    grad_y: &Signal,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    act: Act,
    w: &[f64],
    grads: &mut LayerGrads,
) -> Signal {
    let pad = (kernel - 1) / 2;
    let mut gx = Signal::zeros(x.len, in_ch);
    let mut gpre = vec![0.0; out_ch];
    for p in 0..x.len {
        let yrow = &y.data[p * out_ch..(p + 1) * out_ch];
        let grow = &grad_y.data[p * out_ch..(p + 1) * out_ch];
        let mut all_zero = true;
        for o in 0..out_ch {
            let g = grow[o] * act.deriv_from_output(yrow[o]);
            gpre[o] = g;
            if g != 0.0 {
                all_zero = false;
            }
        }
        if all_zero {
            continue;
        }
        for (o, &g) in gpre.iter().enumerate() {
            grads.b[o] += g;
        }
        for k in 0..kernel {
            let q = p + k;
            if q < pad || q - pad >= x.len {
                continue;
            }
            let q = q - pad;
            let xrow = &x.data[q * in_ch..(q + 1) * in_ch];
            let wblock = &w[k * in_ch * out_ch..(k + 1) * in_ch * out_ch];
            let gwblock = &mut grads.w[k * in_ch * out_ch..(k + 1) * in_ch * out_ch];
            let gxrow = &mut gx.data[q * in_ch..(q + 1) * in_ch];
            for ci in 0..in_ch {
                let xv = xrow[ci];
                let wrow = &wblock[ci * out_ch..(ci + 1) * out_ch];
                let gwrow = &mut gwblock[ci * out_ch..(ci + 1) * out_ch];
                let mut acc = 0.0;
                for o in 0..out_ch {
                    gwrow[o] += xv * gpre[o];
                    acc += wrow[o] * gpre[o];
                }
                gxrow[ci] += acc;
            }
        }
    }
    gx
}

/// Forward trace: this layer's output plus, for parallel blocks, the
/// branch traces needed to run their backward passes.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub output: Signal,
    pub branches: Option<(Vec<StepTrace>, Vec<StepTrace>)>,
}

/// Runs a layer stack, recording each step for backpropagation.
pub fn forward_seq(layers: &[Layer], input: &Signal) -> (Vec<StepTrace>, Signal) {
    let mut traces = Vec::with_capacity(layers.len());
    let mut current = input.clone();
    for layer in layers {
        let (branches, output) = match layer {
            Layer::ParallelAdd { a, b } => {
                let (ta, ya) = forward_seq(a, &current);
                let (tb, yb) = forward_seq(b, &current);
                debug_assert_eq!(ya.shape(), yb.shape());
                let mut out = ya;
                for (o, v) in out.data.iter_mut().zip(&yb.data) {
                    *o += v;
                }
                (Some((ta, tb)), out)
            }
            _ => (None, layer.forward(&current)),
        };
        traces.push(StepTrace {
            output: output.clone(),
            branches,
        });
        current = output;
    }
    (traces, current)
}

/// Inference-only pass; no traces kept.
pub fn forward_only(layers: &[Layer], input: &Signal) -> Signal {
    let mut current = input.clone();
    for layer in layers {
        current = layer.forward(&current);
    }
    current
}

/// Backpropagates through a traced stack; returns the input gradient.
pub fn backward_seq(
    layers: &[Layer],
    input: &Signal,
    traces: &[StepTrace],
    grad_out: Signal,
    grads: &mut [LayerGrads],
) -> Signal {
    debug_assert_eq!(layers.len(), traces.len());
    debug_assert_eq!(layers.len(), grads.len());
    let mut grad = grad_out;
    for i in (0..layers.len()).rev() {
        let layer_input = if i == 0 { input } else { &traces[i - 1].output };
        grad = layers[i].backward(layer_input, &traces[i].output, &traces[i], &grad, &mut grads[i]);
    }
    grad
}

/// Shape-checks a stack, returning its output shape.
pub fn infer_shapes(layers: &[Layer], input: (usize, usize)) -> Result<(usize, usize)> {
    let mut shape = input;
    for (i, layer) in layers.iter().enumerate() {
        shape = layer.infer_shape(shape, i)?;
    }
    Ok(shape)
}

/// Visits every parameter with its gradient, in a fixed order (layer by
/// layer, weights then biases, branch a before branch b). The order is
/// the contract for Adam state and flat serialization.
pub fn for_each_param_grad(
    layers: &mut [Layer],
    grads: &[LayerGrads],
    f: &mut impl FnMut(&mut f64, f64),
) {
    for (layer, grad) in layers.iter_mut().zip(grads) {
        match layer {
            Layer::Conv1D { w, b, .. } | Layer::Dense { w, b, .. } => {
                for (p, g) in w.iter_mut().zip(&grad.w) {
                    f(p, *g);
                }
                for (p, g) in b.iter_mut().zip(&grad.b) {
                    f(p, *g);
                }
            }
            Layer::ParallelAdd { a, b } => {
                let (ga, gb) = grad.branches.as_ref().expect("branch grads");
                for_each_param_grad(a, ga, f);
                for_each_param_grad(b, gb, f);
            }
            _ => {}
        }
    }
}

/// Visits every parameter mutably in the same fixed order.
pub fn for_each_param(layers: &mut [Layer], f: &mut impl FnMut(&mut f64)) {
    for layer in layers.iter_mut() {
        match layer {
            Layer::Conv1D { w, b, .. } | Layer::Dense { w, b, .. } => {
                for p in w.iter_mut() {
                    f(p);
                }
                for p in b.iter_mut() {
                    f(p);
                }
            }
            Layer::ParallelAdd { a, b } => {
                for_each_param(a, f);
                for_each_param(b, f);
            }
            _ => {}
        }
    }
}

pub fn param_count(layers: &[Layer]) -> usize {
    layers
        .iter()
        .map(|l| match l {
            Layer::Conv1D { w, b, .. } | Layer::Dense { w, b, .. } => w.len() + b.len(),
            Layer::ParallelAdd { a, b } => param_count(a) + param_count(b),
            _ => 0,
        })
        .sum()
}
