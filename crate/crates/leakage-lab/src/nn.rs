//! Minimal dense feedforward engine: forward evaluation, reverse-mode
//! gradients, Gaussian reparameterization, stable softmax/cross-entropy,
//! Adam, and a flat binary checkpoint format.

use crate::error::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LLNN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
    Softplus,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Softmax => 2,
            Activation::Softplus => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, Error> {
        Ok(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Softmax,
            3 => Activation::Softplus,
            other => return Err(Error::domain(format!("unknown activation tag {other}"))),
        })
    }
}

/// One affine layer: `out = act(W x + b)` with `W` stored row-major,
/// `rows` outputs by `cols` inputs.
#[derive(Debug, Clone)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Forward pass bookkeeping needed by the backward pass.
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("non-empty net")
    }
}

fn softmax_stable(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Numerically stable softmax over a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    softmax_stable(logits)
}

fn apply_activation(act: Activation, pre: &[f64]) -> Vec<f64> {
    match act {
        Activation::Identity => pre.to_vec(),
        Activation::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
        Activation::Softmax => softmax_stable(pre),
        Activation::Softplus => pre
            .iter()
            .map(|&v| {
                if v > 30.0 {
                    v
                } else {
                    v.exp().ln_1p()
                }
            })
            .collect(),
    }
}

fn activation_backward(act: Activation, pre: &[f64], out: &[f64], d_out: &[f64]) -> Vec<f64> {
    match act {
        Activation::Identity => d_out.to_vec(),
        // subgradient 0 at the kink
        Activation::Relu => pre
            .iter()
            .zip(d_out)
            .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
            .collect(),
        Activation::Softmax => {
            let dot: f64 = out.iter().zip(d_out).map(|(&s, &g)| s * g).sum();
            out.iter().zip(d_out).map(|(&s, &g)| s * (g - dot)).collect()
        }
        Activation::Softplus => pre
            .iter()
            .zip(d_out)
            .map(|(&p, &g)| g / (1.0 + (-p).exp()))
            .collect(),
    }
}

impl DenseNet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, Error> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.rows * layer.cols || layer.bias.len() != layer.rows {
                return Err(Error::shape(format!("layer {i} dimensions inconsistent")));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("layer {i} has non-finite parameters")));
            }
            if i + 1 < layers.len() {
                if layers[i + 1].cols != layer.rows {
                    return Err(Error::shape(format!(
                        "layer {i} outputs {} values but layer {} expects {}",
                        layer.rows,
                        i + 1,
                        layers[i + 1].cols
                    )));
                }
                if layer.activation == Activation::Softmax {
                    return Err(Error::shape("softmax is only valid as the final activation"));
                }
            }
        }
        Ok(Self { layers })
    }

    /// Fully connected net with the given layer widths and activations,
    /// weights drawn from `N(0, 1/fan_in)` under a fixed seed and biases
    /// starting at zero.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self, Error> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::shape(format!(
                "need one activation per layer: {} dims, {} activations",
                dims.len(),
                activations.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(activations.len());
        for (i, &act) in activations.iter().enumerate() {
            let (cols, rows) = (dims[i], dims[i + 1]);
            let scale = (1.0 / cols as f64).sqrt();
            let normal = Normal::new(0.0, scale).expect("positive scale");
            let weights = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
            let bias = vec![0.0; rows];
            layers.push(Layer { weights, bias, rows, cols, activation: act });
        }
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").rows
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.rows * l.cols + l.rows).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<(), Error> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.rows * l.cols;
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            l.bias.copy_from_slice(&params[offset..offset + l.rows]);
            offset += l.rows;
        }
        Ok(())
    }

    /// Forward pass; errors on an input of the wrong width.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, Error> {
        Ok(self.forward_trace(input)?.outputs.pop().expect("non-empty"))
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace, Error> {
        self.forward_trace_dropout(input, None)
    }

    /// Forward pass with optional inverted-dropout masks on hidden layers;
    /// evaluation passes `None`.
    pub fn forward_trace_dropout(
        &self,
        input: &[f64],
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<Trace, Error> {
        if input.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} values, net expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut masks: Option<Vec<Vec<f64>>> = None;
        let mut rate_rng = dropout;
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut pre = l.bias.clone();
            for r in 0..l.rows {
                let row = &l.weights[r * l.cols..(r + 1) * l.cols];
                pre[r] += row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
            }
            let mut out = apply_activation(l.activation, &pre);
            if li < last {
                if let Some((rate, ref mut rng)) = rate_rng {
                    if rate > 0.0 {
                        let keep = 1.0 - rate;
                        let mask: Vec<f64> = out
                            .iter()
                            .map(|_| {
                                if rand::Rng::gen::<f64>(rng) < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        out.iter_mut().zip(&mask).for_each(|(o, m)| *o *= m);
                        masks.get_or_insert_with(Vec::new).push(mask);
                    }
                }
            }
            inputs.push(x);
            pres.push(pre);
            outputs.push(out.clone());
            x = out;
        }
        Ok(Trace { inputs, pre: pres, outputs, masks })
    }

    /// Reverse pass from `d_output = dL/d(out)`. Returns the flat parameter
    /// gradient (aligned with `params_flat`) and the gradient with respect
    /// to the input vector.
    pub fn backward(&self, trace: &Trace, d_output: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut param_grad = vec![0.0; self.param_count()];
        let mut d = d_output.to_vec();
        let mut offset = self.param_count();
        for (li, l) in self.layers.iter().enumerate().rev() {
            if li < self.layers.len() - 1 {
                if let Some(masks) = &trace.masks {
                    d.iter_mut().zip(&masks[li]).for_each(|(g, m)| *g *= m);
                }
            }
            let d_pre = activation_backward(l.activation, &trace.pre[li], &trace.outputs[li], &d);
            offset -= l.rows * l.cols + l.rows;
            let (wslot, bslot) = param_grad[offset..offset + l.rows * l.cols + l.rows]
                .split_at_mut(l.rows * l.cols);
            let x = &trace.inputs[li];
            for r in 0..l.rows {
                let g = d_pre[r];
                bslot[r] += g;
                let row = &mut wslot[r * l.cols..(r + 1) * l.cols];
                for (w, &xv) in row.iter_mut().zip(x) {
                    *w += g * xv;
                }
            }
            let mut d_in = vec![0.0; l.cols];
            for r in 0..l.rows {
                let g = d_pre[r];
                let row = &l.weights[r * l.cols..(r + 1) * l.cols];
                for (di, &w) in d_in.iter_mut().zip(row) {
                    *di += g * w;
                }
            }
            d = d_in;
        }
        (param_grad, d)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), Error> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            buf.extend_from_slice(&(l.rows as u32).to_le_bytes());
            buf.extend_from_slice(&(l.cols as u32).to_le_bytes());
            buf.push(l.activation.tag());
            for v in l.weights.iter().chain(&l.bias) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self, Error> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8], Error> {
            if *cursor + n > bytes.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: "truncated checkpoint".into(),
                });
            }
            let s = &bytes[*cursor..*cursor + n];
            *cursor += n;
            Ok(s)
        };
        if take(&mut cursor, 4)? != CHECKPOINT_MAGIC {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: "bad magic bytes".into(),
            });
        }
        let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: format!("unsupported checkpoint version {version}"),
            });
        }
        let count = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
            let cols = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
            let activation = Activation::from_tag(take(&mut cursor, 1)?[0]).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let mut read_f64s = |n: usize| -> Result<Vec<f64>, Error> {
                let raw = take(&mut cursor, 8 * n)?;
                Ok(raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect())
            };
            let weights = read_f64s(rows * cols)?;
            let bias = read_f64s(rows)?;
            layers.push(Layer { weights, bias, rows, cols, activation });
        }
        Self::from_layers(layers)
    }
}

/// Loss defined on a network's output vector, with its gradient.
pub trait OutputLoss {
    fn value(&self, output: &[f64]) -> f64;
    fn grad(&self, output: &[f64]) -> Vec<f64>;
}

/// Evaluate a loss at `net(input)` and return `(loss, d params, d input)`.
pub fn grad_with<L: OutputLoss + ?Sized>(
    net: &DenseNet,
    input: &[f64],
    loss: &L,
) -> Result<(f64, Vec<f64>, Vec<f64>), Error> {
    let trace = net.forward_trace(input)?;
    let value = loss.value(trace.output());
    if !value.is_finite() {
        return Err(Error::domain(format!("loss evaluated to {value}")));
    }
    let d_out = loss.grad(trace.output());
    let (param_grad, input_grad) = net.backward(&trace, &d_out);
    Ok((value, param_grad, input_grad))
}

/// Diagonal Gaussian output head: `sigma = exp(log_sigma)` keeps the scale
/// positive by construction.
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl GaussianHead {
    /// Split a network output of width `2k` into `(mu, log_sigma)`.
    pub fn from_net_output(output: &[f64]) -> Result<Self, Error> {
        if output.len() % 2 != 0 {
            return Err(Error::shape("Gaussian head needs an even output width"));
        }
        let k = output.len() / 2;
        Ok(Self {
            mu: output[..k].to_vec(),
            log_sigma: output[k..].to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// `z = mu + sigma .* eps`; differentiable in `(mu, log_sigma)` for fixed noise.
pub fn reparam_sample(head: &GaussianHead, noise: &[f64]) -> Result<Vec<f64>, Error> {
    if noise.len() != head.dim() {
        return Err(Error::shape(format!(
            "noise has {} entries, head has {}",
            noise.len(),
            head.dim()
        )));
    }
    Ok(head
        .mu
        .iter()
        .zip(&head.log_sigma)
        .zip(noise)
        .map(|((&m, &ls), &e)| m + ls.exp() * e)
        .collect())
}

/// Bias-corrected Adam with the usual defaults.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update in place. Rejects non-finite gradients.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<(), Error> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::shape(format!(
            "adam state sized {} got params {} grads {}",
            state.m.len(),
            params.len(),
            grads.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::domain("non-finite gradient passed to Adam"));
    }
    state.t += 1;
    let b1t = 1.0 - state.beta1.powi(state.t as i32);
    let b2t = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Cross-entropy `-ln p[label]` with the probability clamped at `1e-12`.
pub fn cross_entropy(probabilities: &[f64], label: usize) -> Result<f64, Error> {
    if label >= probabilities.len() {
        return Err(Error::domain(format!(
            "label {label} out of range for {} classes",
            probabilities.len()
        )));
    }
    Ok(-probabilities[label].clamp(1e-12, 1.0).ln())
}
