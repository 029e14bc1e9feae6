//! The alternating privatizer/adversary training loop: losses, distortion
//! measures, the penalty schedule, and the three privatizer variants.
//!
//! Each outer iteration runs `k` Adam steps on the adversary against the
//! cross-entropy loss with the privatizer frozen, then one Adam step on the
//! privatizer against the estimated privacy metric plus a hinge penalty on
//! the distortion budget. Inner steps draw fresh minibatches from their own
//! seeded stream. The adversary classifies the average of the `S` latent
//! draws, both in training and at evaluation; the privacy estimator
//! consumes the adversary's posteriors at the individual draws, as its
//! derivation asks.

use crate::datasets::{minibatches, Dataset};
use crate::error::Error;
use crate::estimators::{mi_value_and_grad, sibson_value_and_grad, PosteriorBatch, PriorDistribution};
use crate::leakage::SibsonOrder;
use crate::nn::{adam_step, cross_entropy, AdamState, Activation, DenseNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Sibson,
    Mi,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Sibson => write!(f, "sibson"),
            Metric::Mi => write!(f, "mi"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrivatizerKind {
    Affine,
    NoisyAffine,
    Mlp,
}

impl std::fmt::Display for PrivatizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrivatizerKind::Affine => write!(f, "affine"),
            PrivatizerKind::NoisyAffine => write!(f, "noisy_affine"),
            PrivatizerKind::Mlp => write!(f, "mlp"),
        }
    }
}

/// Penalty coefficient over the outer iterations. The ramp reaches 11 at the
/// final iteration; the legacy variant is the older listing's steeper ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltySchedule {
    Ramp,
    Legacy,
}

impl PenaltySchedule {
    pub fn rho(&self, t: usize, total: usize) -> f64 {
        let frac = t as f64 / total.max(1) as f64;
        match self {
            PenaltySchedule::Ramp => 10.0 * frac + 1.0,
            PenaltySchedule::Legacy => 1000.0 * frac,
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub minibatch: usize,
    pub latent_samples: usize,
    pub adversary_steps: usize,
    pub epochs: usize,
    pub distortion_budget: f64,
    pub order: SibsonOrder,
    pub metric: Metric,
    pub privatizer: PrivatizerKind,
    pub learning_rate: f64,
    pub seed: u64,
    pub penalty: PenaltySchedule,
    pub privatizer_hidden: Vec<usize>,
    pub adversary_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub dropout: f64,
    /// Divisor applied to the L2 distortion (feature count for image data,
    /// so budgets read as per-pixel mean squared error).
    pub distortion_normalizer: f64,
}

impl TrainingConfig {
    /// Paper synthetic setup: batch 500, 12 latent draws, 20 adversary steps,
    /// order 20, learning rate 1e-3.
    pub fn synthetic_defaults() -> Self {
        Self {
            minibatch: 500,
            latent_samples: 12,
            adversary_steps: 20,
            epochs: 1000,
            distortion_budget: 1.0,
            order: SibsonOrder::new(20.0).expect("valid order"),
            metric: Metric::Sibson,
            privatizer: PrivatizerKind::Affine,
            learning_rate: 1e-3,
            seed: 7,
            penalty: PenaltySchedule::Ramp,
            privatizer_hidden: vec![4, 2],
            adversary_hidden: vec![4, 2],
            latent_dim: 1,
            dropout: 0.0,
            distortion_normalizer: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.minibatch == 0 || self.latent_samples == 0 || self.adversary_steps == 0 || self.epochs == 0
        {
            return Err(Error::domain("M, S, k and epochs must all be at least 1"));
        }
        if self.distortion_budget < 0.0 {
            return Err(Error::domain("distortion budget must be nonnegative"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::domain("learning rate must be positive"));
        }
        if self.latent_dim == 0 {
            return Err(Error::domain("latent dimension must be at least 1"));
        }
        if !(self.distortion_normalizer > 0.0) {
            return Err(Error::domain("distortion normalizer must be positive"));
        }
        Ok(())
    }
}

/// Trainable privatizer. Affine variants expose their shift (and noise
/// scale) directly as the trainable parameters; the network variant owns the
/// encoder and the reconstruction branch that the distortion term trains.
#[derive(Debug, Clone)]
pub enum Privatizer {
    Affine { beta0: f64, beta1: f64 },
    NoisyAffine { beta0: f64, beta1: f64, gamma: f64 },
    Mlp { encoder: DenseNet, recon: DenseNet },
}

impl Privatizer {
    pub fn kind(&self) -> PrivatizerKind {
        match self {
            Privatizer::Affine { .. } => PrivatizerKind::Affine,
            Privatizer::NoisyAffine { .. } => PrivatizerKind::NoisyAffine,
            Privatizer::Mlp { .. } => PrivatizerKind::Mlp,
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Privatizer::Affine { .. } => 2,
            Privatizer::NoisyAffine { .. } => 3,
            Privatizer::Mlp { encoder, recon } => encoder.param_count() + recon.param_count(),
        }
    }

    fn params_flat(&self) -> Vec<f64> {
        match self {
            Privatizer::Affine { beta0, beta1 } => vec![*beta0, *beta1],
            Privatizer::NoisyAffine { beta0, beta1, gamma } => vec![*beta0, *beta1, *gamma],
            Privatizer::Mlp { encoder, recon } => {
                let mut p = encoder.params_flat();
                p.extend(recon.params_flat());
                p
            }
        }
    }

    fn set_params_flat(&mut self, params: &[f64]) -> Result<(), Error> {
        match self {
            Privatizer::Affine { beta0, beta1 } => {
                *beta0 = params[0].max(0.0);
                *beta1 = params[1].max(0.0);
            }
            Privatizer::NoisyAffine { beta0, beta1, gamma } => {
                *beta0 = params[0].max(0.0);
                *beta1 = params[1].max(0.0);
                *gamma = params[2].max(0.0);
            }
            Privatizer::Mlp { encoder, recon } => {
                let ne = encoder.param_count();
                encoder.set_params_flat(&params[..ne])?;
                recon.set_params_flat(&params[ne..])?;
            }
        }
        Ok(())
    }

    fn is_stochastic(&self) -> bool {
        !matches!(self, Privatizer::Affine { .. })
    }

    /// Width of the latent vector: the feature width for affine variants,
    /// the Gaussian head width for the network.
    fn latent_width(&self, feature_dim: usize) -> usize {
        match self {
            Privatizer::Mlp { encoder, .. } => encoder.output_dim() / 2,
            _ => feature_dim,
        }
    }

    /// Affine shift for a class: `+beta0` for class 0, `-beta1` for class 1.
    fn shift(&self, c: usize) -> f64 {
        match self {
            Privatizer::Affine { beta0, beta1 } | Privatizer::NoisyAffine { beta0, beta1, .. } => {
                if c == 0 {
                    *beta0
                } else {
                    -*beta1
                }
            }
            Privatizer::Mlp { .. } => unreachable!("shift is an affine concept"),
        }
    }
}

/// Zero the output layer so the privatizer starts information-free
/// (`mu = 0`, reconstruction 0), matching the listing that initializes the
/// privatizer parameters to zero; hidden layers keep the seeded draw so
/// gradients flow from the first step.
fn zero_final_layer(net: &mut DenseNet) -> Result<(), Error> {
    let mut params = net.params_flat();
    let last = net.layers().last().expect("non-empty net");
    let tail = last.rows * last.cols + last.rows;
    let n = params.len();
    params[n - tail..].fill(0.0);
    net.set_params_flat(&params)
}

/// The encoder starts wide: a large initial latent scale keeps the release
/// uninformative while the reconstruction pressure pulls structure in, so
/// the privacy term constrains every bit of information as it arrives
/// instead of chasing an already-confident adversary.
const INITIAL_LOG_SIGMA: f64 = 1.4;

fn raise_log_sigma_bias(encoder: &mut DenseNet, latent_dim: usize, value: f64) -> Result<(), Error> {
    let mut params = encoder.params_flat();
    let n = params.len();
    // final-layer bias is the last 2*latent_dim entries: mu then log sigma
    params[n - latent_dim..].fill(value);
    encoder.set_params_flat(&params)
}

fn one_hot_input(x: &[f64], c: usize, num_classes: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + num_classes);
    v.extend_from_slice(x);
    for g in 0..num_classes {
        v.push(if g == c { 1.0 } else { 0.0 });
    }
    v
}

pub(crate) fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    for &b in tag.as_bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^ (h >> 31)
}

/// Mean cross-entropy of a posterior batch against its labels.
pub fn adversary_loss(batch: &PosteriorBatch) -> Result<f64, Error> {
    let (n, s) = (batch.num_samples(), batch.num_draws());
    let mut total = 0.0;
    for sample in 0..n {
        let label = batch.labels()[sample];
        for draw in 0..s {
            total += cross_entropy(batch.slice(sample, draw), label)?;
        }
    }
    Ok(total / (n * s) as f64)
}

/// Privacy estimate plus the hinge penalty `rho * max(0, mean distortion - D)`.
pub fn privatizer_loss(
    batch: &PosteriorBatch,
    prior: &PriorDistribution,
    metric: Metric,
    order: SibsonOrder,
    distortions: &[f64],
    budget: f64,
    rho: f64,
) -> Result<f64, Error> {
    if rho < 0.0 {
        return Err(Error::domain("penalty coefficient must be nonnegative"));
    }
    if distortions.len() != batch.num_samples() {
        return Err(Error::shape(format!(
            "{} distortions for {} samples",
            distortions.len(),
            batch.num_samples()
        )));
    }
    let info = match metric {
        Metric::Sibson => sibson_value_and_grad(batch, prior, order, false)?.0,
        Metric::Mi => mi_value_and_grad(batch, prior, false)?.0,
    };
    let mean_dist = distortions.iter().sum::<f64>() / distortions.len() as f64;
    Ok(info + rho * (mean_dist - budget).max(0.0))
}

/// Squared Euclidean distance.
pub fn distortion_l2(x: &[f64], x_hat: &[f64]) -> Result<f64, Error> {
    if x.len() != x_hat.len() {
        return Err(Error::shape(format!(
            "distortion of vectors with lengths {} and {}",
            x.len(),
            x_hat.len()
        )));
    }
    Ok(x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Closed-form expected distortion of the (noisy) affine transform,
/// `(1-p) beta0^2 + p beta1^2 (+ gamma^2)`.
pub fn distortion_affine(beta0: f64, beta1: f64, gamma: f64, p_tilde: f64, noisy: bool) -> f64 {
    let base = (1.0 - p_tilde) * beta0 * beta0 + p_tilde * beta1 * beta1;
    if noisy {
        base + gamma * gamma
    } else {
        base
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub adversary_loss: f64,
    pub privatizer_loss: f64,
    pub mean_distortion: f64,
    pub adversary_accuracy: f64,
    pub rho: f64,
}

/// Result of one alternating run. A non-finite loss aborts the loop; the
/// trace up to the failure is kept and `diverged_at` records the iteration.
#[derive(Debug, Clone)]
pub struct TrainedPair {
    pub privatizer: Privatizer,
    pub adversary: DenseNet,
    pub trace: Vec<EpochStats>,
    pub diverged_at: Option<usize>,
    pub adversary_updates: usize,
    pub privatizer_updates: usize,
}

impl TrainedPair {
    /// Persist the network components in the flat checkpoint format.
    pub fn save_checkpoints(&self, dir: &Path) -> Result<(), Error> {
        self.adversary.save_checkpoint(&dir.join("adversary.llnn"))?;
        if let Privatizer::Mlp { encoder, recon } = &self.privatizer {
            encoder.save_checkpoint(&dir.join("encoder.llnn"))?;
            recon.save_checkpoint(&dir.join("recon.llnn"))?;
        }
        Ok(())
    }
}

/// Write the per-epoch trace as CSV.
pub fn write_trace_csv(pair: &TrainedPair, path: &Path) -> Result<(), Error> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,adversary_loss,privatizer_loss,mean_distortion,adversary_accuracy,rho")?;
    for s in &pair.trace {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.epoch, s.adversary_loss, s.privatizer_loss, s.mean_distortion, s.adversary_accuracy, s.rho
        )?;
    }
    Ok(())
}

struct BlockStream<'a> {
    dataset: &'a Dataset,
    batch: usize,
    seed: u64,
    round: u64,
    blocks: Vec<Vec<usize>>,
    pos: usize,
}

impl<'a> BlockStream<'a> {
    fn new(dataset: &'a Dataset, batch: usize, seed: u64) -> Self {
        Self { dataset, batch, seed, round: 0, blocks: Vec::new(), pos: 0 }
    }

    fn next_block(&mut self) -> Vec<usize> {
        if self.pos >= self.blocks.len() {
            self.blocks = minibatches(self.dataset, self.batch, derive_seed(self.seed, "round", self.round));
            self.round += 1;
            self.pos = 0;
        }
        let block = self.blocks[self.pos].clone();
        self.pos += 1;
        block
    }
}

/// Per-sample latent draws plus everything the backward pass needs.
struct SampleDraws {
    zs: Vec<Vec<f64>>,
    eps: Vec<Vec<f64>>,
    encoder_trace: Option<crate::nn::Trace>,
    sigma: Vec<f64>,
}

fn draw_latents(
    privatizer: &Privatizer,
    x: &[f64],
    c: usize,
    num_classes: usize,
    s_eff: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SampleDraws, Error> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let latent = privatizer.latent_width(x.len());
    let eps: Vec<Vec<f64>> = (0..s_eff)
        .map(|_| (0..latent).map(|_| normal.sample(rng)).collect())
        .collect();
    latents_from_noise(privatizer, x, c, num_classes, &eps)
}

/// Latent draws for one sample from supplied standard-normal noise.
fn latents_from_noise(
    privatizer: &Privatizer,
    x: &[f64],
    c: usize,
    num_classes: usize,
    eps: &[Vec<f64>],
) -> Result<SampleDraws, Error> {
    let s_eff = eps.len();
    match privatizer {
        Privatizer::Affine { .. } => {
            let z = vec![x[0] + privatizer.shift(c)];
            Ok(SampleDraws {
                zs: vec![z; s_eff],
                eps: eps.to_vec(),
                encoder_trace: None,
                sigma: Vec::new(),
            })
        }
        Privatizer::NoisyAffine { gamma, .. } => {
            let base = x[0] + privatizer.shift(c);
            let zs = eps.iter().map(|e| vec![base + gamma * e[0]]).collect();
            Ok(SampleDraws { zs, eps: eps.to_vec(), encoder_trace: None, sigma: Vec::new() })
        }
        Privatizer::Mlp { encoder, .. } => {
            let input = one_hot_input(x, c, num_classes);
            let trace = encoder.forward_trace(&input)?;
            let out = trace.output();
            let k = out.len() / 2;
            let mu: Vec<f64> = out[..k].to_vec();
            let sigma: Vec<f64> = out[k..].iter().map(|&ls| ls.exp()).collect();
            let zs = eps
                .iter()
                .map(|e| {
                    mu.iter()
                        .zip(&sigma)
                        .zip(e)
                        .map(|((&m, &sg), &ev)| m + sg * ev)
                        .collect()
                })
                .collect();
            Ok(SampleDraws { zs, eps: eps.to_vec(), encoder_trace: Some(trace), sigma })
        }
    }
}

fn mean_latent(draws: &SampleDraws) -> Vec<f64> {
    let s = draws.zs.len() as f64;
    let dim = draws.zs[0].len();
    let mut zbar = vec![0.0; dim];
    for z in &draws.zs {
        for (acc, &v) in zbar.iter_mut().zip(z) {
            *acc += v;
        }
    }
    zbar.iter_mut().for_each(|v| *v /= s);
    zbar
}

/// One Adam step on the adversary over a minibatch, returning the mean
/// cross-entropy before the update. The adversary classifies the average
/// of the latent draws; the privacy estimator separately queries it at the
/// individual draws.
fn adversary_update(
    adversary: &mut DenseNet,
    adam: &mut AdamState,
    privatizer: &Privatizer,
    data: &Dataset,
    block: &[usize],
    s_eff: usize,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, Error> {
    let mut grad = vec![0.0; adversary.param_count()];
    let mut loss = 0.0;
    let scale = 1.0 / block.len() as f64;
    for &idx in block {
        let draws =
            draw_latents(privatizer, data.row(idx), data.labels()[idx], data.num_classes(), s_eff, rng)?;
        let label = data.labels()[idx];
        let zbar = mean_latent(&draws);
        let trace = if dropout > 0.0 {
            adversary.forward_trace_dropout(&zbar, Some((dropout, rng)))?
        } else {
            adversary.forward_trace(&zbar)?
        };
        loss += cross_entropy(trace.output(), label)?;
        let mut d_out = vec![0.0; trace.output().len()];
        d_out[label] = -scale / trace.output()[label].clamp(1e-12, 1.0);
        let (pg, _) = adversary.backward(&trace, &d_out);
        for (g, p) in grad.iter_mut().zip(&pg) {
            *g += p;
        }
    }
    loss *= scale;
    if !loss.is_finite() {
        return Err(Error::domain(format!("adversary loss diverged to {loss}")));
    }
    let mut params = adversary.params_flat();
    adam_step(adam, &mut params, &grad)?;
    adversary.set_params_flat(&params)?;
    Ok(loss)
}

/// One Adam step on the privatizer against the estimated privacy metric plus
/// the distortion hinge, with the adversary frozen. Returns the loss and the
/// minibatch mean distortion.
#[allow(clippy::too_many_arguments)]
fn privatizer_update(
    privatizer: &mut Privatizer,
    adam: &mut AdamState,
    adversary: &DenseNet,
    data: &Dataset,
    block: &[usize],
    config: &TrainingConfig,
    prior: &PriorDistribution,
    p_tilde: f64,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64), Error> {
    let s_eff = if privatizer.is_stochastic() { config.latent_samples } else { 1 };
    let latent = privatizer.latent_width(data.feature_dim());
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let eps: Vec<Vec<Vec<f64>>> = (0..block.len())
        .map(|_| {
            (0..s_eff)
                .map(|_| (0..latent).map(|_| normal.sample(rng)).collect())
                .collect()
        })
        .collect();
    let (loss, mean_dist, grad) =
        privatizer_loss_and_grad(privatizer, adversary, data, block, &eps, config, prior, p_tilde, rho)?;
    let mut params = privatizer.params_flat();
    adam_step(adam, &mut params, &grad)?;
    privatizer.set_params_flat(&params)?;
    Ok((loss, mean_dist))
}

/// Loss and parameter gradient of the privatizer objective at fixed noise.
#[allow(clippy::too_many_arguments)]
pub(crate) fn privatizer_loss_and_grad(
    privatizer: &Privatizer,
    adversary: &DenseNet,
    data: &Dataset,
    block: &[usize],
    eps: &[Vec<Vec<f64>>],
    config: &TrainingConfig,
    prior: &PriorDistribution,
    p_tilde: f64,
    rho: f64,
) -> Result<(f64, f64, Vec<f64>), Error> {
    let m = block.len();
    let s_eff = eps[0].len();
    let g = data.num_classes();

    let mut all_draws = Vec::with_capacity(m);
    let mut adversary_traces = Vec::with_capacity(m * s_eff);
    let mut posteriors = Vec::with_capacity(m * s_eff * g);
    let mut labels = Vec::with_capacity(m);
    for (row, &idx) in block.iter().enumerate() {
        let draws =
            latents_from_noise(privatizer, data.row(idx), data.labels()[idx], g, &eps[row])?;
        for z in &draws.zs {
            let trace = adversary.forward_trace(z)?;
            posteriors.extend_from_slice(trace.output());
            adversary_traces.push(trace);
        }
        labels.push(data.labels()[idx]);
        all_draws.push(draws);
    }
    let batch = PosteriorBatch::new(posteriors, labels, s_eff, g)?;
    let (info_value, info_grad) = match config.metric {
        Metric::Sibson => sibson_value_and_grad(&batch, prior, config.order, true)?,
        Metric::Mi => mi_value_and_grad(&batch, prior, true)?,
    };

    // distortion per sample and the hinge state
    let mut recon_traces: Vec<Option<crate::nn::Trace>> = Vec::with_capacity(m);
    let mut distortions = vec![0.0; m];
    match &*privatizer {
        Privatizer::Affine { beta0, beta1 } => {
            distortions.fill(distortion_affine(*beta0, *beta1, 0.0, p_tilde, false));
            recon_traces.resize_with(m, || None);
        }
        Privatizer::NoisyAffine { beta0, beta1, gamma } => {
            distortions.fill(distortion_affine(*beta0, *beta1, *gamma, p_tilde, true));
            recon_traces.resize_with(m, || None);
        }
        Privatizer::Mlp { recon, .. } => {
            for (i, &idx) in block.iter().enumerate() {
                let zbar = mean_latent(&all_draws[i]);
                let trace = recon.forward_trace(&zbar)?;
                distortions[i] = distortion_l2(data.row(idx), trace.output())? / config.distortion_normalizer;
                recon_traces.push(Some(trace));
            }
        }
    }
    let mean_dist = distortions.iter().sum::<f64>() / m as f64;
    let hinge_active = mean_dist > config.distortion_budget;
    let loss = info_value + rho * (mean_dist - config.distortion_budget).max(0.0);
    if !loss.is_finite() {
        return Err(Error::domain(format!("privatizer loss diverged to {loss}")));
    }

    let mut grad = vec![0.0; privatizer.param_count()];
    match &*privatizer {
        Privatizer::Affine { beta0, beta1 } | Privatizer::NoisyAffine { beta0, beta1, .. } => {
            let (b0, b1) = (*beta0, *beta1);
            let gamma_val = match &*privatizer {
                Privatizer::NoisyAffine { gamma, .. } => Some(*gamma),
                _ => None,
            };
            for (i, &idx) in block.iter().enumerate() {
                let c = data.labels()[idx];
                let draws = &all_draws[i];
                for draw in 0..s_eff {
                    let d_post = &info_grad[(i * s_eff + draw) * g..(i * s_eff + draw + 1) * g];
                    let (_, d_z) = adversary.backward(&adversary_traces[i * s_eff + draw], d_post);
                    // z = x + (1-c) b0 - c b1 (+ gamma eps)
                    let dzv = d_z[0];
                    if c == 0 {
                        grad[0] += dzv;
                    } else {
                        grad[1] -= dzv;
                    }
                    if gamma_val.is_some() {
                        grad[2] += dzv * draws.eps[draw][0];
                    }
                }
            }
            if hinge_active {
                grad[0] += rho * 2.0 * (1.0 - p_tilde) * b0;
                grad[1] += rho * 2.0 * p_tilde * b1;
                if let Some(gm) = gamma_val {
                    grad[2] += rho * 2.0 * gm;
                }
            }
        }
        Privatizer::Mlp { encoder, recon } => {
            let ne = encoder.param_count();
            let latent = config.latent_dim;
            for (i, &idx) in block.iter().enumerate() {
                let draws = &all_draws[i];
                // gradient into each latent draw from the privacy estimate
                let mut d_zs: Vec<Vec<f64>> = (0..s_eff).map(|_| vec![0.0; latent]).collect();
                for draw in 0..s_eff {
                    let d_post = &info_grad[(i * s_eff + draw) * g..(i * s_eff + draw + 1) * g];
                    let (_, d_z) = adversary.backward(&adversary_traces[i * s_eff + draw], d_post);
                    d_zs[draw] = d_z;
                }
                // hinge: through the reconstruction of the mean latent
                if hinge_active {
                    let trace = recon_traces[i].as_ref().expect("recon trace for mlp");
                    let x = data.row(idx);
                    let d_xhat: Vec<f64> = trace
                        .output()
                        .iter()
                        .zip(x)
                        .map(|(&xh, &xv)| rho / (m as f64 * config.distortion_normalizer) * 2.0 * (xh - xv))
                        .collect();
                    let (rg, d_zbar) = recon.backward(trace, &d_xhat);
                    for (gslot, rv) in grad[ne..].iter_mut().zip(&rg) {
                        *gslot += rv;
                    }
                    for d_z in d_zs.iter_mut() {
                        for (dv, &db) in d_z.iter_mut().zip(&d_zbar) {
                            *dv += db / s_eff as f64;
                        }
                    }
                }
                // back through the reparameterization into the encoder head
                let mut d_head = vec![0.0; 2 * latent];
                for (draw, d_z) in d_zs.iter().enumerate() {
                    for j in 0..latent {
                        d_head[j] += d_z[j];
                        d_head[latent + j] += d_z[j] * draws.sigma[j] * draws.eps[draw][j];
                    }
                }
                let trace = draws.encoder_trace.as_ref().expect("encoder trace for mlp");
                let (eg, _) = encoder.backward(trace, &d_head);
                for (gslot, ev) in grad[..ne].iter_mut().zip(&eg) {
                    *gslot += ev;
                }
            }
        }
    }

    Ok((loss, mean_dist, grad))
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite posterior"))
        .map(|(i, _)| i)
        .expect("non-empty output")
}

fn trace_accuracy(
    adversary: &DenseNet,
    privatizer: &Privatizer,
    data: &Dataset,
    s_eff: usize,
    seed: u64,
) -> Result<f64, Error> {
    let n = data.len().min(1024);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for idx in 0..n {
        let draws = draw_latents(privatizer, data.row(idx), data.labels()[idx], data.num_classes(), s_eff, &mut rng)?;
        let posterior = adversary.forward(&mean_latent(&draws))?;
        correct += usize::from(argmax(&posterior) == data.labels()[idx]);
    }
    Ok(correct as f64 / n as f64)
}

/// Run the alternating training loop over the dataset. Deterministic given
/// the config seed; single-threaded.
pub fn alternating_train(config: &TrainingConfig, train: &Dataset) -> Result<TrainedPair, Error> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::domain("training dataset is empty"));
    }
    let feature_dim = train.feature_dim();
    let g = train.num_classes();
    if matches!(config.privatizer, PrivatizerKind::Affine | PrivatizerKind::NoisyAffine)
        && feature_dim != 1
    {
        return Err(Error::shape("affine privatizers are defined on scalar features"));
    }

    let prior = PriorDistribution::from_labels(train.labels(), g)?;
    let p_tilde = prior.prob(0);

    let mut privatizer = match config.privatizer {
        PrivatizerKind::Affine => Privatizer::Affine { beta0: 0.0, beta1: 0.0 },
        PrivatizerKind::NoisyAffine => Privatizer::NoisyAffine { beta0: 0.0, beta1: 0.0, gamma: 0.0 },
        PrivatizerKind::Mlp => {
            let mut enc_dims = vec![feature_dim + g];
            enc_dims.extend_from_slice(&config.privatizer_hidden);
            enc_dims.push(2 * config.latent_dim);
            let mut enc_act = vec![Activation::Relu; config.privatizer_hidden.len()];
            enc_act.push(Activation::Identity);
            let mut encoder = DenseNet::init(&enc_dims, &enc_act, derive_seed(config.seed, "encoder", 0))?;
            zero_final_layer(&mut encoder)?;
            raise_log_sigma_bias(&mut encoder, config.latent_dim, INITIAL_LOG_SIGMA)?;

            let mut rec_dims = vec![config.latent_dim];
            rec_dims.extend_from_slice(&config.privatizer_hidden);
            rec_dims.push(feature_dim);
            let mut rec_act = vec![Activation::Relu; config.privatizer_hidden.len()];
            rec_act.push(Activation::Identity);
            let mut recon = DenseNet::init(&rec_dims, &rec_act, derive_seed(config.seed, "recon", 0))?;
            zero_final_layer(&mut recon)?;
            Privatizer::Mlp { encoder, recon }
        }
    };
    let latent_dim = match config.privatizer {
        PrivatizerKind::Mlp => config.latent_dim,
        _ => feature_dim,
    };
    let mut adv_dims = vec![latent_dim];
    adv_dims.extend_from_slice(&config.adversary_hidden);
    adv_dims.push(g);
    let mut adv_act = vec![Activation::Relu; config.adversary_hidden.len()];
    adv_act.push(Activation::Softmax);
    let mut adversary = DenseNet::init(&adv_dims, &adv_act, derive_seed(config.seed, "adversary", 0))?;

    let mut adam_a = AdamState::new(adversary.param_count(), config.learning_rate);
    let mut adam_p = AdamState::new(privatizer.param_count(), config.learning_rate);

    let blocks_per_epoch = train.len().div_ceil(config.minibatch);
    let total_iters = config.epochs * blocks_per_epoch;
    let s_eff = if privatizer.is_stochastic() { config.latent_samples } else { 1 };

    let mut adv_stream = BlockStream::new(train, config.minibatch, derive_seed(config.seed, "adv-stream", 0));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "noise", 0));

    let mut trace = Vec::with_capacity(config.epochs);
    let mut diverged_at = None;
    let mut adversary_updates = 0usize;
    let mut privatizer_updates = 0usize;
    let mut t = 0usize;

    'outer: for epoch in 0..config.epochs {
        let priv_blocks = minibatches(train, config.minibatch, derive_seed(config.seed, "priv-epoch", epoch as u64));
        let mut epoch_adv_loss = 0.0;
        let mut epoch_priv_loss = 0.0;
        let mut epoch_dist = 0.0;
        let mut steps = 0usize;
        let mut rho = config.penalty.rho(t, total_iters);
        for block in priv_blocks {
            rho = config.penalty.rho(t, total_iters);
            let mut adv_loss_acc = 0.0;
            for _ in 0..config.adversary_steps {
                let adv_block = adv_stream.next_block();
                match adversary_update(
                    &mut adversary,
                    &mut adam_a,
                    &privatizer,
                    train,
                    &adv_block,
                    s_eff,
                    config.dropout,
                    &mut noise_rng,
                ) {
                    Ok(loss) => adv_loss_acc += loss,
                    Err(_) => {
                        diverged_at = Some(t);
                        break 'outer;
                    }
                }
                adversary_updates += 1;
            }
            match privatizer_update(
                &mut privatizer,
                &mut adam_p,
                &adversary,
                train,
                &block,
                config,
                &prior,
                p_tilde,
                rho,
                &mut noise_rng,
            ) {
                Ok((loss, dist)) => {
                    epoch_priv_loss += loss;
                    epoch_dist += dist;
                }
                Err(_) => {
                    diverged_at = Some(t);
                    break 'outer;
                }
            }
            privatizer_updates += 1;
            epoch_adv_loss += adv_loss_acc / config.adversary_steps as f64;
            steps += 1;
            t += 1;
        }
        if steps > 0 {
            let accuracy = trace_accuracy(
                &adversary,
                &privatizer,
                train,
                s_eff,
                derive_seed(config.seed, "trace-eval", epoch as u64),
            )?;
            trace.push(EpochStats {
                epoch,
                adversary_loss: epoch_adv_loss / steps as f64,
                privatizer_loss: epoch_priv_loss / steps as f64,
                mean_distortion: epoch_dist / steps as f64,
                adversary_accuracy: accuracy,
                rho,
            });
        }
    }

    Ok(TrainedPair {
        privatizer,
        adversary,
        trace,
        diverged_at,
        adversary_updates,
        privatizer_updates,
    })
}

/// Argmax-posterior accuracy on the average of the latent draws, plus mean
/// distortion, on a held-out set. Deterministic given `eval_seed`.
pub fn evaluate_adversary(
    privatizer: &Privatizer,
    adversary: &DenseNet,
    data: &Dataset,
    latent_samples: usize,
    p_tilde: f64,
    eval_seed: u64,
) -> Result<(f64, f64), Error> {
    if data.is_empty() {
        return Err(Error::domain("evaluation dataset is empty"));
    }
    let s_eff = if privatizer.is_stochastic() { latent_samples } else { 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed);
    let mut correct = 0usize;
    let mut total_dist = 0.0;
    for idx in 0..data.len() {
        let draws = draw_latents(privatizer, data.row(idx), data.labels()[idx], data.num_classes(), s_eff, &mut rng)?;
        let zbar = mean_latent(&draws);
        let posterior = adversary.forward(&zbar)?;
        correct += usize::from(argmax(&posterior) == data.labels()[idx]);
        total_dist += match privatizer {
            Privatizer::Affine { beta0, beta1 } => distortion_affine(*beta0, *beta1, 0.0, p_tilde, false),
            Privatizer::NoisyAffine { beta0, beta1, gamma } => {
                distortion_affine(*beta0, *beta1, *gamma, p_tilde, true)
            }
            Privatizer::Mlp { recon, .. } => distortion_l2(data.row(idx), &recon.forward(&zbar)?)?,
        };
    }
    Ok((correct as f64 / data.len() as f64, total_dist / data.len() as f64))
}
