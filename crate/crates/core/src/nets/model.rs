//! The joint model: a fully connected autoencoder whose 2D latent also feeds
//! a small gesture classifier, trained through one shared encoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{WindowMode, POSE_DIM};
use crate::gesture::GestureClass;

use super::layer::{Activation, DenseLayer, LayerGrad, Mlp, MlpTrace, DEFAULT_LEAKY_ALPHA};

pub const LATENT_DIM: usize = 2;
pub const ENCODER_HIDDEN: [usize; 3] = [128, 96, 64];
pub const CLASSIFIER_HIDDEN: [usize; 2] = [64, 64];

/// Layer sizes of a joint model. [`Architecture::standard`] is the
/// production shape; smaller shapes exist for gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub mode: WindowMode,
    pub frames: usize,
    /// Values per frame (63 for real hands).
    pub pose_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    pub leaky_alpha: f64,
}

impl Architecture {
    pub fn standard(mode: WindowMode, frames: usize) -> Self {
        Architecture {
            mode,
            frames,
            pose_dim: POSE_DIM,
            encoder_hidden: ENCODER_HIDDEN.to_vec(),
            classifier_hidden: CLASSIFIER_HIDDEN.to_vec(),
            leaky_alpha: DEFAULT_LEAKY_ALPHA,
        }
    }

    /// Length of a flattened input window.
    pub fn window_dim(&self) -> usize {
        self.pose_dim * self.frames
    }

    /// Input width of the encoder: the whole window in concat mode, one frame
    /// in point-set mode.
    pub fn encoder_input(&self) -> usize {
        match self.mode {
            WindowMode::Concat => self.window_dim(),
            WindowMode::PointSet => self.pose_dim,
        }
    }

    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.encoder_input()];
        dims.extend(&self.encoder_hidden);
        dims.push(LATENT_DIM);
        dims
    }

    pub fn decoder_dims(&self) -> Vec<usize> {
        let mut dims = self.encoder_dims();
        dims.reverse();
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub mode: WindowMode,
    pub frames: usize,
    pub encoder: Mlp,
    pub decoder: Mlp,
}

/// Latent code of one window: a single point in concat mode, one point per
/// frame (oldest first) in point-set mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub points: Vec<[f64; LATENT_DIM]>,
}

impl Latent {
    /// The point shown as the live cursor: the window's latent, or the newest
    /// frame's latent in point-set mode.
    pub fn display_point(&self) -> [f64; LATENT_DIM] {
        *self.points.last().expect("latent has at least one point")
    }
}

fn to_point(v: &[f64]) -> [f64; LATENT_DIM] {
    [v[0], v[1]]
}

impl Autoencoder {
    pub fn window_dim(&self) -> usize {
        match self.mode {
            WindowMode::Concat => self.encoder.input_dim(),
            WindowMode::PointSet => self.encoder.input_dim() * self.frames,
        }
    }

    fn check_window(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.window_dim() {
            return Err(Error::ShapeMismatch(format!(
                "window has {} values, model expects {}",
                input.len(),
                self.window_dim()
            )));
        }
        Ok(())
    }

    fn frame_inputs<'a>(&self, input: &'a [f64]) -> std::slice::ChunksExact<'a, f64> {
        input.chunks_exact(self.encoder.input_dim())
    }

    pub fn encode(&self, input: &[f64]) -> Result<Latent> {
        self.check_window(input)?;
        let points = self.frame_inputs(input).map(|chunk| to_point(&self.encoder.forward(chunk))).collect();
        Ok(Latent { points })
    }

    /// Decoder output for a single latent point: `63 * N` values in concat
    /// mode, one frame in point-set mode.
    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>> {
        if latent.len() != LATENT_DIM {
            return Err(Error::ShapeMismatch(format!("latent has {} components, expected {LATENT_DIM}", latent.len())));
        }
        Ok(self.decoder.forward(latent))
    }

    /// Reconstruct a full window from its latent.
    pub fn reconstruct(&self, latent: &Latent) -> Result<Vec<f64>> {
        let expected = match self.mode {
            WindowMode::Concat => 1,
            WindowMode::PointSet => self.frames,
        };
        if latent.points.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "latent has {} points, expected {expected}",
                latent.points.len()
            )));
        }
        let mut out = Vec::with_capacity(self.window_dim());
        for p in &latent.points {
            out.extend(self.decoder.forward(p));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    /// MLP head on the single window latent.
    Concat { mlp: Mlp },
    /// Shared per-point layers, coordinate-wise max pooling, then a head.
    PointSet { shared: Mlp, head: Mlp },
}

impl Classifier {
    pub fn classify(&self, latent: &Latent) -> Result<[f64; GestureClass::COUNT]> {
        let logits = match self {
            Classifier::Concat { mlp } => {
                if latent.points.len() != 1 {
                    return Err(Error::ShapeMismatch(format!(
                        "concat classifier takes 1 latent point, got {}",
                        latent.points.len()
                    )));
                }
                mlp.forward(&latent.points[0])
            }
            Classifier::PointSet { shared, head } => {
                if latent.points.is_empty() {
                    return Err(Error::ShapeMismatch("point-set classifier got no points".into()));
                }
                let mut pooled = vec![f64::NEG_INFINITY; shared.output_dim()];
                for p in &latent.points {
                    for (m, h) in pooled.iter_mut().zip(shared.forward(p)) {
                        if h > *m {
                            *m = h;
                        }
                    }
                }
                head.forward(&pooled)
            }
        };
        let mut out = [0.0; GestureClass::COUNT];
        out.copy_from_slice(&logits);
        Ok(out)
    }

    fn layers(&self) -> Vec<&DenseLayer> {
        match self {
            Classifier::Concat { mlp } => mlp.layers.iter().collect(),
            Classifier::PointSet { shared, head } => shared.layers.iter().chain(&head.layers).collect(),
        }
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        match self {
            Classifier::Concat { mlp } => mlp.layers.iter_mut().collect(),
            Classifier::PointSet { shared, head } => shared.layers.iter_mut().chain(head.layers.iter_mut()).collect(),
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Autoencoder and classifier sharing one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub autoencoder: Autoencoder,
    pub classifier: Classifier,
    pub leaky_alpha: f64,
}

/// Gradients for every [`JointModel`] parameter, in
/// [`JointModel::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<LayerGrad>,
    pub decoder: Vec<LayerGrad>,
    pub classifier: Vec<LayerGrad>,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .chain(&self.classifier)
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
            .collect()
    }

    pub fn classifier_is_zero(&self) -> bool {
        self.classifier.iter().all(|g| g.weights.iter().chain(&g.bias).all(|v| *v == 0.0))
    }
}

/// Result of [`JointModel::joint_loss`].
#[derive(Debug, Clone)]
pub struct LossReport {
    pub loss: f64,
    pub reconstruction: f64,
    pub cross_entropy: f64,
    pub gradients: Gradients,
}

/// One training example: a flattened window and its label.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub window: &'a [f64],
    pub label: GestureClass,
}

impl JointModel {
    /// Seeded He-uniform initialization.
    pub fn new(arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(arch, |i, o, a, r: &mut ChaCha8Rng| DenseLayer::he_uniform(i, o, a, r), &mut rng)
    }

    /// All parameters zero.
    pub fn zeros(arch: &Architecture) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Self::build(arch, |i, o, a, _: &mut ChaCha8Rng| DenseLayer::zeros(i, o, a), &mut rng)
    }

    fn build(
        arch: &Architecture,
        mut init: impl FnMut(usize, usize, Activation, &mut ChaCha8Rng) -> DenseLayer,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let hidden = Activation::LeakyRelu(arch.leaky_alpha);
        let id = Activation::Identity;
        let encoder = Mlp::build(&arch.encoder_dims(), hidden, id, &mut init, rng);
        let decoder = Mlp::build(&arch.decoder_dims(), hidden, id, &mut init, rng);

        let mut clf_dims = vec![LATENT_DIM];
        clf_dims.extend(&arch.classifier_hidden);
        let classifier = match arch.mode {
            WindowMode::Concat => {
                clf_dims.push(GestureClass::COUNT);
                Classifier::Concat { mlp: Mlp::build(&clf_dims, hidden, id, &mut init, rng) }
            }
            WindowMode::PointSet => {
                let width = *clf_dims.last().unwrap();
                let shared = Mlp::build(&clf_dims, hidden, hidden, &mut init, rng);
                let head = Mlp::build(&[width, GestureClass::COUNT], id, id, &mut init, rng);
                Classifier::PointSet { shared, head }
            }
        };
        JointModel {
            autoencoder: Autoencoder { mode: arch.mode, frames: arch.frames, encoder, decoder },
            classifier,
            leaky_alpha: arch.leaky_alpha,
        }
    }

    pub fn mode(&self) -> WindowMode {
        self.autoencoder.mode
    }

    pub fn frames(&self) -> usize {
        self.autoencoder.frames
    }

    pub fn window_dim(&self) -> usize {
        self.autoencoder.window_dim()
    }

    pub fn encode(&self, window: &[f64]) -> Result<Latent> {
        self.autoencoder.encode(window)
    }

    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.autoencoder.decode(latent)
    }

    pub fn classify(&self, latent: &Latent) -> Result<[f64; GestureClass::COUNT]> {
        self.classifier.classify(latent)
    }

    /// Encode, then classify; returns the latent and class probabilities.
    pub fn infer(&self, window: &[f64]) -> Result<(Latent, [f64; GestureClass::COUNT])> {
        let latent = self.encode(window)?;
        let probs = softmax(&self.classify(&latent)?);
        let mut out = [0.0; GestureClass::COUNT];
        out.copy_from_slice(&probs);
        Ok((latent, out))
    }

    /// Layers in parameter order: encoder, decoder, classifier.
    pub fn layers(&self) -> Vec<&DenseLayer> {
        self.autoencoder
            .encoder
            .layers
            .iter()
            .chain(&self.autoencoder.decoder.layers)
            .chain(self.classifier.layers())
            .collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out: Vec<&mut DenseLayer> = Vec::new();
        out.extend(self.autoencoder.encoder.layers.iter_mut());
        out.extend(self.autoencoder.decoder.layers.iter_mut());
        out.extend(self.classifier.layers_mut());
        out
    }

    /// Parameter tensors (weights then bias, per layer) in fixed order.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.layers().into_iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut().into_iter().flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()]).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        let classifier = self.classifier.layers().into_iter().map(LayerGrad::zeros_like).collect();
        Gradients {
            encoder: self.autoencoder.encoder.zero_grads(),
            decoder: self.autoencoder.decoder.zero_grads(),
            classifier,
        }
    }

    /// Mean squared reconstruction error plus `lambda` times the mean
    /// cross-entropy of the classifier on the latents, with gradients for
    /// every parameter taken through both heads into the shared encoder.
    pub fn joint_loss(&self, batch: &[Sample<'_>], lambda: f64) -> Result<LossReport> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("loss weight {lambda} must be non-negative")));
        }
        let mut grads = self.zero_gradients();
        let batch_len = batch.len() as f64;
        let elems = self.window_dim() as f64;
        let mut recon_total = 0.0;
        let mut ce_total = 0.0;

        for sample in batch {
            self.autoencoder.check_window(sample.window)?;
            let frames: Vec<&[f64]> = self.autoencoder.frame_inputs(sample.window).collect();
            let enc_traces: Vec<MlpTrace> = frames.iter().map(|x| self.autoencoder.encoder.forward_trace(x)).collect();
            let latents: Vec<&[f64]> = enc_traces.iter().map(|t| t.output()).collect();

            // Reconstruction branch.
            let mut grad_latent: Vec<Vec<f64>> = Vec::with_capacity(frames.len());
            for (x, z) in frames.iter().zip(&latents) {
                let dec = self.autoencoder.decoder.forward_trace(z);
                let scale = 2.0 / (elems * batch_len);
                let mut grad_out = Vec::with_capacity(x.len());
                for (r, xi) in dec.output().iter().zip(x.iter()) {
                    let diff = r - xi;
                    recon_total += diff * diff;
                    grad_out.push(scale * diff);
                }
                grad_latent.push(self.autoencoder.decoder.backward(&dec, &grad_out, &mut grads.decoder));
            }

            // Classification branch.
            let ce_scale = lambda / batch_len;
            let label = sample.label.index();
            match &self.classifier {
                Classifier::Concat { mlp } => {
                    let trace = mlp.forward_trace(latents[0]);
                    let logp = log_softmax(trace.output());
                    ce_total -= logp[label];
                    let grad_logits: Vec<f64> = logp
                        .iter()
                        .enumerate()
                        .map(|(c, lp)| ce_scale * (lp.exp() - if c == label { 1.0 } else { 0.0 }))
                        .collect();
                    let dz = mlp.backward(&trace, &grad_logits, &mut grads.classifier);
                    for (g, d) in grad_latent[0].iter_mut().zip(dz) {
                        *g += d;
                    }
                }
                Classifier::PointSet { shared, head } => {
                    let traces: Vec<MlpTrace> = latents.iter().map(|z| shared.forward_trace(z)).collect();
                    let width = shared.output_dim();
                    let mut pooled = vec![f64::NEG_INFINITY; width];
                    let mut winner = vec![0usize; width];
                    for (p, t) in traces.iter().enumerate() {
                        for (c, h) in t.output().iter().enumerate() {
                            if *h > pooled[c] {
                                pooled[c] = *h;
                                winner[c] = p;
                            }
                        }
                    }
                    let head_trace = head.forward_trace(&pooled);
                    let logp = log_softmax(head_trace.output());
                    ce_total -= logp[label];
                    let grad_logits: Vec<f64> = logp
                        .iter()
                        .enumerate()
                        .map(|(c, lp)| ce_scale * (lp.exp() - if c == label { 1.0 } else { 0.0 }))
                        .collect();
                    let (shared_grads, head_grads) = grads.classifier.split_at_mut(shared.layers.len());
                    let grad_pooled = head.backward(&head_trace, &grad_logits, head_grads);
                    for (p, t) in traces.iter().enumerate() {
                        let grad_h: Vec<f64> =
                            (0..width).map(|c| if winner[c] == p { grad_pooled[c] } else { 0.0 }).collect();
                        let dz = shared.backward(t, &grad_h, shared_grads);
                        for (g, d) in grad_latent[p].iter_mut().zip(dz) {
                            *g += d;
                        }
                    }
                }
            }

            for (trace, gz) in enc_traces.iter().zip(&grad_latent) {
                self.autoencoder.encoder.backward(trace, gz, &mut grads.encoder);
            }
        }

        let reconstruction = recon_total / (elems * batch_len);
        let cross_entropy = ce_total / batch_len;
        Ok(LossReport {
            loss: reconstruction + lambda * cross_entropy,
            reconstruction,
            cross_entropy,
            gradients: grads,
        })
    }
}
