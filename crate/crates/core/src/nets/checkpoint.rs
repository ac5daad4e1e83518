//! `posespace-ckpt-v1`: a single JSON document holding the model shape,
//! training metadata and every parameter as flat row-major arrays.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WindowMode;
use crate::gesture::GestureClass;
use crate::scaling::UnitBounds;

use super::layer::{Activation, DenseLayer, Mlp};
use super::model::{Autoencoder, Classifier, JointModel, LATENT_DIM};

pub const CHECKPOINT_FORMAT: &str = "posespace-ckpt-v1";

/// A trained model plus what is needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: JointModel,
    pub lambda: f64,
    pub seed: u64,
    /// Pose-space bounds of the training latents, used to map live latents
    /// onto the unit square.
    pub calibration: Option<UnitBounds>,
    /// Clip ids held out from training; evaluation defaults to these.
    pub held_out_clips: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    name: String,
    #[serde(rename = "in")]
    in_dim: usize,
    #[serde(rename = "out")]
    out_dim: usize,
    activation: String,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Dims {
    encoder: Vec<usize>,
    decoder: Vec<usize>,
    classifier: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classifier_head: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    mode: WindowMode,
    frames: usize,
    lambda: f64,
    seed: u64,
    leaky_alpha: f64,
    dims: Dims,
    activations: Vec<String>,
    #[serde(default)]
    calibration: Option<UnitBounds>,
    #[serde(default)]
    held_out_clips: Vec<String>,
    layers: Vec<LayerRecord>,
}

fn records(prefix: &str, mlp: &Mlp) -> Vec<LayerRecord> {
    mlp.layers
        .iter()
        .enumerate()
        .map(|(i, l)| LayerRecord {
            name: format!("{prefix}.{i}"),
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            activation: l.activation.to_string(),
            weights: l.weights.clone(),
            bias: l.bias.clone(),
        })
        .collect()
}

fn take_mlp(layers: &mut std::vec::IntoIter<LayerRecord>, prefix: &str, dims: &[usize]) -> Result<Mlp> {
    if dims.len() < 2 {
        return Err(Error::Checkpoint(format!("{prefix}: dimension list too short")));
    }
    let mut out = Vec::with_capacity(dims.len() - 1);
    for (i, w) in dims.windows(2).enumerate() {
        let rec = layers.next().ok_or_else(|| Error::Checkpoint(format!("missing layer {prefix}.{i}")))?;
        if rec.in_dim != w[0] || rec.out_dim != w[1] {
            return Err(Error::Checkpoint(format!(
                "layer {} is {}x{}, dimension list says {}x{}",
                rec.name, rec.in_dim, rec.out_dim, w[0], w[1]
            )));
        }
        let layer = DenseLayer {
            in_dim: rec.in_dim,
            out_dim: rec.out_dim,
            weights: rec.weights,
            bias: rec.bias,
            activation: rec.activation.parse::<Activation>()?,
        };
        layer.validate()?;
        out.push(layer);
    }
    Ok(Mlp { layers: out })
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let model = &self.model;
        let ae = &model.autoencoder;
        let mut layers = records("encoder", &ae.encoder);
        layers.extend(records("decoder", &ae.decoder));
        let dims = match &model.classifier {
            Classifier::Concat { mlp } => {
                layers.extend(records("classifier", mlp));
                Dims {
                    encoder: ae.encoder.dims(),
                    decoder: ae.decoder.dims(),
                    classifier: mlp.dims(),
                    classifier_head: None,
                }
            }
            Classifier::PointSet { shared, head } => {
                layers.extend(records("classifier.shared", shared));
                layers.extend(records("classifier.head", head));
                Dims {
                    encoder: ae.encoder.dims(),
                    decoder: ae.decoder.dims(),
                    classifier: shared.dims(),
                    classifier_head: Some(head.dims()),
                }
            }
        };
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            mode: ae.mode,
            frames: ae.frames,
            lambda: self.lambda,
            seed: self.seed,
            leaky_alpha: model.leaky_alpha,
            dims,
            activations: layers.iter().map(|l| l.activation.clone()).collect(),
            calibration: self.calibration,
            held_out_clips: self.held_out_clips.clone(),
            layers,
        };
        serde_json::to_string(&file).expect("checkpoints always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format tag '{}', expected '{CHECKPOINT_FORMAT}'",
                file.format
            )));
        }
        let mut layers = file.layers.into_iter();
        let encoder = take_mlp(&mut layers, "encoder", &file.dims.encoder)?;
        let decoder = take_mlp(&mut layers, "decoder", &file.dims.decoder)?;
        let classifier = match (file.mode, &file.dims.classifier_head) {
            (WindowMode::Concat, None) => {
                Classifier::Concat { mlp: take_mlp(&mut layers, "classifier", &file.dims.classifier)? }
            }
            (WindowMode::PointSet, Some(head)) => Classifier::PointSet {
                shared: take_mlp(&mut layers, "classifier.shared", &file.dims.classifier)?,
                head: take_mlp(&mut layers, "classifier.head", head)?,
            },
            _ => return Err(Error::Checkpoint("classifier layout does not match mode".into())),
        };
        if layers.next().is_some() {
            return Err(Error::Checkpoint("trailing layers after classifier".into()));
        }
        let frames_in = match file.mode {
            WindowMode::Concat => encoder.input_dim(),
            WindowMode::PointSet => encoder.input_dim() * file.frames,
        };
        if encoder.output_dim() != LATENT_DIM
            || decoder.input_dim() != LATENT_DIM
            || decoder.output_dim() != encoder.input_dim()
            || frames_in % file.frames != 0
        {
            return Err(Error::Checkpoint("autoencoder dimensions are inconsistent".into()));
        }
        let clf_out = match &classifier {
            Classifier::Concat { mlp } => mlp.output_dim(),
            Classifier::PointSet { head, .. } => head.output_dim(),
        };
        if clf_out != GestureClass::COUNT {
            return Err(Error::Checkpoint(format!("classifier emits {clf_out} logits, expected 6")));
        }
        Ok(Checkpoint {
            model: JointModel {
                autoencoder: Autoencoder { mode: file.mode, frames: file.frames, encoder, decoder },
                classifier,
                leaky_alpha: file.leaky_alpha,
            },
            lambda: file.lambda,
            seed: file.seed,
            calibration: file.calibration,
            held_out_clips: file.held_out_clips,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
