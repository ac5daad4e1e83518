//! Dense network substrate sized for the pose autoencoder and its
//! gesture classifier: layers, forward/backward passes, the joint loss and
//! Adam with decoupled weight decay.

mod adam;
mod checkpoint;
mod layer;
mod model;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use layer::{Activation, DenseLayer, LayerGrad, Mlp, MlpTrace, DEFAULT_LEAKY_ALPHA};
pub use model::{
    softmax, Architecture, Autoencoder, Classifier, Gradients, JointModel, Latent, LossReport, Sample,
    CLASSIFIER_HIDDEN, ENCODER_HIDDEN, LATENT_DIM,
};
