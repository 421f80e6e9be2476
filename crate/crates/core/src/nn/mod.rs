//! A small dense autoencoder trained from scratch: forward and backward
//! passes, binary cross-entropy, L2, inverted dropout and Adam.

mod adam;
mod grad;
mod layer;
mod loss;
mod model;
mod train;

pub use adam::Adam;
pub use grad::{backward, l2_penalty, Gradients, LayerGradient};
pub use layer::{sigmoid, Activation, Dense, ForwardPass, Network};
pub use loss::{bce_loss, EPSILON};
pub use model::{Architecture, Autoencoder, AutoencoderOutput, Decoder, Encoder, TrainingMeta, LATENT_DIM};
pub use train::{dataset_fingerprint, train, EpochLoss, TrainConfig, TrainReport};
