use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{Activation, Dense, ForwardPass, Network};
use crate::error::{Error, Result};
use crate::pattern::STEPS;

/// Width of the latent code every architecture bottlenecks through.
pub const LATENT_DIM: usize = 2;

/// The four autoencoder layouts that can be trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    /// One 16-unit layer each side of the latent pair.
    Prototype,
    /// 20 and 8 unit layers each side.
    Model1,
    /// Model1 with L2 0.01 and dropout 0.2.
    Model2,
    /// 20, 10 and 5 unit layers each side.
    Model3,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [Self::Prototype, Self::Model1, Self::Model2, Self::Model3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Prototype => "prototype",
            Self::Model1 => "model1",
            Self::Model2 => "model2",
            Self::Model3 => "model3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Layer widths from input to output.
    pub fn dims(self) -> &'static [usize] {
        match self {
            Self::Prototype => &[32, 16, 2, 16, 32],
            Self::Model1 | Self::Model2 => &[32, 20, 8, 2, 8, 20, 32],
            Self::Model3 => &[32, 20, 10, 5, 2, 5, 10, 20, 32],
        }
    }

    pub fn l2_lambda(self) -> f64 {
        match self {
            Self::Model2 => 0.01,
            _ => 0.0,
        }
    }

    pub fn dropout_rate(self) -> f64 {
        match self {
            Self::Model2 => 0.2,
            _ => 0.0,
        }
    }

    /// Index of the layer whose output is the latent code.
    pub fn latent_index(self) -> usize {
        self.dims().len() / 2 - 1
    }
}

impl core::fmt::Display for Architecture {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Bookkeeping written alongside trained weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_loss: Option<f64>,
    pub dataset_fingerprint: Option<String>,
}

/// A mirrored dense autoencoder with a 2-unit ReLU bottleneck and a sigmoid
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    architecture: Architecture,
    net: Network,
    latent_index: usize,
    l2_lambda: f64,
    dropout_rate: f64,
    seed: u64,
    pub meta: TrainingMeta,
}

/// Everything a forward pass through the full model produces.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderOutput {
    pub pass: ForwardPass,
    latent_index: usize,
}

impl AutoencoderOutput {
    pub fn output(&self) -> &[f64] {
        self.pass.output()
    }

    pub fn latent(&self) -> &[f64] {
        self.pass.layer_output(self.latent_index)
    }
}

fn layer_activations(dims: &[usize]) -> impl Iterator<Item = (usize, usize, Activation)> + '_ {
    let last = dims.len() - 2;
    dims.windows(2)
        .enumerate()
        .map(move |(i, w)| (w[0], w[1], if i == last { Activation::Sigmoid } else { Activation::Relu }))
}

impl Autoencoder {
    /// Glorot-initialized model, deterministic in `seed`.
    pub fn init(architecture: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_activations(architecture.dims())
            .map(|(i, o, act)| Dense::glorot(i, o, act, &mut rng))
            .collect();
        Self::assemble(architecture, layers, seed)
    }

    /// All weights and biases zero.
    pub fn zeros(architecture: Architecture) -> Self {
        let layers = layer_activations(architecture.dims()).map(|(i, o, act)| Dense::zeros(i, o, act)).collect();
        Self::assemble(architecture, layers, 0)
    }

    fn assemble(architecture: Architecture, layers: Vec<Dense>, seed: u64) -> Self {
        Self {
            architecture,
            net: Network::new(layers).expect("architecture dims chain"),
            latent_index: architecture.latent_index(),
            l2_lambda: architecture.l2_lambda(),
            dropout_rate: architecture.dropout_rate(),
            seed,
            meta: TrainingMeta::default(),
        }
    }

    /// Rebuilds a model from stored parts, checking every structural
    /// invariant against the named architecture.
    pub fn from_parts(
        architecture: Architecture,
        layers: Vec<Dense>,
        l2_lambda: f64,
        dropout_rate: f64,
        seed: u64,
        meta: TrainingMeta,
    ) -> Result<Self> {
        let net = Network::new(layers)?;
        let dims: Vec<usize> =
            core::iter::once(net.in_dim()).chain(net.layers().iter().map(Dense::out_dim)).collect();
        if dims != architecture.dims() {
            return Err(Error::InvalidModel(alloc::format!(
                "layer dims {dims:?} do not match {} {:?}",
                architecture,
                architecture.dims()
            )));
        }
        let last = net.layers().len() - 1;
        for (i, l) in net.layers().iter().enumerate() {
            let want = if i == last { Activation::Sigmoid } else { Activation::Relu };
            if l.activation() != want {
                return Err(Error::InvalidModel(alloc::format!("layer {i} must use {}", want.name())));
            }
        }
        if !(l2_lambda.is_finite() && l2_lambda >= 0.0) {
            return Err(Error::InvalidModel("l2_lambda must be >= 0".to_string()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidModel("dropout_rate must be in [0, 1)".to_string()));
        }
        Ok(Self { architecture, net, latent_index: architecture.latent_index(), l2_lambda, dropout_rate, seed, meta })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn layers(&self) -> &[Dense] {
        self.net.layers()
    }

    pub fn latent_index(&self) -> usize {
        self.latent_index
    }

    pub fn l2_lambda(&self) -> f64 {
        self.l2_lambda
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn dims(&self) -> Vec<usize> {
        core::iter::once(self.net.in_dim()).chain(self.layers().iter().map(Dense::out_dim)).collect()
    }

    /// Eval-mode forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<AutoencoderOutput> {
        Ok(AutoencoderOutput { pass: self.net.forward(input)?, latent_index: self.latent_index })
    }

    /// Training-mode forward pass, applying this model's dropout rate.
    pub fn forward_train<R: rand::Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> Result<AutoencoderOutput> {
        Ok(AutoencoderOutput {
            pass: self.net.forward_train(input, self.dropout_rate, rng)?,
            latent_index: self.latent_index,
        })
    }

    /// Separates the encoder (through the latent layer) from the decoder.
    pub fn split(&self) -> (Encoder, Decoder) {
        let layers = self.net.layers();
        let enc = Network::new(layers[..=self.latent_index].to_vec()).expect("prefix chains");
        let dec = Network::new(layers[self.latent_index + 1..].to_vec()).expect("suffix chains");
        (Encoder(enc), Decoder(dec))
    }
}

/// The 32 → 2 half of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder(Network);

/// The 2 → 32 half of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder(Network);

impl Encoder {
    pub fn new(net: Network) -> Result<Self> {
        if net.in_dim() != STEPS || net.out_dim() != LATENT_DIM {
            return Err(Error::InvalidModel("encoder must map 32 -> 2".to_string()));
        }
        Ok(Self(net))
    }

    pub fn network(&self) -> &Network {
        &self.0
    }

    pub fn encode(&self, input: &[f64]) -> Result<[f64; LATENT_DIM]> {
        let v = self.0.predict(input)?;
        Ok([v[0], v[1]])
    }
}

impl Decoder {
    pub fn new(net: Network) -> Result<Self> {
        if net.in_dim() != LATENT_DIM || net.out_dim() != STEPS {
            return Err(Error::InvalidModel("decoder must map 2 -> 32".to_string()));
        }
        Ok(Self(net))
    }

    pub fn network(&self) -> &Network {
        &self.0
    }

    pub fn decode(&self, latent: [f64; LATENT_DIM]) -> [f64; STEPS] {
        let v = self.0.predict(&latent).expect("decoder input is 2-d");
        let mut out = [0.0; STEPS];
        out.copy_from_slice(&v);
        out
    }
}
