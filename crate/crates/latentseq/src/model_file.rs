//! Versioned JSON model files.
//!
//! ```json
//! {"format_version": 1, "architecture_id": "model1", "dims": [32, 20, ...],
//!  "l2_lambda": 0.0, "dropout_rate": 0.0, "seed": 7,
//!  "training_meta": {"epochs": 500, ...},
//!  "layers": [{"activation": "relu", "weights": [[...], ...], "biases": [...]}]}
//! ```
//!
//! Weights are row-major (`out` rows of `in` values). Floats are written in
//! shortest round-trip form so a load/save cycle is byte-identical.

use std::path::Path;

use latentseq_core::nn::{Activation, Architecture, Autoencoder, Dense, TrainingMeta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    architecture_id: String,
    dims: Vec<usize>,
    l2_lambda: f64,
    dropout_rate: f64,
    seed: u64,
    training_meta: MetaFile,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    final_loss: Option<f64>,
    dataset_fingerprint: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    activation: String,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

pub fn to_json(model: &Autoencoder) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        architecture_id: model.architecture().name().into(),
        dims: model.dims(),
        l2_lambda: model.l2_lambda(),
        dropout_rate: model.dropout_rate(),
        seed: model.seed(),
        training_meta: MetaFile {
            epochs: model.meta.epochs,
            batch_size: model.meta.batch_size,
            learning_rate: model.meta.learning_rate,
            final_loss: model.meta.final_loss,
            dataset_fingerprint: model.meta.dataset_fingerprint.clone(),
        },
        layers: model
            .layers()
            .iter()
            .map(|l| LayerFile {
                activation: l.activation().name().into(),
                weights: l.weights().chunks(l.in_dim()).map(<[f64]>::to_vec).collect(),
                biases: l.biases().to_vec(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> std::result::Result<Autoencoder, String> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if file.format_version != FORMAT_VERSION {
        return Err(format!("unsupported format_version {} (expected {FORMAT_VERSION})", file.format_version));
    }
    let arch = Architecture::from_name(&file.architecture_id)
        .ok_or_else(|| format!("unknown architecture `{}`", file.architecture_id))?;
    if file.dims != arch.dims() {
        return Err(format!("dims {:?} do not match {arch}", file.dims));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, l) in file.layers.into_iter().enumerate() {
        let act = Activation::from_name(&l.activation).ok_or_else(|| format!("layer {i}: unknown activation"))?;
        let out_dim = l.weights.len();
        let in_dim = l.weights.first().map_or(0, Vec::len);
        if l.weights.iter().any(|row| row.len() != in_dim) {
            return Err(format!("layer {i}: ragged weight rows"));
        }
        let weights = l.weights.into_iter().flatten().collect();
        layers.push(Dense::new(in_dim, out_dim, act, weights, l.biases).map_err(|e| format!("layer {i}: {e}"))?);
    }
    let meta = TrainingMeta {
        epochs: file.training_meta.epochs,
        batch_size: file.training_meta.batch_size,
        learning_rate: file.training_meta.learning_rate,
        final_loss: file.training_meta.final_loss,
        dataset_fingerprint: file.training_meta.dataset_fingerprint,
    };
    Autoencoder::from_parts(arch, layers, file.l2_lambda, file.dropout_rate, file.seed, meta).map_err(|e| e.to_string())
}

pub fn save_model(model: &Autoencoder, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Autoencoder> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text).map_err(|m| Error::format(path, m))
}
