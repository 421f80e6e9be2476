//! Decoder-only generation: a latent `(x, y)` plus a threshold becomes a
//! pattern and per-step velocities.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::Decoder;
use crate::pattern::{ManyHotPattern, STEPS};

/// Threshold used when nothing else is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub x: f64,
    pub y: f64,
    pub threshold: f64,
    pub model_id: String,
}

impl GenerationRequest {
    pub fn new(model_id: impl Into<String>, x: f64, y: f64, threshold: f64) -> Self {
        Self { x, y, threshold, model_id: model_id.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    /// Sigmoid outputs of the decoder.
    pub raw: [f64; STEPS],
    /// `raw[i] >= threshold`.
    pub pattern: ManyHotPattern,
    /// `round(raw[i] * 127)`.
    pub velocities: [u8; STEPS],
}

pub fn velocity_of(raw: f64) -> u8 {
    libm::round(raw.clamp(0.0, 1.0) * 127.0) as u8
}

/// Runs the decoder in eval mode on `[x, y]`. Latents outside the training
/// spread, negatives included, are passed through as given.
pub fn generate(decoder: &Decoder, req: &GenerationRequest) -> Result<GenerationResult> {
    if !(0.0..=1.0).contains(&req.threshold) {
        return Err(Error::ThresholdOutOfRange(req.threshold));
    }
    let raw = decoder.decode([req.x, req.y]);
    let pattern = ManyHotPattern::from_threshold(&raw, req.threshold)?;
    Ok(GenerationResult { raw, pattern, velocities: raw.map(velocity_of) })
}

/// A set of named decoders run side by side. Entries are reference counted
/// so a replacement can be inserted while earlier clones finish generating.
#[derive(Debug, Clone, Default)]
pub struct Ensemble {
    models: BTreeMap<String, Arc<Decoder>>,
}

impl Ensemble {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a decoder, returning the previous one.
    pub fn insert(&mut self, model_id: impl Into<String>, decoder: Decoder) -> Option<Arc<Decoder>> {
        self.models.insert(model_id.into(), Arc::new(decoder))
    }

    pub fn remove(&mut self, model_id: &str) -> Option<Arc<Decoder>> {
        self.models.remove(model_id)
    }

    pub fn get(&self, model_id: &str) -> Result<Arc<Decoder>> {
        self.models.get(model_id).cloned().ok_or_else(|| Error::UnknownModel(model_id.into()))
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult> {
        generate(&*self.get(&req.model_id)?, req)
    }

    /// One independent generation per request, keyed by model id.
    pub fn generate_ensemble<'a, I>(&self, requests: I) -> Result<BTreeMap<String, GenerationResult>>
    where
        I: IntoIterator<Item = &'a GenerationRequest>,
    {
        requests.into_iter().map(|req| Ok((req.model_id.clone(), self.generate(req)?))).collect()
    }
}
