use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::grad::{backward, l2_penalty, Gradients};
use super::loss::bce_loss;
use super::model::Autoencoder;
use crate::error::{Error, Result};
use crate::pattern::ManyHotPattern;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Drives shuffling and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 500, batch_size: 16, learning_rate: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-pattern BCE over the epoch's training passes.
    pub mean_bce: f64,
    /// `mean_bce` plus the L2 term at the end of the epoch.
    pub total_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().map(|e| e.mean_bce)
    }
}

/// FNV-1a over the pattern bits, in dataset order.
pub fn dataset_fingerprint(patterns: &[ManyHotPattern]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in patterns {
        for b in p.bits() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Mini-batch Adam on the autoencoder objective (input = target), with a
/// seeded reshuffle every epoch. Deterministic for a given model, dataset
/// and config.
pub fn train(model: &mut Autoencoder, patterns: &[ManyHotPattern], cfg: &TrainConfig) -> Result<TrainReport> {
    if patterns.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(Error::OutOfRange { what: "batch_size", value: 0 });
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Error::NotPositive("learning_rate"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.learning_rate);
    let inputs: Vec<[f64; 32]> = patterns.iter().map(ManyHotPattern::to_f64).collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let l2 = model.l2_lambda();
    let mut report = TrainReport { history: Vec::with_capacity(cfg.epochs) };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = Gradients::zeros_like(model.network());
            for &i in batch {
                let x = &inputs[i];
                let out = model.forward_train(x, &mut rng)?;
                loss_sum += bce_loss(out.output(), x)?;
                acc.accumulate(&backward(model.network(), &out.pass, x, l2)?);
            }
            acc.scale(1.0 / batch.len() as f64);
            adam.step(model.network_mut(), &acc);
        }
        let mean_bce = loss_sum / inputs.len() as f64;
        let total_objective = mean_bce + l2 * l2_penalty(model.network());
        report.history.push(EpochLoss { epoch, mean_bce, total_objective });
    }

    model.meta.epochs = cfg.epochs;
    model.meta.batch_size = cfg.batch_size;
    model.meta.learning_rate = cfg.learning_rate;
    model.meta.final_loss = report.final_loss();
    model.meta.dataset_fingerprint = Some(format!("{:016x}", dataset_fingerprint(patterns)));
    Ok(report)
}
