//! Loop loading: decode, downmix to mono, resample to the analysis rate.

use std::path::{Path, PathBuf};

use latentseq_core::TimeBase;

use crate::error::{Error, Result};
use crate::wav::{self, WavData};

/// Every loop is analysed at this rate.
pub const ANALYSIS_RATE: u32 = 44_100;

/// Relative duration error beyond which a loop is flagged.
pub const DURATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioLoop {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_path: PathBuf,
}

impl AudioLoop {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// True when the loop length is off the expected bar length by more than 2%.
    pub fn duration_mismatch(&self, tb: &TimeBase) -> bool {
        let expected = tb.loop_seconds();
        (self.duration() - expected).abs() > DURATION_TOLERANCE * expected
    }
}

/// Channel mean.
pub fn downmix(wav: &WavData) -> Vec<f32> {
    let n = wav.channels.len() as f32;
    (0..wav.frames()).map(|i| wav.channels.iter().map(|c| c[i]).sum::<f32>() / n).collect()
}

/// Linear-interpolation resampling. Output length is
/// `round(len * to / from)`.
pub fn resample(samples: &[f32], from: u32, to: u32) -> Vec<f32> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = f64::from(from) / f64::from(to);
    let out_len = (samples.len() as f64 * f64::from(to) / f64::from(from)).round() as usize;
    let last = samples.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = (pos.floor() as usize).min(last);
            let frac = (pos - j as f64) as f32;
            let a = samples[j];
            let b = samples[(j + 1).min(last)];
            a + (b - a) * frac
        })
        .collect()
}

pub fn load_loop(path: &Path) -> Result<AudioLoop> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let wav = wav::decode(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    if wav.frames() == 0 {
        return Err(Error::Input(format!("{}: audio is empty", path.display())));
    }
    let mono = downmix(&wav);
    Ok(AudioLoop {
        samples: resample(&mono, wav.sample_rate, ANALYSIS_RATE),
        sample_rate: ANALYSIS_RATE,
        source_path: path.to_path_buf(),
    })
}
