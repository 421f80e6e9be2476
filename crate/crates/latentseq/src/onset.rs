//! Spectral-flux onset detection.
//!
//! Frames are centred (the signal is zero-padded by half a window on both
//! sides), so frame `i` is centred on sample `i * hop`. The onset strength
//! of a frame is the sum over bins of the positive magnitude increase from
//! the previous frame. A frame is reported when it is the maximum within
//! ±3 frames and exceeds the ±10-frame local mean by 0.3 global standard
//! deviations; onsets closer than 30 ms to the previous one are dropped.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioLoop;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnsetParams {
    pub window: usize,
    pub hop: usize,
    pub max_radius: usize,
    pub mean_radius: usize,
    pub std_weight: f64,
    pub min_gap_sec: f64,
}

impl Default for OnsetParams {
    fn default() -> Self {
        Self { window: 2048, hop: 512, max_radius: 3, mean_radius: 10, std_weight: 0.3, min_gap_sec: 0.030 }
    }
}

/// Ascending onset times in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OnsetList {
    pub times_sec: Vec<f64>,
}

pub struct OnsetDetector {
    params: OnsetParams,
    fft: Arc<dyn Fft<f32>>,
    window: Vec<f32>,
}

impl Default for OnsetDetector {
    fn default() -> Self {
        Self::new(OnsetParams::default())
    }
}

impl OnsetDetector {
    pub fn new(params: OnsetParams) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(params.window);
        let n = params.window as f32;
        // periodic Hann
        let window = (0..params.window).map(|i| 0.5 - 0.5 * (std::f32::consts::TAU * i as f32 / n).cos()).collect();
        Self { params, fft, window }
    }

    pub fn params(&self) -> &OnsetParams {
        &self.params
    }

    /// Onset strength per frame.
    pub fn envelope(&self, samples: &[f32]) -> Vec<f64> {
        let OnsetParams { window: n, hop, .. } = self.params;
        if samples.is_empty() {
            return Vec::new();
        }
        let half = n / 2;
        let frames = samples.len() / hop + 1;
        let bins = n / 2 + 1;
        let mut prev = vec![0.0f32; bins];
        let mut mag = vec![0.0f32; bins];
        let mut buf = vec![Complex::new(0.0f32, 0.0); n];
        let mut scratch = vec![Complex::new(0.0f32, 0.0); self.fft.get_inplace_scratch_len()];
        let mut env = Vec::with_capacity(frames);
        for f in 0..frames {
            let centre = f * hop;
            for (k, slot) in buf.iter_mut().enumerate() {
                let idx = (centre + k).checked_sub(half);
                let s = idx.and_then(|i| samples.get(i)).copied().unwrap_or(0.0);
                *slot = Complex::new(s * self.window[k], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (m, c) in mag.iter_mut().zip(&buf[..bins]) {
                *m = c.norm();
            }
            let flux: f64 = mag.iter().zip(&prev).map(|(m, p)| f64::from((m - p).max(0.0))).sum();
            env.push(flux);
            std::mem::swap(&mut prev, &mut mag);
        }
        env
    }

    /// Frame indices passing the peak-picking rule.
    pub fn pick_peaks(&self, env: &[f64], sample_rate: u32) -> Vec<usize> {
        let p = &self.params;
        if env.is_empty() {
            return Vec::new();
        }
        let mean = env.iter().sum::<f64>() / env.len() as f64;
        let std = (env.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / env.len() as f64).sqrt();
        let frame_sec = p.hop as f64 / f64::from(sample_rate);
        let mut peaks: Vec<usize> = Vec::new();
        for i in 0..env.len() {
            let v = env[i];
            if v <= 0.0 {
                continue;
            }
            let lo = i.saturating_sub(p.max_radius);
            let hi = (i + p.max_radius).min(env.len() - 1);
            // strict on the left so a flat top is reported once
            if env[lo..i].iter().any(|&u| u >= v) || env[i + 1..=hi].iter().any(|&u| u > v) {
                continue;
            }
            let lo = i.saturating_sub(p.mean_radius);
            let hi = (i + p.mean_radius).min(env.len() - 1);
            let local = env[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            if v <= local + p.std_weight * std {
                continue;
            }
            if let Some(&last) = peaks.last() {
                if (i - last) as f64 * frame_sec < p.min_gap_sec {
                    continue;
                }
            }
            peaks.push(i);
        }
        peaks
    }

    pub fn detect(&self, audio: &AudioLoop) -> OnsetList {
        let env = self.envelope(&audio.samples);
        let frame_sec = self.params.hop as f64 / f64::from(audio.sample_rate);
        let duration = audio.duration();
        OnsetList {
            times_sec: self
                .pick_peaks(&env, audio.sample_rate)
                .into_iter()
                .map(|f| f as f64 * frame_sec)
                .filter(|&t| t <= duration)
                .collect(),
        }
    }
}

/// [`OnsetDetector::detect`] with the default parameters.
pub fn detect_onsets(audio: &AudioLoop) -> OnsetList {
    OnsetDetector::default().detect(audio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clicks(times: &[f64], len_sec: f64) -> AudioLoop {
        let mut samples = vec![0.0f32; (len_sec * 44_100.0).round() as usize];
        for &t in times {
            samples[(t * 44_100.0).round() as usize] = 1.0;
        }
        AudioLoop { samples, sample_rate: 44_100, source_path: "synthetic".into() }
    }

    #[test]
    fn silence_has_no_onsets() {
        assert!(detect_onsets(&clicks(&[], 4.0)).times_sec.is_empty());
    }

    #[test]
    fn half_second_clicks_within_a_hop() {
        let truth: Vec<f64> = (0..8).map(|k| k as f64 * 0.5).collect();
        let found = detect_onsets(&clicks(&truth, 4.0)).times_sec;
        assert_eq!(found.len(), 8, "{found:?}");
        for (f, t) in found.iter().zip(&truth) {
            assert!((f - t).abs() <= 0.012, "{f} vs {t}");
        }
    }

    #[test]
    fn single_click() {
        let found = detect_onsets(&clicks(&[2.0], 4.0)).times_sec;
        assert_eq!(found.len(), 1);
        assert!((found[0] - 2.0).abs() <= 0.012);
    }

    #[test]
    fn shift_by_whole_hops_shifts_onsets() {
        let base = [0.5, 1.25, 2.0, 3.0];
        let a = detect_onsets(&clicks(&base, 4.0)).times_sec;
        let hop = 512.0 / 44_100.0;
        for k in [1usize, 3, 7] {
            let mut shifted = clicks(&[], 4.0);
            for &t in &base {
                shifted.samples[(t * 44_100.0).round() as usize + k * 512] = 1.0;
            }
            let b = detect_onsets(&shifted).times_sec;
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((y - x - k as f64 * hop).abs() < 1e-9, "k={k}: {x} -> {y}");
            }
        }
    }
}
