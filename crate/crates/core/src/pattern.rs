//! Binary rhythm patterns and the seconds / ticks / sixteenth-step time bases.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Number of sixteenth-note steps in a pattern (two bars of 4/4).
pub const STEPS: usize = 32;

/// Beats per bar. Only 4/4 is supported.
pub const BEATS_PER_BAR: u32 = 4;

/// A 32-slot many-hot rhythm vector: one binary slot per sixteenth note.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ManyHotPattern([bool; STEPS]);

impl ManyHotPattern {
    pub const fn empty() -> Self {
        Self([false; STEPS])
    }

    pub const fn from_bools(slots: [bool; STEPS]) -> Self {
        Self(slots)
    }

    /// Builds a pattern from 0/1 values. Any other value is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() != STEPS {
            return Err(Error::DimensionMismatch { expected: STEPS, got: bits.len() });
        }
        let mut slots = [false; STEPS];
        for (i, &b) in bits.iter().enumerate() {
            slots[i] = match b {
                0 => false,
                1 => true,
                other => return Err(Error::OutOfRange { what: "pattern slot", value: other as i64 }),
            };
        }
        Ok(Self(slots))
    }

    /// Pattern with the given step indices set.
    pub fn from_steps<I: IntoIterator<Item = usize>>(steps: I) -> Result<Self> {
        let mut p = Self::empty();
        for s in steps {
            if s >= STEPS {
                return Err(Error::OutOfRange { what: "step", value: s as i64 });
            }
            p.0[s] = true;
        }
        Ok(p)
    }

    /// Sets every slot whose value is at or above `threshold`.
    pub fn from_threshold(values: &[f64], threshold: f64) -> Result<Self> {
        if values.len() != STEPS {
            return Err(Error::DimensionMismatch { expected: STEPS, got: values.len() });
        }
        let mut slots = [false; STEPS];
        for (slot, &v) in slots.iter_mut().zip(values) {
            *slot = v >= threshold;
        }
        Ok(Self(slots))
    }

    #[inline]
    pub fn get(&self, step: usize) -> bool {
        self.0[step]
    }

    #[inline]
    pub fn set(&mut self, step: usize, on: bool) {
        self.0[step] = on;
    }

    pub fn slots(&self) -> &[bool; STEPS] {
        &self.0
    }

    pub fn bits(&self) -> [u8; STEPS] {
        self.0.map(u8::from)
    }

    /// The pattern as network input: 0.0 / 1.0 per slot.
    pub fn to_f64(&self) -> [f64; STEPS] {
        self.0.map(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn active_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &on)| on).map(|(i, _)| i)
    }

    pub fn count_active(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Debug for ManyHotPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ManyHotPattern(")?;
        for &b in &self.0 {
            f.write_str(if b { "x" } else { "." })?;
        }
        f.write_str(")")
    }
}

/// Tempo and MIDI resolution for a pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBase {
    bpm: f64,
    ppq: u32,
    bars: u32,
}

impl Default for TimeBase {
    fn default() -> Self {
        Self { bpm: 120.0, ppq: 480, bars: 2 }
    }
}

impl TimeBase {
    pub fn new(bpm: f64, ppq: u32, bars: u32) -> Result<Self> {
        if !(bpm.is_finite() && bpm > 0.0) {
            return Err(Error::NotPositive("bpm"));
        }
        if ppq == 0 || !ppq.is_multiple_of(4) {
            return Err(Error::InvalidTimeBase("ppq must be a positive multiple of 4"));
        }
        if bars == 0 {
            return Err(Error::InvalidTimeBase("bars must be positive"));
        }
        Ok(Self { bpm, ppq, bars })
    }

    pub fn with_bpm(bpm: f64) -> Result<Self> {
        Self::new(bpm, 480, 2)
    }

    pub fn bpm(&self) -> f64 {
        self.bpm
    }

    pub fn ppq(&self) -> u32 {
        self.ppq
    }

    pub fn bars(&self) -> u32 {
        self.bars
    }

    pub fn ticks_per_sixteenth(&self) -> u32 {
        self.ppq / 4
    }

    pub fn total_steps(&self) -> usize {
        (self.bars * BEATS_PER_BAR * 4) as usize
    }

    /// Length of one sixteenth step in seconds.
    pub fn step_seconds(&self) -> f64 {
        60.0 / self.bpm / 4.0
    }

    /// Expected loop length in seconds.
    pub fn loop_seconds(&self) -> f64 {
        f64::from(self.bars * BEATS_PER_BAR) * 60.0 / self.bpm
    }
}

/// Onset positions on the MIDI tick grid, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickOnsets(Vec<u64>);

impl TickOnsets {
    /// Sorts the ticks so the nondecreasing invariant always holds.
    pub fn new(mut ticks: Vec<u64>) -> Self {
        ticks.sort_unstable();
        Self(ticks)
    }

    pub fn ticks(&self) -> &[u64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.0
    }
}

/// `tick = round(seconds * bpm / 60 * ppq)`.
pub fn seconds_to_ticks(onsets_sec: &[f64], tb: &TimeBase) -> Result<TickOnsets> {
    let ticks_per_second = tb.bpm / 60.0 * f64::from(tb.ppq);
    let mut ticks = Vec::with_capacity(onsets_sec.len());
    for &t in onsets_sec {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidOnset(t));
        }
        ticks.push(libm::round(t * ticks_per_second) as u64);
    }
    Ok(TickOnsets::new(ticks))
}

/// Snaps every tick to its nearest sixteenth step (half rounds up) and sets
/// that slot. Onsets rounding past the last step wrap onto the next loop's
/// downbeat.
pub fn quantize_to_steps(ticks: &TickOnsets, tb: &TimeBase) -> Result<ManyHotPattern> {
    let total = tb.total_steps();
    if total != STEPS {
        return Err(Error::InvalidTimeBase("quantization requires exactly 32 steps"));
    }
    let per_step = u64::from(tb.ticks_per_sixteenth());
    let mut pattern = ManyHotPattern::empty();
    for &t in ticks.ticks() {
        let step = (t + per_step / 2) / per_step;
        pattern.set((step % STEPS as u64) as usize, true);
    }
    Ok(pattern)
}

/// One onset exactly on each active step's grid tick.
pub fn steps_to_ticks(pattern: &ManyHotPattern, tb: &TimeBase) -> TickOnsets {
    let per_step = u64::from(tb.ticks_per_sixteenth());
    TickOnsets::new(pattern.active_steps().map(|s| s as u64 * per_step).collect())
}
