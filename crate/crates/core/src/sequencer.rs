//! The 32-step sequencer: a rhythm lane fed by the generator, an 8-step
//! pitch lane, a length control and monophonic note output on the tick grid.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::generator::GenerationResult;
use crate::pattern::{ManyHotPattern, TimeBase, STEPS};
use crate::smf::{write_smf, NoteEvent, NoteKind};

/// Number of slots in the pitch lane.
pub const PITCH_STEPS: usize = 8;

/// Note events carry their position on the ideal tick grid; live output maps
/// ticks to wall-clock time.
pub type MidiEvent = NoteEvent;

#[derive(Debug, Clone, PartialEq)]
pub struct Sequencer {
    time_base: TimeBase,
    pattern: ManyHotPattern,
    velocities: [u8; STEPS],
    pitch_lane: [u8; PITCH_STEPS],
    length: usize,
    playhead: usize,
    running: bool,
    /// The first tick after `start` plays step 0 instead of advancing.
    at_start: bool,
    pending: Option<(ManyHotPattern, [u8; STEPS])>,
    sounding: Option<u8>,
    steps_played: u64,
}

impl Default for Sequencer {
    fn default() -> Self {
        Self::new(TimeBase::default())
    }
}

impl Sequencer {
    pub fn new(time_base: TimeBase) -> Self {
        Self {
            time_base,
            pattern: ManyHotPattern::empty(),
            velocities: [100; STEPS],
            pitch_lane: [60; PITCH_STEPS],
            length: STEPS,
            playhead: 0,
            running: false,
            at_start: true,
            pending: None,
            sounding: None,
            steps_played: 0,
        }
    }

    pub fn time_base(&self) -> &TimeBase {
        &self.time_base
    }

    pub fn pattern(&self) -> &ManyHotPattern {
        &self.pattern
    }

    pub fn velocities(&self) -> &[u8; STEPS] {
        &self.velocities
    }

    pub fn pitch_lane(&self) -> &[u8; PITCH_STEPS] {
        &self.pitch_lane
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn playhead(&self) -> usize {
        self.playhead
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn bpm(&self) -> f64 {
        self.time_base.bpm()
    }

    /// Wall-clock length of one step in seconds.
    pub fn step_seconds(&self) -> f64 {
        self.time_base.step_seconds()
    }

    /// Note currently held, if its note-off has not been emitted.
    pub fn sounding(&self) -> Option<u8> {
        self.sounding
    }

    fn ticks_per_step(&self) -> u64 {
        u64::from(self.time_base.ticks_per_sixteenth())
    }

    fn current_step_tick(&self) -> u64 {
        self.steps_played.saturating_sub(1) * self.ticks_per_step()
    }

    fn gate_tick(&self) -> u64 {
        self.current_step_tick() + self.ticks_per_step() / 2
    }

    /// Replaces pattern and velocities. While running the swap waits for the
    /// next step boundary.
    pub fn apply_generation(&mut self, result: &GenerationResult) {
        self.load(result.pattern, result.velocities);
    }

    pub fn load(&mut self, pattern: ManyHotPattern, velocities: [u8; STEPS]) {
        let velocities = velocities.map(|v| v.min(127));
        if self.running {
            self.pending = Some((pattern, velocities));
        } else {
            self.pattern = pattern;
            self.velocities = velocities;
            self.pending = None;
        }
    }

    pub fn set_length(&mut self, length: usize) -> Result<()> {
        if !(1..=STEPS).contains(&length) {
            return Err(Error::OutOfRange { what: "length", value: length as i64 });
        }
        self.length = length;
        self.playhead %= length;
        Ok(())
    }

    pub fn set_pitch(&mut self, slot: usize, note: u8) -> Result<()> {
        if slot >= PITCH_STEPS {
            return Err(Error::OutOfRange { what: "pitch slot", value: slot as i64 });
        }
        if note > 127 {
            return Err(Error::OutOfRange { what: "note", value: i64::from(note) });
        }
        self.pitch_lane[slot] = note;
        Ok(())
    }

    pub fn set_bpm(&mut self, bpm: f64) -> Result<()> {
        self.time_base = TimeBase::new(bpm, self.time_base.ppq(), self.time_base.bars())?;
        Ok(())
    }

    /// Starts (or restarts) from step 0, closing any held note.
    pub fn start(&mut self) -> Vec<MidiEvent> {
        let events = self.release_at(self.gate_tick()).into_iter().collect();
        self.running = true;
        self.at_start = true;
        self.playhead = 0;
        self.steps_played = 0;
        events
    }

    /// Stops and closes any held note immediately.
    pub fn stop(&mut self) -> Vec<MidiEvent> {
        self.running = false;
        if let Some((p, v)) = self.pending.take() {
            self.pattern = p;
            self.velocities = v;
        }
        self.release_at(self.gate_tick()).into_iter().collect()
    }

    fn release_at(&mut self, tick: u64) -> Option<MidiEvent> {
        self.sounding.take().map(|note| MidiEvent { tick, kind: NoteKind::Off, note, velocity: 0 })
    }

    /// Advances one step. Returns a note-off for a still-held note, then the
    /// note-on for the new step if its slot is active.
    pub fn tick(&mut self) -> Vec<MidiEvent> {
        let mut events = Vec::with_capacity(2);
        if !self.running {
            return events;
        }
        let step_tick = self.steps_played * self.ticks_per_step();
        events.extend(self.release_at(step_tick));
        if let Some((p, v)) = self.pending.take() {
            self.pattern = p;
            self.velocities = v;
        }
        if self.at_start {
            self.at_start = false;
        } else {
            self.playhead = (self.playhead + 1) % self.length;
        }
        self.steps_played += 1;
        let step = self.playhead;
        if self.pattern.get(step) {
            let note = self.pitch_lane[step % PITCH_STEPS];
            // a zero-velocity note-on means note-off on the wire
            let velocity = self.velocities[step].max(1);
            events.push(MidiEvent { tick: step_tick, kind: NoteKind::On, note, velocity });
            self.sounding = Some(note);
        }
        events
    }

    /// Ends the held note at half a step. The clock calls this mid-step.
    pub fn gate(&mut self) -> Option<MidiEvent> {
        let tick = self.gate_tick();
        self.release_at(tick)
    }

    /// Events of `n_steps` ideal ticks from a fresh start, closed at the end.
    pub fn trace(&self, n_steps: usize) -> Vec<MidiEvent> {
        let mut seq = self.clone();
        let mut events = seq.start();
        for _ in 0..n_steps {
            events.extend(seq.tick());
            events.extend(seq.gate());
        }
        events.extend(seq.stop());
        events
    }

    /// [`Sequencer::trace`] written as a format-0 MIDI file.
    pub fn render_offline(&self, n_steps: usize) -> Result<Vec<u8>> {
        if n_steps == 0 {
            return Err(Error::OutOfRange { what: "steps", value: 0 });
        }
        Ok(write_smf(&self.trace(n_steps), &self.time_base))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smf::read_smf;
    use alloc::vec;

    fn ons(events: &[MidiEvent]) -> Vec<&MidiEvent> {
        events.iter().filter(|e| e.kind == NoteKind::On).collect()
    }

    #[test]
    fn silent_pattern_never_emits() {
        let mut s = Sequencer::default();
        s.set_length(5).unwrap();
        s.start();
        for _ in 0..100 {
            assert!(s.tick().is_empty());
            assert!(s.gate().is_none());
        }
    }

    #[test]
    fn length_one_repeats_step_zero() {
        let mut s = Sequencer::default();
        s.load(ManyHotPattern::from_steps([0]).unwrap(), [100; STEPS]);
        s.set_length(1).unwrap();
        s.start();
        for _ in 0..10 {
            let ev = s.tick();
            assert_eq!(ev.len(), 1);
            assert_eq!((ev[0].kind, ev[0].note, ev[0].velocity), (NoteKind::On, 60, 100));
            assert_eq!(s.gate().map(|e| e.kind), Some(NoteKind::Off));
            assert_eq!(s.playhead(), 0);
        }
    }

    #[test]
    fn four_on_floor_pitch_follows_step_mod_eight() {
        let mut s = Sequencer::default();
        for (i, n) in [60, 61, 62, 63, 64, 65, 66, 67].into_iter().enumerate() {
            s.set_pitch(i, n).unwrap();
        }
        s.load(ManyHotPattern::from_steps((0..32).step_by(4)).unwrap(), [90; STEPS]);
        let trace = s.trace(32);
        let on = ons(&trace);
        assert_eq!(on.len(), 8);
        assert_eq!(on.iter().map(|e| e.tick).collect::<Vec<_>>(), (0..8).map(|k| k * 480).collect::<Vec<_>>());
        assert_eq!(on.iter().map(|e| e.note).collect::<Vec<_>>(), vec![60, 64, 60, 64, 60, 64, 60, 64]);
    }

    #[test]
    fn swap_waits_for_step_boundary() {
        let mut s = Sequencer::default();
        s.load(ManyHotPattern::from_steps([0, 1, 2]).unwrap(), [100; STEPS]);
        s.start();
        assert_eq!(ons(&s.tick()).len(), 1);
        s.load(ManyHotPattern::empty(), [0; STEPS]);
        // mid-step: the old pattern is still in force
        assert_eq!(s.pattern().count_active(), 3);
        let off = s.gate();
        assert!(off.is_some());
        assert!(s.tick().is_empty());
        assert_eq!(s.pattern().count_active(), 0);
    }

    #[test]
    fn swap_to_silence_still_closes_held_note() {
        let mut s = Sequencer::default();
        s.load(ManyHotPattern::from_steps([0]).unwrap(), [100; STEPS]);
        s.start();
        s.tick();
        s.load(ManyHotPattern::empty(), [0; STEPS]);
        let ev = s.tick();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, NoteKind::Off);
        assert_eq!(s.sounding(), None);
    }

    #[test]
    fn apply_generation_is_idempotent() {
        let r = GenerationResult {
            raw: [0.7; STEPS],
            pattern: ManyHotPattern::from_steps([3, 9]).unwrap(),
            velocities: [89; STEPS],
        };
        let mut a = Sequencer::default();
        a.apply_generation(&r);
        let snapshot = a.clone();
        a.apply_generation(&r);
        assert_eq!(a, snapshot);
    }

    #[test]
    fn controls_validate_and_leave_state_alone() {
        let mut s = Sequencer::default();
        let before = s.clone();
        assert!(s.set_length(33).is_err());
        assert!(s.set_length(0).is_err());
        assert!(s.set_pitch(8, 60).is_err());
        assert!(s.set_pitch(0, 128).is_err());
        assert!(s.set_bpm(0.0).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn length_sets_period() {
        let mut s = Sequencer::default();
        s.load(ManyHotPattern::from_steps([1, 5, 20]).unwrap(), [100; STEPS]);
        s.set_length(8).unwrap();
        s.start();
        let mut heads = Vec::new();
        for _ in 0..24 {
            s.tick();
            heads.push(s.playhead());
        }
        assert_eq!(&heads[..8], &heads[8..16]);
        assert_eq!(&heads[..8], &[0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn stop_closes_exactly_one_note() {
        let mut s = Sequencer::default();
        s.load(ManyHotPattern::from_steps([0]).unwrap(), [100; STEPS]);
        s.start();
        s.tick();
        let off = s.stop();
        assert_eq!(off.len(), 1);
        assert_eq!(off[0].kind, NoteKind::Off);
        assert!(s.stop().is_empty());
        assert!(s.tick().is_empty());
    }

    #[test]
    fn render_rejects_zero_steps_and_matches_trace() {
        let mut s = Sequencer::default();
        s.load(ManyHotPattern::from_steps([0, 4, 8, 12, 16, 20, 24, 28]).unwrap(), [100; STEPS]);
        assert!(s.render_offline(0).is_err());
        let smf = read_smf(&s.render_offline(32).unwrap()).unwrap();
        assert_eq!(smf.notes, s.trace(32));
    }
}
