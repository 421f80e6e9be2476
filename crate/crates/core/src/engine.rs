//! Routing of validated controls into the generator and sequencer. The
//! network runtime owns one [`Engine`] and feeds it from every transport,
//! which is what makes OSC and WebSocket control interchangeable.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::control::{Control, Outbound, Transport};
use crate::error::{Error, Result};
use crate::generator::{Ensemble, GenerationRequest, GenerationResult, DEFAULT_THRESHOLD};
use crate::pattern::{ManyHotPattern, TimeBase, STEPS};
use crate::sequencer::{MidiEvent, Sequencer, PITCH_STEPS};

/// Observable engine state, as sent to newly connected clients.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub active_model: String,
    pub x: f64,
    pub y: f64,
    pub threshold: f64,
    pub running: bool,
    pub length: usize,
    pub bpm: f64,
    pub pitch_lane: [u8; PITCH_STEPS],
    pub playhead: usize,
    pub pattern: ManyHotPattern,
    pub velocities: [u8; STEPS],
}

/// What applying one control produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Applied {
    pub outbound: Vec<Outbound>,
    pub midi: Vec<MidiEvent>,
    /// Fresh results for every loaded model, when generation ran.
    pub generated: Option<BTreeMap<String, GenerationResult>>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    ensemble: Ensemble,
    active: String,
    x: f64,
    y: f64,
    threshold: f64,
    sequencer: Sequencer,
    latest: BTreeMap<String, GenerationResult>,
}

impl Engine {
    /// Starts at latent (0, 0) with the default threshold and generates once
    /// so the sequencer holds a pattern from the outset.
    pub fn new(ensemble: Ensemble, active: Option<&str>, time_base: TimeBase) -> Result<Self> {
        let active = match active {
            Some(id) => {
                ensemble.get(id)?;
                String::from(id)
            }
            None => ensemble.model_ids().next().map(String::from).ok_or(Error::UnknownModel(String::new()))?,
        };
        let mut engine = Self {
            ensemble,
            active,
            x: 0.0,
            y: 0.0,
            threshold: DEFAULT_THRESHOLD,
            sequencer: Sequencer::new(time_base),
            latest: BTreeMap::new(),
        };
        engine.regenerate()?;
        Ok(engine)
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn sequencer(&self) -> &Sequencer {
        &self.sequencer
    }

    pub fn latest(&self) -> &BTreeMap<String, GenerationResult> {
        &self.latest
    }

    pub fn state(&self) -> EngineState {
        let s = &self.sequencer;
        EngineState {
            active_model: self.active.clone(),
            x: self.x,
            y: self.y,
            threshold: self.threshold,
            running: s.is_running(),
            length: s.length(),
            bpm: s.bpm(),
            pitch_lane: *s.pitch_lane(),
            playhead: s.playhead(),
            pattern: *s.pattern(),
            velocities: *s.velocities(),
        }
    }

    fn regenerate(&mut self) -> Result<Applied> {
        let ids: Vec<String> = self.ensemble.model_ids().map(String::from).collect();
        let reqs: Vec<GenerationRequest> =
            ids.into_iter().map(|id| GenerationRequest::new(id, self.x, self.y, self.threshold)).collect();
        let results = self.ensemble.generate_ensemble(&reqs)?;
        let active = &results[&self.active];
        self.sequencer.apply_generation(active);
        let outbound = alloc::vec![Outbound::Pattern(active.pattern), Outbound::Velocity(active.velocities)];
        self.latest = results.clone();
        Ok(Applied { outbound, midi: Vec::new(), generated: Some(results) })
    }

    /// Applies one control. On error the engine state is unchanged.
    pub fn apply(&mut self, control: &Control) -> Result<Applied> {
        match *control {
            Control::Latent { x, y } => {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(Error::NotPositive("finite latent"));
                }
                let prev = (self.x, self.y);
                (self.x, self.y) = (x, y);
                self.regenerate().inspect_err(|_| (self.x, self.y) = prev)
            }
            Control::Threshold(t) => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::ThresholdOutOfRange(t));
                }
                let prev = self.threshold;
                self.threshold = t;
                self.regenerate().inspect_err(|_| self.threshold = prev)
            }
            Control::Model(ref id) => {
                self.ensemble.get(id)?;
                let prev = core::mem::replace(&mut self.active, id.clone());
                self.regenerate().inspect_err(|_| self.active = prev)
            }
            Control::Pitch { slot, note } => {
                self.sequencer.set_pitch(usize::from(slot), note)?;
                Ok(Applied::default())
            }
            Control::Length(l) => {
                self.sequencer.set_length(usize::from(l))?;
                Ok(Applied::default())
            }
            Control::Bpm(b) => {
                self.sequencer.set_bpm(b)?;
                Ok(Applied::default())
            }
            Control::Transport(t) => {
                let midi = match t {
                    Transport::Start => self.sequencer.start(),
                    Transport::Stop => self.sequencer.stop(),
                };
                Ok(Applied { midi, ..Applied::default() })
            }
        }
    }

    /// A step boundary: note events plus the new playhead when running.
    pub fn tick(&mut self) -> (Vec<MidiEvent>, Option<Outbound>) {
        if !self.sequencer.is_running() {
            return (Vec::new(), None);
        }
        let events = self.sequencer.tick();
        (events, Some(Outbound::Playhead(self.sequencer.playhead() as u8)))
    }

    /// Mid-step gate release.
    pub fn gate(&mut self) -> Option<MidiEvent> {
        self.sequencer.gate()
    }

    /// Stops the sequencer, returning note-offs for anything still held.
    pub fn shutdown(&mut self) -> Vec<MidiEvent> {
        self.sequencer.stop()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, Autoencoder};

    fn zero_engine() -> Engine {
        let mut ens = Ensemble::new();
        ens.insert("zero", Autoencoder::zeros(Architecture::Prototype).split().1);
        ens.insert("init", Autoencoder::init(Architecture::Model1, 4).split().1);
        Engine::new(ens, Some("zero"), TimeBase::default()).unwrap()
    }

    #[test]
    fn latent_on_zero_decoder_broadcasts_all_ones() {
        let mut e = zero_engine();
        let out = e.apply(&Control::Latent { x: 0.0, y: 0.0 }).unwrap();
        assert_eq!(out.outbound[0], Outbound::Pattern(ManyHotPattern::from_steps(0..32).unwrap()));
        assert_eq!(out.generated.unwrap().len(), 2);
    }

    #[test]
    fn failed_controls_leave_state_unchanged() {
        let mut e = zero_engine();
        let before = e.state();
        assert!(e.apply(&Control::Model("missing".into())).is_err());
        assert!(e.apply(&Control::Threshold(2.0)).is_err());
        assert!(e.apply(&Control::Length(0)).is_err());
        assert_eq!(e.state(), before);
    }

    #[test]
    fn length_control_sets_playhead_period() {
        let mut e = zero_engine();
        e.apply(&Control::Length(8)).unwrap();
        e.apply(&Control::Transport(Transport::Start)).unwrap();
        let heads: Vec<_> = (0..16)
            .map(|_| match e.tick().1 {
                Some(Outbound::Playhead(h)) => h,
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(heads, [0, 1, 2, 3, 4, 5, 6, 7, 0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn shutdown_closes_notes() {
        let mut e = zero_engine();
        e.apply(&Control::Transport(Transport::Start)).unwrap();
        let (ev, _) = e.tick();
        assert_eq!(ev.len(), 1);
        assert_eq!(e.shutdown().len(), 1);
        assert_eq!(e.sequencer().sounding(), None);
    }
}
