//! The `/seq/*` control schema shared by the OSC and WebSocket transports.
//!
//! Inbound:
//!
//! | address          | args  | meaning                      |
//! |------------------|-------|------------------------------|
//! | `/seq/latent`    | `ff`  | latent x, y                  |
//! | `/seq/threshold` | `f`   | output threshold in [0, 1]   |
//! | `/seq/model`     | `s`   | select active model id       |
//! | `/seq/pitch`     | `ii`  | pitch slot 0-7, MIDI note    |
//! | `/seq/length`    | `i`   | sequence length 1-32         |
//! | `/seq/bpm`       | `f`   | tempo                        |
//! | `/seq/transport` | `s`   | `start` or `stop`            |
//!
//! Outbound: `/seq/pattern` (32 × `i` 0/1), `/seq/velocity` (32 × `i`
//! 0-127) and `/seq/playhead` (`i`).
//!
//! Integer arguments also accept whole-number floats and float arguments
//! accept ints, so patches that send every number as a float still work.

use alloc::string::String;
use alloc::vec::Vec;

use crate::osc::{OscArg, OscMessage};
use crate::pattern::{ManyHotPattern, STEPS};
use crate::sequencer::PITCH_STEPS;

pub const LATENT: &str = "/seq/latent";
pub const THRESHOLD: &str = "/seq/threshold";
pub const MODEL: &str = "/seq/model";
pub const PITCH: &str = "/seq/pitch";
pub const LENGTH: &str = "/seq/length";
pub const BPM: &str = "/seq/bpm";
pub const TRANSPORT: &str = "/seq/transport";
pub const PATTERN: &str = "/seq/pattern";
pub const VELOCITY: &str = "/seq/velocity";
pub const PLAYHEAD: &str = "/seq/playhead";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Start,
    Stop,
}

impl Transport {
    pub fn as_str(self) -> &'static str {
        match self {
            Transport::Start => "start",
            Transport::Stop => "stop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "start" => Some(Transport::Start),
            "stop" => Some(Transport::Stop),
            _ => None,
        }
    }
}

/// A validated inbound control.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Latent { x: f64, y: f64 },
    Threshold(f64),
    Model(String),
    Pitch { slot: u8, note: u8 },
    Length(u8),
    Bpm(f64),
    Transport(Transport),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("unknown address `{0}`")]
    UnknownAddress(String),
    #[error("`{address}` expects {expected}")]
    BadArguments { address: &'static str, expected: &'static str },
    #[error("`{address}` value {value} is out of range")]
    OutOfRange { address: &'static str, value: f64 },
}

fn num(v: f64, address: &'static str, lo: f64, hi: f64) -> Result<f64, ControlError> {
    if v.is_finite() && (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(ControlError::OutOfRange { address, value: v })
    }
}

impl Control {
    pub fn latent(x: f64, y: f64) -> Result<Self, ControlError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(ControlError::OutOfRange { address: LATENT, value: if x.is_finite() { y } else { x } });
        }
        Ok(Control::Latent { x, y })
    }

    pub fn threshold(t: f64) -> Result<Self, ControlError> {
        Ok(Control::Threshold(num(t, THRESHOLD, 0.0, 1.0)?))
    }

    pub fn pitch(slot: i64, note: i64) -> Result<Self, ControlError> {
        let slot = num(slot as f64, PITCH, 0.0, (PITCH_STEPS - 1) as f64)? as u8;
        let note = num(note as f64, PITCH, 0.0, 127.0)? as u8;
        Ok(Control::Pitch { slot, note })
    }

    pub fn length(len: i64) -> Result<Self, ControlError> {
        Ok(Control::Length(num(len as f64, LENGTH, 1.0, STEPS as f64)? as u8))
    }

    pub fn bpm(bpm: f64) -> Result<Self, ControlError> {
        if bpm.is_finite() && bpm > 0.0 {
            Ok(Control::Bpm(bpm))
        } else {
            Err(ControlError::OutOfRange { address: BPM, value: bpm })
        }
    }

    pub fn address(&self) -> &'static str {
        match self {
            Control::Latent { .. } => LATENT,
            Control::Threshold(_) => THRESHOLD,
            Control::Model(_) => MODEL,
            Control::Pitch { .. } => PITCH,
            Control::Length(_) => LENGTH,
            Control::Bpm(_) => BPM,
            Control::Transport(_) => TRANSPORT,
        }
    }

    pub fn from_osc(msg: &OscMessage) -> Result<Self, ControlError> {
        let a = &msg.args;
        let bad = |address, expected| ControlError::BadArguments { address, expected };
        match msg.address.as_str() {
            LATENT => match a.as_slice() {
                [x, y] => Control::latent(
                    x.as_f64().ok_or(bad(LATENT, "two floats"))?,
                    y.as_f64().ok_or(bad(LATENT, "two floats"))?,
                ),
                _ => Err(bad(LATENT, "two floats")),
            },
            THRESHOLD => match a.as_slice() {
                [t] => Control::threshold(t.as_f64().ok_or(bad(THRESHOLD, "one float"))?),
                _ => Err(bad(THRESHOLD, "one float")),
            },
            MODEL => match a.as_slice() {
                [OscArg::Str(s)] => Ok(Control::Model(s.clone())),
                _ => Err(bad(MODEL, "one string")),
            },
            PITCH => match a.as_slice() {
                [s, n] => Control::pitch(
                    i64::from(s.as_int().ok_or(bad(PITCH, "two ints"))?),
                    i64::from(n.as_int().ok_or(bad(PITCH, "two ints"))?),
                ),
                _ => Err(bad(PITCH, "two ints")),
            },
            LENGTH => match a.as_slice() {
                [l] => Control::length(i64::from(l.as_int().ok_or(bad(LENGTH, "one int"))?)),
                _ => Err(bad(LENGTH, "one int")),
            },
            BPM => match a.as_slice() {
                [b] => Control::bpm(b.as_f64().ok_or(bad(BPM, "one float"))?),
                _ => Err(bad(BPM, "one float")),
            },
            TRANSPORT => match a.as_slice() {
                [OscArg::Str(s)] => Transport::parse(s).map(Control::Transport).ok_or(bad(TRANSPORT, "\"start\" or \"stop\"")),
                _ => Err(bad(TRANSPORT, "\"start\" or \"stop\"")),
            },
            other => Err(ControlError::UnknownAddress(other.into())),
        }
    }

    pub fn to_osc(&self) -> OscMessage {
        let args = match self {
            Control::Latent { x, y } => alloc::vec![OscArg::Float(*x as f32), OscArg::Float(*y as f32)],
            Control::Threshold(t) => alloc::vec![OscArg::Float(*t as f32)],
            Control::Model(m) => alloc::vec![OscArg::Str(m.clone())],
            Control::Pitch { slot, note } => alloc::vec![OscArg::Int(i32::from(*slot)), OscArg::Int(i32::from(*note))],
            Control::Length(l) => alloc::vec![OscArg::Int(i32::from(*l))],
            Control::Bpm(b) => alloc::vec![OscArg::Float(*b as f32)],
            Control::Transport(t) => alloc::vec![OscArg::Str(t.as_str().into())],
        };
        OscMessage::new(self.address(), args)
    }
}

/// Engine-to-client notifications.
#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Pattern(ManyHotPattern),
    Velocity([u8; STEPS]),
    Playhead(u8),
}

impl Outbound {
    pub fn to_osc(&self) -> OscMessage {
        let ints = |v: &mut dyn Iterator<Item = i32>| v.map(OscArg::Int).collect::<Vec<_>>();
        match self {
            Outbound::Pattern(p) => OscMessage::new(PATTERN, ints(&mut p.bits().iter().map(|&b| i32::from(b)))),
            Outbound::Velocity(v) => OscMessage::new(VELOCITY, ints(&mut v.iter().map(|&b| i32::from(b)))),
            Outbound::Playhead(h) => OscMessage::new(PLAYHEAD, alloc::vec![OscArg::Int(i32::from(*h))]),
        }
    }

    pub fn from_osc(msg: &OscMessage) -> Result<Self, ControlError> {
        let ints = |address: &'static str| -> Result<Vec<i32>, ControlError> {
            msg.args.iter().map(|a| a.as_int().ok_or(ControlError::BadArguments { address, expected: "ints" })).collect()
        };
        match msg.address.as_str() {
            PATTERN => {
                let v = ints(PATTERN)?;
                let bits: Vec<u8> = v.iter().map(|&b| b.clamp(0, 255) as u8).collect();
                ManyHotPattern::from_bits(&bits)
                    .map(Outbound::Pattern)
                    .map_err(|_| ControlError::BadArguments { address: PATTERN, expected: "32 ints of 0 or 1" })
            }
            VELOCITY => {
                let v = ints(VELOCITY)?;
                if v.len() != STEPS || v.iter().any(|x| !(0..=127).contains(x)) {
                    return Err(ControlError::BadArguments { address: VELOCITY, expected: "32 ints in 0..=127" });
                }
                Ok(Outbound::Velocity(core::array::from_fn(|i| v[i] as u8)))
            }
            PLAYHEAD => match ints(PLAYHEAD)?.as_slice() {
                [h] if (0..STEPS as i32).contains(h) => Ok(Outbound::Playhead(*h as u8)),
                _ => Err(ControlError::BadArguments { address: PLAYHEAD, expected: "one int in 0..32" }),
            },
            other => Err(ControlError::UnknownAddress(other.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn parses_every_inbound_address() {
        let cases = [
            Control::Latent { x: 0.25, y: -1.5 },
            Control::Threshold(0.5),
            Control::Model("model3".into()),
            Control::Pitch { slot: 7, note: 72 },
            Control::Length(8),
            Control::Bpm(96.0),
            Control::Transport(Transport::Stop),
        ];
        for c in cases {
            assert_eq!(Control::from_osc(&c.to_osc()).unwrap(), c);
        }
    }

    #[test]
    fn float_ints_accepted() {
        let m = OscMessage::new(LENGTH, vec![OscArg::Float(8.0)]);
        assert_eq!(Control::from_osc(&m).unwrap(), Control::Length(8));
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = OscMessage::new("/bogus/address", vec![OscArg::Int(1)]);
        assert!(matches!(Control::from_osc(&unknown), Err(ControlError::UnknownAddress(_))));
        let wrong = OscMessage::new(LATENT, vec![OscArg::Str("x".into()), OscArg::Float(1.0)]);
        assert!(matches!(Control::from_osc(&wrong), Err(ControlError::BadArguments { .. })));
        let range = OscMessage::new(THRESHOLD, vec![OscArg::Float(1.5)]);
        assert!(matches!(Control::from_osc(&range), Err(ControlError::OutOfRange { .. })));
        let len = OscMessage::new(LENGTH, vec![OscArg::Int(33)]);
        assert!(Control::from_osc(&len).is_err());
        let t = OscMessage::new(TRANSPORT, vec![OscArg::Str("pause".into())]);
        assert!(Control::from_osc(&t).is_err());
    }

    #[test]
    fn outbound_carries_32_args() {
        let p = ManyHotPattern::from_steps([0, 31]).unwrap();
        let m = Outbound::Pattern(p).to_osc();
        assert_eq!(m.args.len(), 32);
        assert_eq!(Outbound::from_osc(&m).unwrap(), Outbound::Pattern(p));
        let v = Outbound::Velocity([127; 32]).to_osc();
        assert_eq!(v.args.len(), 32);
        assert_eq!(Outbound::from_osc(&Outbound::Playhead(31).to_osc()).unwrap(), Outbound::Playhead(31));
    }
}
