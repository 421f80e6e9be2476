#![allow(dead_code)]

use std::path::Path;

use latentseq::wav::{write_file, SampleFormat, WavData};
use latentseq_core::sequencer::MidiEvent;
use latentseq_core::smf::NoteKind;
use latentseq_core::ManyHotPattern;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RATE: u32 = 44_100;

/// A click track: one full-scale single-sample impulse at each active
/// sixteenth of a 2-bar loop, `seconds_per_step` apart.
pub fn click_track(pattern: &ManyHotPattern, sample_rate: u32, seconds_per_step: f64, channels: usize) -> WavData {
    let len = (32.0 * seconds_per_step * f64::from(sample_rate)).round() as usize;
    let mut mono = vec![0.0f32; len];
    for step in pattern.active_steps() {
        let at = (step as f64 * seconds_per_step * f64::from(sample_rate)).round() as usize;
        mono[at] = 0.9;
    }
    WavData { sample_rate, channels: vec![mono; channels] }
}

pub fn write_click_track(path: &Path, pattern: &ManyHotPattern) {
    write_file(path, &click_track(pattern, RATE, 0.125, 1), SampleFormat::Int16).unwrap();
}

pub fn random_patterns(n: usize, seed: u64) -> Vec<ManyHotPattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let density = rng.random_range(0.1..0.6);
            ManyHotPattern::from_bools(std::array::from_fn(|_| rng.random_bool(density)))
        })
        .collect()
}

/// Note-on/note-off strictly alternate and nothing is left sounding.
pub fn paired(events: &[MidiEvent]) -> bool {
    let mut open: Option<u8> = None;
    for e in events {
        match (e.kind, open) {
            (NoteKind::On, None) => open = Some(e.note),
            (NoteKind::Off, Some(n)) if n == e.note => open = None,
            _ => return false,
        }
    }
    open.is_none()
}

/// A decoder that ignores its input and always produces `pattern`, with
/// raw activations sigmoid(±8) so velocities are 127 on active steps.
pub fn constant_decoder(pattern: &ManyHotPattern) -> latentseq_core::nn::Decoder {
    use latentseq_core::nn::{Activation, Decoder, Dense, Network};
    let hidden = Dense::new(2, 4, Activation::Relu, vec![0.0; 8], vec![0.0; 4]).unwrap();
    let biases = pattern.slots().iter().map(|&on| if on { 8.0 } else { -8.0 }).collect();
    let out = Dense::new(4, 32, Activation::Sigmoid, vec![0.0; 128], biases).unwrap();
    Decoder::new(Network::new(vec![hidden, out]).unwrap()).unwrap()
}

pub fn four_on_the_floor() -> ManyHotPattern {
    ManyHotPattern::from_steps((0..32).step_by(4)).unwrap()
}

pub mod wsclient {
    use std::net::SocketAddr;
    use std::time::{Duration, Instant};

    use latentseq::ws::{connect, Message, WsReader, WsWriter};
    use serde_json::Value;

    pub struct Client {
        pub reader: WsReader,
        pub writer: WsWriter,
    }

    impl Client {
        pub fn connect(addr: SocketAddr) -> Self {
            let (reader, writer) = connect(addr, "/").unwrap();
            Self { reader, writer }
        }

        pub fn send(&mut self, v: &Value) {
            self.writer.send_text(&v.to_string()).unwrap();
        }

        pub fn send_raw(&mut self, text: &str) {
            self.writer.send_text(text).unwrap();
        }

        /// Next JSON frame within `timeout`, or `None`.
        pub fn next(&mut self, timeout: Duration) -> Option<Value> {
            self.reader.get_ref().set_read_timeout(Some(timeout)).unwrap();
            loop {
                match self.reader.read_message() {
                    Ok(Message::Text(t)) => return Some(serde_json::from_str(&t).unwrap()),
                    Ok(Message::Ping(_) | Message::Pong(_)) => continue,
                    Ok(_) | Err(_) => return None,
                }
            }
        }

        /// Skips frames until one of type `kind` arrives.
        pub fn next_of(&mut self, kind: &str, timeout: Duration) -> Option<Value> {
            let end = Instant::now() + timeout;
            while let Some(left) = end.checked_duration_since(Instant::now()) {
                match self.next(left) {
                    Some(v) if v["type"] == kind => return Some(v),
                    Some(_) => continue,
                    None => return None,
                }
            }
            None
        }
    }
}
