//! Format-0 Standard MIDI File writing and a small reader for the same subset.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pattern::{ManyHotPattern, TimeBase, STEPS};

/// Microseconds per quarter note a MIDI reader assumes with no tempo event.
const DEFAULT_TEMPO_US: u32 = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoteKind {
    On,
    Off,
}

/// A channel-1 note event placed at an absolute tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoteEvent {
    pub tick: u64,
    pub kind: NoteKind,
    pub note: u8,
    pub velocity: u8,
}

/// Writes a single-track SMF. Events must already be in tick order; equal
/// ticks keep their given order.
///
/// A tempo meta event is written only when the tempo differs from the
/// MIDI default of 120 BPM.
pub fn write_smf(events: &[NoteEvent], tb: &TimeBase) -> Vec<u8> {
    let mut track = Vec::new();
    let tempo_us = libm::round(60_000_000.0 / tb.bpm()) as u32;
    if tempo_us != DEFAULT_TEMPO_US {
        track.extend_from_slice(&[0x00, 0xFF, 0x51, 0x03]);
        track.extend_from_slice(&tempo_us.to_be_bytes()[1..]);
    }
    let mut last = 0u64;
    for ev in events {
        debug_assert!(ev.tick >= last, "events out of order");
        write_vlq(&mut track, ev.tick.saturating_sub(last));
        last = ev.tick.max(last);
        let status = match ev.kind {
            NoteKind::On => 0x90,
            NoteKind::Off => 0x80,
        };
        track.extend_from_slice(&[status, ev.note & 0x7F, ev.velocity & 0x7F]);
    }
    track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(tb.ppq() as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

/// Renders a pattern as one note per active step, gated at half a sixteenth.
pub fn pattern_to_midi_file(
    pattern: &ManyHotPattern,
    velocities: &[i32],
    pitch: u8,
    tb: &TimeBase,
) -> Result<Vec<u8>> {
    if velocities.len() != STEPS {
        return Err(Error::DimensionMismatch { expected: STEPS, got: velocities.len() });
    }
    if let Some((index, &value)) = velocities.iter().enumerate().find(|(_, v)| !(0..=127).contains(*v)) {
        return Err(Error::VelocityOutOfRange { index, value });
    }
    if pitch > 127 {
        return Err(Error::OutOfRange { what: "pitch", value: pitch as i64 });
    }
    let per_step = u64::from(tb.ticks_per_sixteenth());
    let gate = per_step / 2;
    let mut events = Vec::with_capacity(pattern.count_active() * 2);
    for step in pattern.active_steps() {
        let on = step as u64 * per_step;
        events.push(NoteEvent { tick: on, kind: NoteKind::On, note: pitch, velocity: velocities[step] as u8 });
        events.push(NoteEvent { tick: on + gate, kind: NoteKind::Off, note: pitch, velocity: 0 });
    }
    Ok(write_smf(&events, tb))
}

fn write_vlq(out: &mut Vec<u8>, mut value: u64) {
    let mut buf = [0u8; 10];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7F) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let more = if i > 0 { 0x80 } else { 0 };
        out.push(buf[i] | more);
    }
}

/// What [`read_smf`] recovers from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct SmfContents {
    pub format: u16,
    pub ppq: u16,
    /// Tempo in microseconds per quarter, if a tempo event was present.
    pub tempo_us: Option<u32>,
    pub notes: Vec<NoteEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed MIDI file at byte {offset}: {reason}")]
pub struct SmfError {
    pub offset: usize,
    pub reason: &'static str,
}

/// Reads note and tempo events from the first track. Note-on with velocity
/// zero is reported as note-off. Running status is accepted.
pub fn read_smf(bytes: &[u8]) -> core::result::Result<SmfContents, SmfError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != b"MThd" {
        return Err(r.err("missing MThd"));
    }
    let hlen = r.u32()? as usize;
    let format = r.u16()?;
    let _ntrks = r.u16()?;
    let ppq = r.u16()?;
    if hlen > 6 {
        r.take(hlen - 6)?;
    }
    if r.take(4)? != b"MTrk" {
        return Err(r.err("missing MTrk"));
    }
    let tlen = r.u32()? as usize;
    let end = r.pos.checked_add(tlen).filter(|&e| e <= bytes.len()).ok_or(r.err("track overruns file"))?;

    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut tempo_us = None;
    let mut notes = Vec::new();
    while r.pos < end {
        tick += r.vlq()?;
        let mut status = r.u8()?;
        let first_data = if status < 0x80 {
            let s = running.ok_or(r.err("data byte without running status"))?;
            let d = status;
            status = s;
            Some(d)
        } else {
            None
        };
        match status {
            0xFF => {
                let kind = r.u8()?;
                let len = r.vlq()? as usize;
                let data = r.take(len)?;
                match kind {
                    0x2F => break,
                    0x51 if len == 3 => {
                        tempo_us = Some(u32::from_be_bytes([0, data[0], data[1], data[2]]));
                    }
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                let len = r.vlq()? as usize;
                r.take(len)?;
            }
            0x80..=0xEF => {
                running = Some(status);
                let a = match first_data {
                    Some(d) => d,
                    None => r.u8()?,
                };
                let hi = status & 0xF0;
                let b = if hi == 0xC0 || hi == 0xD0 { 0 } else { r.u8()? };
                match hi {
                    0x90 if b > 0 => notes.push(NoteEvent { tick, kind: NoteKind::On, note: a, velocity: b }),
                    0x80 | 0x90 => notes.push(NoteEvent { tick, kind: NoteKind::Off, note: a, velocity: b }),
                    _ => {}
                }
            }
            _ => return Err(r.err("unsupported status byte")),
        }
    }
    Ok(SmfContents { format, ppq, tempo_us, notes })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: &'static str) -> SmfError {
        SmfError { offset: self.pos, reason }
    }

    fn take(&mut self, n: usize) -> core::result::Result<&'a [u8], SmfError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(self.err("unexpected end of data"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> core::result::Result<u8, SmfError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> core::result::Result<u16, SmfError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> core::result::Result<u32, SmfError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> core::result::Result<u64, SmfError> {
        let mut v = 0u64;
        for _ in 0..4 {
            let b = self.u8()?;
            v = (v << 7) | u64::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(self.err("variable-length quantity too long"))
    }
}
