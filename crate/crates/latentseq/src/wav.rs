//! RIFF/WAVE PCM reading and writing.

use std::io::Write;

/// Decoded audio, one `Vec` per channel, samples scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f32>>,
}

impl WavData {
    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WavError {
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("missing `{0}` chunk")]
    MissingChunk(&'static str),
    #[error("unsupported encoding (format tag {tag}, {bits} bits); only PCM 16/24/32-bit and 32-bit float are read")]
    Unsupported { tag: u16, bits: u16 },
    #[error("malformed fmt chunk")]
    BadFormat,
    #[error("file is truncated")]
    Truncated,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn u16_at(b: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_le_bytes(b.get(at..at + 2)?.try_into().ok()?))
}

fn u32_at(b: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(b.get(at..at + 4)?.try_into().ok()?))
}

pub fn decode(bytes: &[u8]) -> Result<WavData, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotWave);
    }
    let mut fmt: Option<(u16, u16, u32, u16, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4).ok_or(WavError::Truncated)? as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(len).ok_or(WavError::Truncated)?;
        match id {
            b"fmt " => {
                let body = bytes.get(body_start..body_end).ok_or(WavError::Truncated)?;
                if len < 16 {
                    return Err(WavError::BadFormat);
                }
                let mut tag = u16_at(body, 0).ok_or(WavError::BadFormat)?;
                let channels = u16_at(body, 2).ok_or(WavError::BadFormat)?;
                let rate = u32_at(body, 4).ok_or(WavError::BadFormat)?;
                let block_align = u16_at(body, 12).ok_or(WavError::BadFormat)?;
                let bits = u16_at(body, 14).ok_or(WavError::BadFormat)?;
                if tag == FORMAT_EXTENSIBLE {
                    // first two bytes of the sub-format GUID carry the real tag
                    tag = u16_at(body, 24).ok_or(WavError::BadFormat)?;
                }
                fmt = Some((tag, channels, rate, block_align, bits));
            }
            b"data" => {
                data = Some(bytes.get(body_start..body_end).ok_or(WavError::Truncated)?);
            }
            _ => {}
        }
        pos = body_end + (len & 1);
    }
    let (tag, channels, sample_rate, block_align, bits) = fmt.ok_or(WavError::MissingChunk("fmt "))?;
    let data = data.ok_or(WavError::MissingChunk("data"))?;
    if channels == 0 || sample_rate == 0 {
        return Err(WavError::BadFormat);
    }
    let bytes_per_sample = match (tag, bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_PCM, 32) | (FORMAT_FLOAT, 32) => 4,
        _ => return Err(WavError::Unsupported { tag, bits }),
    };
    let frame_bytes = usize::from(channels) * bytes_per_sample;
    if usize::from(block_align) != frame_bytes {
        return Err(WavError::BadFormat);
    }
    let frames = data.len() / frame_bytes;
    let mut out = vec![Vec::with_capacity(frames); usize::from(channels)];
    for frame in data.chunks_exact(frame_bytes) {
        for (ch, s) in frame.chunks_exact(bytes_per_sample).enumerate() {
            let v = match (tag, bytes_per_sample) {
                (FORMAT_FLOAT, _) => f32::from_le_bytes([s[0], s[1], s[2], s[3]]),
                (_, 2) => f32::from(i16::from_le_bytes([s[0], s[1]])) / 32768.0,
                (_, 3) => (i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8) as f32 / 8_388_608.0,
                _ => (f64::from(i32::from_le_bytes([s[0], s[1], s[2], s[3]])) / 2_147_483_648.0) as f32,
            };
            out[ch].push(v);
        }
    }
    Ok(WavData { sample_rate, channels: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int16,
    Int24,
    Float32,
}

/// Encodes interleaved-by-channel audio. All channels must be equally long.
pub fn encode(wav: &WavData, format: SampleFormat) -> Vec<u8> {
    let channels = wav.channels.len() as u16;
    let (tag, bits) = match format {
        SampleFormat::Int16 => (FORMAT_PCM, 16u16),
        SampleFormat::Int24 => (FORMAT_PCM, 24),
        SampleFormat::Float32 => (FORMAT_FLOAT, 32),
    };
    let bps = u32::from(bits / 8);
    let block_align = u32::from(channels) * bps;
    let data_len = wav.frames() as u32 * block_align;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&wav.sample_rate.to_le_bytes());
    out.extend_from_slice(&(wav.sample_rate * block_align).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for i in 0..wav.frames() {
        for ch in &wav.channels {
            let v = ch[i].clamp(-1.0, 1.0);
            match format {
                SampleFormat::Int16 => out.extend_from_slice(&((v * 32767.0).round() as i16).to_le_bytes()),
                SampleFormat::Int24 => out.extend_from_slice(&((v * 8_388_607.0).round() as i32).to_le_bytes()[..3]),
                SampleFormat::Float32 => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    out
}

pub fn write_file(path: &std::path::Path, wav: &WavData, format: SampleFormat) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(wav, format))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(rate: u32, channels: usize, n: usize) -> WavData {
        let ch = (0..channels)
            .map(|c| (0..n).map(|i| (i as f32 * 0.01 + c as f32).sin() * 0.8).collect())
            .collect();
        WavData { sample_rate: rate, channels: ch }
    }

    #[test]
    fn round_trips_each_format() {
        let w = tone(48_000, 2, 500);
        for (fmt, tol) in [(SampleFormat::Int16, 1e-4), (SampleFormat::Int24, 1e-6), (SampleFormat::Float32, 0.0)] {
            let back = decode(&encode(&w, fmt)).unwrap();
            assert_eq!(back.sample_rate, 48_000);
            assert_eq!(back.channels.len(), 2);
            for (a, b) in back.channels.iter().flatten().zip(w.channels.iter().flatten()) {
                assert!((a - b).abs() <= tol, "{fmt:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_non_pcm_and_garbage() {
        let mut bytes = encode(&tone(44_100, 1, 10), SampleFormat::Int16);
        bytes[20] = 0x55; // MPEG layer 3 tag
        assert!(matches!(decode(&bytes), Err(WavError::Unsupported { tag: 0x55, .. })));
        assert_eq!(decode(b"OggS...."), Err(WavError::NotWave));
        let good = encode(&tone(44_100, 1, 10), SampleFormat::Int16);
        assert_eq!(decode(&good[..good.len() - 3]), Err(WavError::Truncated));
    }

    #[test]
    fn eight_bit_is_unsupported() {
        let mut bytes = encode(&tone(8_000, 1, 4), SampleFormat::Int16);
        bytes[34] = 8;
        assert!(matches!(decode(&bytes), Err(WavError::Unsupported { bits: 8, .. })));
    }
}
