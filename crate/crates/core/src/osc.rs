//! OSC 1.0 messages: big-endian numerics, NUL-terminated strings padded to
//! four bytes, and a `,`-prefixed type tag string. Bundles are not supported.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub enum OscArg {
    Int(i32),
    Float(f32),
    Str(String),
    Blob(Vec<u8>),
}

impl OscArg {
    pub fn tag(&self) -> u8 {
        match self {
            OscArg::Int(_) => b'i',
            OscArg::Float(_) => b'f',
            OscArg::Str(_) => b's',
            OscArg::Blob(_) => b'b',
        }
    }

    /// Numeric value of an `i` or `f` argument.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            OscArg::Int(i) => Some(f64::from(i)),
            OscArg::Float(f) => Some(f64::from(f)),
            _ => None,
        }
    }

    /// Integer value of an `i` argument, or of an `f` argument holding a
    /// whole number (dataflow hosts often send every number as a float).
    pub fn as_int(&self) -> Option<i32> {
        match *self {
            OscArg::Int(i) => Some(i),
            OscArg::Float(f) if f.is_finite() && libm::truncf(f) == f && f.abs() <= i32::MAX as f32 => Some(f as i32),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            OscArg::Str(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("address must start with '/'")]
    BadAddress,
    #[error("strings may not contain NUL")]
    InteriorNul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeErrorKind {
    Truncated,
    UnterminatedString,
    NonZeroPadding,
    InvalidUtf8,
    BadAddress,
    MissingTypeTags,
    UnsupportedTypeTag(u8),
    Bundle,
    TrailingBytes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("OSC decode error at byte {offset}: {kind:?}")]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

impl OscMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        Self { address: address.into(), args }
    }

    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        if !self.address.starts_with('/') {
            return Err(EncodeError::BadAddress);
        }
        let mut out = Vec::with_capacity(64);
        write_str(&mut out, &self.address)?;
        let mut tags = String::with_capacity(self.args.len() + 1);
        tags.push(',');
        tags.extend(self.args.iter().map(|a| a.tag() as char));
        write_str(&mut out, &tags)?;
        for arg in &self.args {
            match arg {
                OscArg::Int(i) => out.extend_from_slice(&i.to_be_bytes()),
                OscArg::Float(f) => out.extend_from_slice(&f.to_be_bytes()),
                OscArg::Str(s) => write_str(&mut out, s)?,
                OscArg::Blob(b) => {
                    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
                    out.extend_from_slice(b);
                    pad(&mut out);
                }
            }
        }
        Ok(out)
    }

    /// Decodes one message. The whole packet must be consumed; a truncated
    /// or padded-wrong packet never yields a partial message.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Cursor { bytes, pos: 0 };
        if bytes.starts_with(b"#bundle") {
            return Err(r.err(DecodeErrorKind::Bundle));
        }
        let address = r.string()?;
        if !address.starts_with('/') {
            return Err(DecodeError { offset: 0, kind: DecodeErrorKind::BadAddress });
        }
        let address = String::from(address);
        // A missing type tag string is rejected so a packet cut after the
        // address cannot pass as an argument-less message.
        let tag_start = r.pos;
        if tag_start == bytes.len() {
            return Err(r.err(DecodeErrorKind::MissingTypeTags));
        }
        let tags = r.string()?;
        let tags = tags
            .strip_prefix(',')
            .ok_or(DecodeError { offset: tag_start, kind: DecodeErrorKind::MissingTypeTags })?;
        let mut args = Vec::with_capacity(tags.len());
        for (i, t) in tags.bytes().enumerate() {
            let arg = match t {
                b'i' => OscArg::Int(i32::from_be_bytes(r.array()?)),
                b'f' => OscArg::Float(f32::from_be_bytes(r.array()?)),
                b's' => OscArg::Str(String::from(r.string()?)),
                b'b' => {
                    let len = u32::from_be_bytes(r.array()?) as usize;
                    let data = r.take(len)?.to_vec();
                    r.padding(len)?;
                    OscArg::Blob(data)
                }
                other => {
                    return Err(DecodeError { offset: tag_start + 1 + i, kind: DecodeErrorKind::UnsupportedTypeTag(other) })
                }
            };
            args.push(arg);
        }
        if r.pos != bytes.len() {
            return Err(r.err(DecodeErrorKind::TrailingBytes));
        }
        Ok(Self { address, args })
    }
}

fn pad(out: &mut Vec<u8>) {
    while !out.len().is_multiple_of(4) {
        out.push(0);
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) -> Result<(), EncodeError> {
    if s.as_bytes().contains(&0) {
        return Err(EncodeError::InteriorNul);
    }
    out.extend_from_slice(s.as_bytes());
    out.push(0);
    pad(out);
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: DecodeErrorKind) -> DecodeError {
        DecodeError { offset: self.pos, kind }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(self.err(DecodeErrorKind::Truncated))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array(&mut self) -> Result<[u8; 4], DecodeError> {
        let s = self.take(4)?;
        Ok([s[0], s[1], s[2], s[3]])
    }

    /// Consumes zero bytes up to the next 4-byte boundary after `len` bytes.
    fn padding(&mut self, len: usize) -> Result<(), DecodeError> {
        let n = (4 - len % 4) % 4;
        let start = self.pos;
        if self.take(n)?.iter().any(|&b| b != 0) {
            return Err(DecodeError { offset: start, kind: DecodeErrorKind::NonZeroPadding });
        }
        Ok(())
    }

    fn string(&mut self) -> Result<&'a str, DecodeError> {
        let start = self.pos;
        let rest = &self.bytes[start..];
        let nul = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or(DecodeError { offset: self.bytes.len(), kind: DecodeErrorKind::UnterminatedString })?;
        let s = core::str::from_utf8(&rest[..nul]).map_err(|_| DecodeError { offset: start, kind: DecodeErrorKind::InvalidUtf8 })?;
        self.pos = start + nul + 1;
        self.padding(nul + 1)?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn threshold_golden_bytes() {
        let msg = OscMessage::new("/seq/threshold", vec![OscArg::Float(0.5)]);
        let bytes = msg.encode().unwrap();
        let expected = [
            0x2F, 0x73, 0x65, 0x71, 0x2F, 0x74, 0x68, 0x72, 0x65, 0x73, 0x68, 0x6F, 0x6C, 0x64, 0x00, 0x00, 0x2C, 0x66,
            0x00, 0x00, 0x3F, 0x00, 0x00, 0x00,
        ];
        assert_eq!(bytes, expected);
        assert_eq!(OscMessage::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn string_and_blob_padding() {
        let msg = OscMessage::new("/a", vec![OscArg::Str("stop".into()), OscArg::Blob(vec![1, 2, 3, 4, 5])]);
        let bytes = msg.encode().unwrap();
        assert_eq!(bytes.len() % 4, 0);
        // "/a\0\0" ",sb\0" "stop\0\0\0\0" len(4) + 5 bytes + 3 pad
        assert_eq!(bytes.len(), 4 + 4 + 8 + 4 + 8);
        assert_eq!(OscMessage::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn truncations_are_errors() {
        let msg = OscMessage::new("/seq/latent", vec![OscArg::Float(0.25), OscArg::Float(-3.0)]);
        let bytes = msg.encode().unwrap();
        for n in 0..bytes.len() {
            assert!(OscMessage::decode(&bytes[..n]).is_err(), "prefix {n}");
        }
    }

    #[test]
    fn rejects_unknown_tag_and_bundles() {
        let mut bytes = OscMessage::new("/x", vec![OscArg::Int(1)]).encode().unwrap();
        bytes[5] = b'h';
        assert_eq!(OscMessage::decode(&bytes).unwrap_err().kind, DecodeErrorKind::UnsupportedTypeTag(b'h'));
        let err = OscMessage::decode(b"#bundle\0\0\0\0\0\0\0\0\x01").unwrap_err();
        assert_eq!(err.kind, DecodeErrorKind::Bundle);
    }

    #[test]
    fn encode_validates() {
        assert_eq!(OscMessage::new("seq", vec![]).encode(), Err(EncodeError::BadAddress));
        assert_eq!(OscMessage::new("/s", vec![OscArg::Str("a\0b".into())]).encode(), Err(EncodeError::InteriorNul));
    }

    #[test]
    fn numeric_coercion() {
        assert_eq!(OscArg::Float(8.0).as_int(), Some(8));
        assert_eq!(OscArg::Float(8.5).as_int(), None);
        assert_eq!(OscArg::Int(3).as_f64(), Some(3.0));
        assert_eq!(OscArg::Str("x".into()).as_f64(), None);
    }
}
