//! Minimal RFC 6455 WebSocket: the server handshake, a client handshake for
//! tests and tools, and message framing over a plain `TcpStream`.
//!
//! Reading and writing are split so one thread can block on reads while
//! another writes. Fragmented messages are reassembled; control frames are
//! returned to the caller as they arrive.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;

const GUID: &str = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
const MAX_HEADER: usize = 8 * 1024;
/// Largest accepted message, after reassembly.
pub const MAX_MESSAGE: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Text(String),
    Binary(Vec<u8>),
    Ping(Vec<u8>),
    Pong(Vec<u8>),
    Close(Option<u16>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Server,
    Client,
}

pub fn accept_key(key: &str) -> String {
    let digest = ring::digest::digest(&ring::digest::SHA1_FOR_LEGACY_USE_ONLY, format!("{key}{GUID}").as_bytes());
    B64.encode(digest.as_ref())
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_head(reader: &mut impl BufRead) -> io::Result<Vec<String>> {
    let mut lines = Vec::new();
    let mut total = 0;
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed during handshake"));
        }
        total += n;
        if total > MAX_HEADER {
            return Err(bad("handshake header too large"));
        }
        let line = line.trim_end_matches(['\r', '\n']).to_string();
        if line.is_empty() {
            return Ok(lines);
        }
        lines.push(line);
    }
}

fn header<'a>(lines: &'a [String], name: &str) -> Option<&'a str> {
    lines.iter().skip(1).find_map(|l| {
        let (k, v) = l.split_once(':')?;
        k.trim().eq_ignore_ascii_case(name).then(|| v.trim())
    })
}

fn has_token(value: Option<&str>, token: &str) -> bool {
    value.is_some_and(|v| v.split(',').any(|t| t.trim().eq_ignore_ascii_case(token)))
}

/// Server half: performs the handshake on an accepted connection. Returns
/// the split connection and the request path. A request that is not a valid
/// upgrade gets a `400` response and an error.
pub fn accept(stream: TcpStream) -> io::Result<(WsReader, WsWriter, String)> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut out = stream;
    let lines = read_head(&mut reader)?;
    let request = lines.first().map(String::as_str).unwrap_or("");
    let mut parts = request.split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/").to_string());
    let key = header(&lines, "sec-websocket-key");
    let ok = method == "GET"
        && has_token(header(&lines, "upgrade"), "websocket")
        && has_token(header(&lines, "connection"), "upgrade")
        && header(&lines, "sec-websocket-version") == Some("13")
        && key.is_some();
    if !ok {
        let body = "expected a WebSocket upgrade request\n";
        let _ = write!(
            out,
            "HTTP/1.1 400 Bad Request\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        return Err(bad("not a WebSocket upgrade request"));
    }
    write!(
        out,
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: {}\r\n\r\n",
        accept_key(key.unwrap_or_default())
    )?;
    out.flush()?;
    Ok((WsReader::new(reader, Role::Server), WsWriter::new(out, Role::Client), path))
}

/// Client half: connects and performs the handshake.
pub fn connect(addr: impl ToSocketAddrs, path: &str) -> io::Result<(WsReader, WsWriter)> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    let host = stream.peer_addr()?;
    let mut nonce = [0u8; 16];
    fill_pseudo_random(&mut nonce);
    let key = B64.encode(nonce);
    let mut out = stream.try_clone()?;
    write!(
        out,
        "GET {path} HTTP/1.1\r\nHost: {host}\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
    )?;
    out.flush()?;
    let mut reader = BufReader::new(stream);
    let lines = read_head(&mut reader)?;
    let status_ok = lines.first().is_some_and(|l| l.split_whitespace().nth(1) == Some("101"));
    if !status_ok || header(&lines, "sec-websocket-accept") != Some(accept_key(&key).as_str()) {
        return Err(bad(format!("handshake rejected: {}", lines.first().map_or("", String::as_str))));
    }
    Ok((WsReader::new(reader, Role::Client), WsWriter::new(out, Role::Server)))
}

/// Masking keys only need to be unpredictable to intermediaries, not secure.
fn fill_pseudo_random(buf: &mut [u8]) {
    use std::hash::{BuildHasher, Hasher};
    for chunk in buf.chunks_mut(8) {
        let mut h = std::collections::hash_map::RandomState::new().build_hasher();
        h.write_u64(chunk.len() as u64);
        let v = h.finish().to_le_bytes();
        chunk.copy_from_slice(&v[..chunk.len()]);
    }
}

pub struct WsReader {
    inner: BufReader<TcpStream>,
    /// Whose frames we read: a server reads masked client frames.
    role: Role,
    /// A fragmented message in progress; control frames may interleave.
    partial: Option<(u8, Vec<u8>)>,
}

struct Frame {
    fin: bool,
    opcode: u8,
    payload: Vec<u8>,
}

impl WsReader {
    fn new(inner: BufReader<TcpStream>, role: Role) -> Self {
        Self { inner, role, partial: None }
    }

    pub fn get_ref(&self) -> &TcpStream {
        self.inner.get_ref()
    }

    fn read_frame(&mut self) -> io::Result<Frame> {
        let mut head = [0u8; 2];
        self.inner.read_exact(&mut head)?;
        let fin = head[0] & 0x80 != 0;
        if head[0] & 0x70 != 0 {
            return Err(bad("reserved bits set"));
        }
        let opcode = head[0] & 0x0f;
        let masked = head[1] & 0x80 != 0;
        if masked != (self.role == Role::Server) {
            return Err(bad(if masked { "server frames must not be masked" } else { "client frames must be masked" }));
        }
        let len = match head[1] & 0x7f {
            126 => {
                let mut b = [0u8; 2];
                self.inner.read_exact(&mut b)?;
                u64::from(u16::from_be_bytes(b))
            }
            127 => {
                let mut b = [0u8; 8];
                self.inner.read_exact(&mut b)?;
                u64::from_be_bytes(b)
            }
            n => u64::from(n),
        };
        if opcode >= 8 && (!fin || len > 125) {
            return Err(bad("invalid control frame"));
        }
        if len > MAX_MESSAGE as u64 {
            return Err(bad("frame too large"));
        }
        let mut key = [0u8; 4];
        if masked {
            self.inner.read_exact(&mut key)?;
        }
        let mut payload = vec![0u8; len as usize];
        self.inner.read_exact(&mut payload)?;
        if masked {
            payload.iter_mut().enumerate().for_each(|(i, b)| *b ^= key[i % 4]);
        }
        Ok(Frame { fin, opcode, payload })
    }

    /// Next complete message. Errors on protocol violations and EOF.
    pub fn read_message(&mut self) -> io::Result<Message> {
        loop {
            let f = self.read_frame()?;
            match f.opcode {
                0x8 => {
                    let code = (f.payload.len() >= 2).then(|| u16::from_be_bytes([f.payload[0], f.payload[1]]));
                    return Ok(Message::Close(code));
                }
                0x9 => return Ok(Message::Ping(f.payload)),
                0xA => return Ok(Message::Pong(f.payload)),
                0x1 | 0x2 if self.partial.is_none() => {
                    if f.fin {
                        return finish(f.opcode, f.payload);
                    }
                    self.partial = Some((f.opcode, f.payload));
                }
                0x0 => {
                    let Some((op, mut buf)) = self.partial.take() else {
                        return Err(bad("continuation without a message"));
                    };
                    if buf.len() + f.payload.len() > MAX_MESSAGE {
                        return Err(bad("message too large"));
                    }
                    buf.extend_from_slice(&f.payload);
                    if f.fin {
                        return finish(op, buf);
                    }
                    self.partial = Some((op, buf));
                }
                0x1 | 0x2 => return Err(bad("new message inside a fragmented one")),
                op => return Err(bad(format!("unknown opcode {op:#x}"))),
            }
        }
    }
}

fn finish(opcode: u8, payload: Vec<u8>) -> io::Result<Message> {
    if opcode == 0x1 {
        String::from_utf8(payload).map(Message::Text).map_err(|_| bad("text frame is not UTF-8"))
    } else {
        Ok(Message::Binary(payload))
    }
}

pub struct WsWriter {
    out: TcpStream,
    /// Whose frames we write: a client must mask.
    role: Role,
}

impl WsWriter {
    fn new(out: TcpStream, reader_role: Role) -> Self {
        // the writer's peer reads with the opposite role
        let role = if reader_role == Role::Client { Role::Server } else { Role::Client };
        Self { out, role }
    }

    pub fn get_ref(&self) -> &TcpStream {
        &self.out
    }

    /// Writes one frame with the given FIN bit and opcode.
    pub fn write_frame(&mut self, fin: bool, opcode: u8, payload: &[u8]) -> io::Result<()> {
        let mut buf = Vec::with_capacity(payload.len() + 14);
        buf.push(if fin { 0x80 } else { 0 } | opcode);
        let mask_bit = if self.role == Role::Client { 0x80 } else { 0 };
        match payload.len() {
            n @ 0..=125 => buf.push(mask_bit | n as u8),
            n @ 126..=0xffff => {
                buf.push(mask_bit | 126);
                buf.extend_from_slice(&(n as u16).to_be_bytes());
            }
            n => {
                buf.push(mask_bit | 127);
                buf.extend_from_slice(&(n as u64).to_be_bytes());
            }
        }
        if self.role == Role::Client {
            let mut key = [0u8; 4];
            fill_pseudo_random(&mut key);
            buf.extend_from_slice(&key);
            buf.extend(payload.iter().enumerate().map(|(i, b)| b ^ key[i % 4]));
        } else {
            buf.extend_from_slice(payload);
        }
        self.out.write_all(&buf)
    }

    pub fn send(&mut self, msg: &Message) -> io::Result<()> {
        match msg {
            Message::Text(t) => self.write_frame(true, 0x1, t.as_bytes()),
            Message::Binary(b) => self.write_frame(true, 0x2, b),
            Message::Ping(p) => self.write_frame(true, 0x9, p),
            Message::Pong(p) => self.write_frame(true, 0xA, p),
            Message::Close(code) => {
                let payload = code.map(u16::to_be_bytes);
                self.write_frame(true, 0x8, payload.as_ref().map_or(&[][..], |p| &p[..]))
            }
        }
    }

    pub fn send_text(&mut self, text: &str) -> io::Result<()> {
        self.write_frame(true, 0x1, text.as_bytes())
    }
}
