//! `serve`: the engine thread plus the OSC (UDP) and WebSocket (TCP)
//! transports around it.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use latentseq_core::control::Control;
use latentseq_core::engine::Engine;
use latentseq_core::osc::OscMessage;

use crate::bridge::{error_json, event_json, parse_client_message, snapshot_json, ModelInfo};
use crate::error::{Error, Result};
use crate::live::{spawn, Clock, Event, Hub, Live, LiveOptions, Mailbox, MidiSink, StateCell, Subscription};
use crate::ws::{self, Message, WsWriter};

const POLL: Duration = Duration::from_millis(50);
/// Frames buffered per WebSocket client before the oldest are dropped.
pub const CLIENT_QUEUE: usize = 256;
const OSC_QUEUE: usize = 1024;

type Sessions = Arc<Mutex<Vec<(TcpStream, JoinHandle<()>)>>>;

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Address to receive OSC on, and where to send outbound OSC.
    pub osc: Option<(SocketAddr, SocketAddr)>,
    pub websocket: Option<SocketAddr>,
    pub models: Vec<ModelInfo>,
    pub live: LiveOptions,
}

/// A running engine with its transports. Dropping it does not stop it; call
/// [`Server::shutdown`] and [`Server::join`].
pub struct Server {
    mailbox: Arc<Mailbox>,
    hub: Arc<Hub>,
    state: Arc<StateCell>,
    stop: Arc<AtomicBool>,
    engine: Option<JoinHandle<Engine>>,
    threads: Vec<JoinHandle<()>>,
    sessions: Sessions,
    osc_addr: Option<SocketAddr>,
    ws_addr: Option<SocketAddr>,
}

fn bind_err(what: &str, addr: SocketAddr, e: io::Error) -> Error {
    Error::Runtime(format!("cannot bind {what} on {addr}: {e}"))
}

impl Server {
    /// Binds every socket first, so a bind failure starts nothing.
    pub fn start<C, S>(engine: Engine, clock: C, sink: S, options: ServeOptions) -> Result<Self>
    where
        C: Clock + 'static,
        S: MidiSink + 'static,
    {
        let osc = match options.osc {
            Some((bind, target)) => {
                let sock = UdpSocket::bind(bind).map_err(|e| bind_err("OSC", bind, e))?;
                sock.set_read_timeout(Some(POLL)).map_err(|e| Error::Runtime(e.to_string()))?;
                Some((sock, target))
            }
            None => None,
        };
        let listener = match options.websocket {
            Some(addr) => {
                let l = TcpListener::bind(addr).map_err(|e| bind_err("WebSocket", addr, e))?;
                l.set_nonblocking(true).map_err(|e| Error::Runtime(e.to_string()))?;
                Some(l)
            }
            None => None,
        };

        let mailbox = Mailbox::new();
        let hub = Hub::new();
        let state = StateCell::new();
        let stop = Arc::new(AtomicBool::new(false));
        let mut server = Server {
            mailbox: Arc::clone(&mailbox),
            hub: Arc::clone(&hub),
            state: Arc::clone(&state),
            stop: Arc::clone(&stop),
            engine: None,
            threads: Vec::new(),
            sessions: Arc::new(Mutex::new(Vec::new())),
            osc_addr: None,
            ws_addr: None,
        };

        // subscribe before the engine publishes anything
        if let Some((sock, target)) = osc {
            server.osc_addr = sock.local_addr().ok();
            let out = sock.try_clone().map_err(|e| Error::Runtime(e.to_string()))?;
            let sub = hub.subscribe(OSC_QUEUE);
            server.threads.push(thread("osc-out", move || osc_out(out, target, sub)));
            let (mb, st) = (Arc::clone(&mailbox), Arc::clone(&stop));
            server.threads.push(thread("osc-in", move || osc_in(sock, mb, st)));
        }
        let live = Live::new(engine, clock, sink, Arc::clone(&mailbox), Arc::clone(&hub), Arc::clone(&state))
            .with_options(options.live);
        server.engine = Some(spawn(live));
        if let Some(listener) = listener {
            server.ws_addr = listener.local_addr().ok();
            let ctx = SessionContext { mailbox, hub, state, models: Arc::new(options.models) };
            let (st, sessions) = (Arc::clone(&stop), Arc::clone(&server.sessions));
            server.threads.push(thread("ws-accept", move || ws_accept(listener, ctx, st, sessions)));
        }
        Ok(server)
    }

    pub fn osc_addr(&self) -> Option<SocketAddr> {
        self.osc_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    pub fn mailbox(&self) -> &Arc<Mailbox> {
        &self.mailbox
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn state(&self) -> &Arc<StateCell> {
        &self.state
    }

    /// Queues a control as if it came from a transport.
    pub fn send(&self, control: Control) {
        self.mailbox.push(control, None);
    }

    /// True once the engine loop has exited (shutdown, or a step limit).
    pub fn is_finished(&self) -> bool {
        self.engine.as_ref().is_none_or(JoinHandle::is_finished)
    }

    /// Asks everything to stop. Sounding notes are closed by the engine.
    pub fn shutdown(&self) {
        self.stop.store(true, Ordering::SeqCst);
        self.mailbox.shutdown();
    }

    /// Waits for all threads and returns the engine in its final state.
    pub fn join(mut self) -> Result<Engine> {
        let engine = self.engine.take().map(JoinHandle::join);
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        let sessions: Vec<_> = self.sessions.lock().unwrap_or_else(|p| p.into_inner()).drain(..).collect();
        for (stream, handle) in sessions {
            let _ = stream.shutdown(std::net::Shutdown::Both);
            let _ = handle.join();
        }
        match engine {
            Some(Ok(e)) => Ok(e),
            _ => Err(Error::Runtime("engine thread panicked".into())),
        }
    }
}

fn thread(name: &str, f: impl FnOnce() + Send + 'static) -> JoinHandle<()> {
    std::thread::Builder::new().name(format!("latentseq-{name}")).spawn(f).expect("spawn thread")
}

fn osc_in(sock: UdpSocket, mailbox: Arc<Mailbox>, stop: Arc<AtomicBool>) {
    let mut buf = vec![0u8; 65_536];
    while !stop.load(Ordering::SeqCst) {
        let (n, from) = match sock.recv_from(&mut buf) {
            Ok(r) => r,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) => {
                log::warn!("OSC receive failed: {e}");
                continue;
            }
        };
        let msg = match OscMessage::decode(&buf[..n]) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("ignoring malformed OSC packet from {from}: {e}");
                continue;
            }
        };
        match Control::from_osc(&msg) {
            Ok(c) => mailbox.push(c, None),
            Err(e) => log::warn!("ignoring OSC {} from {from}: {e}", msg.address),
        }
    }
}

fn osc_out(sock: UdpSocket, target: SocketAddr, sub: Subscription) {
    while let Ok(event) = sub.recv_timeout(POLL) {
        let Some(Event::Outbound(o)) = event else { continue };
        match o.to_osc().encode() {
            Ok(bytes) => {
                if let Err(e) = sock.send_to(&bytes, target) {
                    log::debug!("OSC send to {target} failed: {e}");
                }
            }
            Err(e) => log::error!("cannot encode outbound OSC: {e}"),
        }
    }
}

#[derive(Clone)]
struct SessionContext {
    mailbox: Arc<Mailbox>,
    hub: Arc<Hub>,
    state: Arc<StateCell>,
    models: Arc<Vec<ModelInfo>>,
}

fn ws_accept(listener: TcpListener, ctx: SessionContext, stop: Arc<AtomicBool>, sessions: Sessions) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_nodelay(true);
                let Ok(handle_stream) = stream.try_clone() else { continue };
                let ctx = ctx.clone();
                let handle = thread("ws-session", move || {
                    if let Err(e) = session(stream, ctx) {
                        log::debug!("WebSocket session {peer} ended: {e}");
                    }
                });
                let mut s = sessions.lock().unwrap_or_else(|p| p.into_inner());
                s.retain(|(_, h)| !h.is_finished());
                s.push((handle_stream, handle));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL / 5),
            Err(e) => {
                log::warn!("WebSocket accept failed: {e}");
                std::thread::sleep(POLL);
            }
        }
    }
}

fn send_json(writer: &Mutex<WsWriter>, value: &serde_json::Value) -> io::Result<()> {
    writer.lock().unwrap_or_else(|p| p.into_inner()).send_text(&value.to_string())
}

fn session(stream: TcpStream, ctx: SessionContext) -> io::Result<()> {
    let (mut reader, writer, _path) = ws::accept(stream)?;
    let writer = Arc::new(Mutex::new(writer));
    let sub = ctx.hub.subscribe(CLIENT_QUEUE);
    let client = sub.id();
    if let Some((state, latest)) = ctx.state.get() {
        send_json(&writer, &snapshot_json(&ctx.models, &state, &latest))?;
    }
    let pump_writer = Arc::clone(&writer);
    let done = Arc::new(AtomicBool::new(false));
    let pump_done = Arc::clone(&done);
    let pump = thread("ws-writer", move || {
        while let Ok(event) = sub.recv_timeout(POLL) {
            if pump_done.load(Ordering::SeqCst) {
                break;
            }
            if let Some(event) = event {
                if send_json(&pump_writer, &event_json(&event)).is_err() {
                    break;
                }
            }
        }
        // hub closed (shutdown) or the client went away
        let mut w = pump_writer.lock().unwrap_or_else(|p| p.into_inner());
        let _ = w.send(&Message::Close(Some(1001)));
        let _ = w.get_ref().shutdown(std::net::Shutdown::Both);
    });
    let result = loop {
        match reader.read_message() {
            Ok(Message::Text(text)) => match parse_client_message(&text) {
                Ok(control) => ctx.mailbox.push(control, Some(client)),
                Err(message) => {
                    log::debug!("client {client}: {message}");
                    send_json(&writer, &error_json(&message))?;
                }
            },
            Ok(Message::Binary(_)) => send_json(&writer, &error_json("binary frames are not supported"))?,
            Ok(Message::Ping(p)) => writer.lock().unwrap_or_else(|p| p.into_inner()).send(&Message::Pong(p))?,
            Ok(Message::Pong(_)) => {}
            Ok(Message::Close(_)) => {
                let _ = writer.lock().unwrap_or_else(|p| p.into_inner()).send(&Message::Close(Some(1000)));
                break Ok(());
            }
            Err(e) => break Err(e),
        }
    };
    done.store(true, Ordering::SeqCst);
    let _ = reader.get_ref().shutdown(std::net::Shutdown::Both);
    let _ = pump.join();
    result
}
