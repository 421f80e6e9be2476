//! The live engine loop: one thread owns the [`Engine`], applies controls
//! from a [`Mailbox`], drives the sequencer from a [`Clock`], writes notes to
//! a [`MidiSink`] and publishes results on a [`Hub`].
//!
//! Network threads never touch the engine. They push validated controls into
//! the mailbox, where latent and threshold updates coalesce latest-wins, and
//! read results from the hub, where slow readers lose their oldest frames.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use latentseq_core::control::{Control, Outbound};
use latentseq_core::engine::{Engine, EngineState};
use latentseq_core::generator::GenerationResult;
use latentseq_core::sequencer::MidiEvent;
use latentseq_core::smf::NoteKind;

use crate::error::{Error, Result};

/// Identifies the client a control came from, so errors go back to it only.
pub type ClientId = u64;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Default)]
struct Inbox {
    queue: VecDeque<(Control, Option<ClientId>)>,
    shutdown: bool,
    coalesced: u64,
}

/// Single-consumer control queue.
#[derive(Default)]
pub struct Mailbox {
    inbox: Mutex<Inbox>,
    ready: Condvar,
}

fn same_kind(a: &Control, b: &Control) -> bool {
    matches!((a, b), (Control::Latent { .. }, Control::Latent { .. }) | (Control::Threshold(_), Control::Threshold(_)))
}

impl Mailbox {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Queues a control. A latent or threshold update replaces one of the
    /// same kind that has not been applied yet.
    pub fn push(&self, control: Control, origin: Option<ClientId>) {
        let mut inbox = lock(&self.inbox);
        if let Some(slot) = inbox.queue.iter_mut().find(|(c, _)| same_kind(c, &control)) {
            *slot = (control, origin);
            inbox.coalesced += 1;
        } else {
            inbox.queue.push_back((control, origin));
        }
        drop(inbox);
        self.ready.notify_one();
    }

    pub fn shutdown(&self) {
        lock(&self.inbox).shutdown = true;
        self.ready.notify_all();
    }

    pub fn is_shutdown(&self) -> bool {
        lock(&self.inbox).shutdown
    }

    /// Number of updates that were replaced before being applied.
    pub fn coalesced(&self) -> u64 {
        lock(&self.inbox).coalesced
    }

    pub fn has_work(&self) -> bool {
        let inbox = lock(&self.inbox);
        inbox.shutdown || !inbox.queue.is_empty()
    }

    fn drain(&self) -> Vec<(Control, Option<ClientId>)> {
        lock(&self.inbox).queue.drain(..).collect()
    }

    /// Blocks until there is work or `timeout` elapses (forever if `None`).
    pub fn wait_for_work(&self, timeout: Option<Duration>) {
        let inbox = lock(&self.inbox);
        let idle = |i: &mut Inbox| !i.shutdown && i.queue.is_empty();
        match timeout {
            None => drop(self.ready.wait_while(inbox, idle).unwrap_or_else(|p| p.into_inner())),
            Some(t) => drop(self.ready.wait_timeout_while(inbox, t, idle).unwrap_or_else(|p| p.into_inner())),
        }
    }
}

/// Something published by the engine loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Outbound(Outbound),
    /// Fresh results for every loaded model.
    Ensemble(BTreeMap<String, GenerationResult>),
    State(EngineState),
    /// A control from `client` was rejected by the engine.
    Error { client: ClientId, message: String },
}

struct SubQueue {
    events: VecDeque<Event>,
    closed: bool,
    dropped: u64,
}

struct Subscriber {
    id: ClientId,
    queue: Mutex<SubQueue>,
    ready: Condvar,
    capacity: usize,
}

/// Fan-out of engine events with a bounded queue per subscriber. A full
/// queue drops its oldest event, so publishing never blocks and order is
/// preserved per subscriber.
#[derive(Default)]
pub struct Hub {
    subscribers: Mutex<Vec<Arc<Subscriber>>>,
    next_id: AtomicU64,
}

pub struct Subscription {
    hub: Arc<Hub>,
    sub: Arc<Subscriber>,
}

impl Hub {
    pub fn new() -> Arc<Self> {
        Arc::new(Self { subscribers: Mutex::new(Vec::new()), next_id: AtomicU64::new(1) })
    }

    /// Allocates a client id without subscribing.
    pub fn next_client_id(&self) -> ClientId {
        self.next_id.fetch_add(1, Ordering::Relaxed)
    }

    pub fn subscribe(self: &Arc<Self>, capacity: usize) -> Subscription {
        let id = self.next_client_id();
        self.subscribe_as(id, capacity)
    }

    pub fn subscribe_as(self: &Arc<Self>, id: ClientId, capacity: usize) -> Subscription {
        let sub = Arc::new(Subscriber {
            id,
            queue: Mutex::new(SubQueue { events: VecDeque::new(), closed: false, dropped: 0 }),
            ready: Condvar::new(),
            capacity: capacity.max(1),
        });
        lock(&self.subscribers).push(Arc::clone(&sub));
        Subscription { hub: Arc::clone(self), sub }
    }

    pub fn subscriber_count(&self) -> usize {
        lock(&self.subscribers).len()
    }

    pub fn publish(&self, event: &Event) {
        for sub in lock(&self.subscribers).iter() {
            if let Event::Error { client, .. } = event {
                if *client != sub.id {
                    continue;
                }
            }
            let mut q = lock(&sub.queue);
            if q.events.len() == sub.capacity {
                q.events.pop_front();
                q.dropped += 1;
            }
            q.events.push_back(event.clone());
            drop(q);
            sub.ready.notify_one();
        }
    }

    /// Wakes every subscriber with end-of-stream.
    pub fn close(&self) {
        for sub in lock(&self.subscribers).drain(..) {
            lock(&sub.queue).closed = true;
            sub.ready.notify_all();
        }
    }
}

impl Subscription {
    pub fn id(&self) -> ClientId {
        self.sub.id
    }

    /// Next event, waiting up to `timeout`. `Err(())` means the hub closed.
    #[allow(clippy::result_unit_err)]
    pub fn recv_timeout(&self, timeout: Duration) -> std::result::Result<Option<Event>, ()> {
        let q = lock(&self.sub.queue);
        let (mut q, _) = self
            .sub
            .ready
            .wait_timeout_while(q, timeout, |q| q.events.is_empty() && !q.closed)
            .unwrap_or_else(|p| p.into_inner());
        match q.events.pop_front() {
            Some(e) => Ok(Some(e)),
            None if q.closed => Err(()),
            None => Ok(None),
        }
    }

    /// Drains everything queued right now.
    pub fn try_drain(&self) -> Vec<Event> {
        lock(&self.sub.queue).events.drain(..).collect()
    }

    pub fn dropped(&self) -> u64 {
        lock(&self.sub.queue).dropped
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        lock(&self.hub.subscribers).retain(|s| !Arc::ptr_eq(s, &self.sub));
    }
}

/// Time source for the engine loop, measured from an arbitrary origin.
pub trait Clock: Send {
    fn now(&self) -> Duration;
    /// Returns once `deadline` has passed or the mailbox has work; with no
    /// deadline, waits for work only. May return early.
    fn wait(&self, mailbox: &Mailbox, deadline: Option<Duration>);
}

/// Wall-clock time. Sleeps on the mailbox condvar and spins through the last
/// millisecond before a deadline for accurate step timing; controls arriving
/// during the spin wait until the tick has fired.
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    const SPIN: Duration = Duration::from_millis(1);

    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn wait(&self, mailbox: &Mailbox, deadline: Option<Duration>) {
        let Some(deadline) = deadline else {
            return mailbox.wait_for_work(None);
        };
        let remaining = deadline.saturating_sub(self.now());
        if remaining > Self::SPIN {
            mailbox.wait_for_work(Some(remaining - Self::SPIN));
            return;
        }
        while self.now() < deadline {
            std::hint::spin_loop();
        }
    }
}

/// Simulated time: waiting for a deadline jumps straight to it, so a whole
/// live run executes instantly and deterministically.
#[derive(Default)]
pub struct SimulatedClock {
    now: Mutex<Duration>,
}

impl SimulatedClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> Duration {
        *lock(&self.now)
    }

    fn wait(&self, mailbox: &Mailbox, deadline: Option<Duration>) {
        if mailbox.has_work() {
            return;
        }
        match deadline {
            Some(d) => {
                let mut now = lock(&self.now);
                *now = (*now).max(d);
            }
            None => mailbox.wait_for_work(None),
        }
    }
}

/// Destination for live note events. `at` is the clock time of sending.
pub trait MidiSink: Send {
    fn send(&mut self, event: &MidiEvent, at: Duration);
}

impl MidiSink for Box<dyn MidiSink> {
    fn send(&mut self, event: &MidiEvent, at: Duration) {
        (**self).send(event, at);
    }
}

/// Discards everything (events still reach the debug log).
pub struct NullSink;

impl MidiSink for NullSink {
    fn send(&mut self, event: &MidiEvent, at: Duration) {
        log::debug!("midi {:?} note {} vel {} at {:?}", event.kind, event.note, event.velocity, at);
    }
}

/// Records events in memory; clones share one buffer.
#[derive(Clone, Default)]
pub struct CaptureSink {
    events: Arc<Mutex<Vec<(MidiEvent, Duration)>>>,
}

impl CaptureSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<(MidiEvent, Duration)> {
        lock(&self.events).clone()
    }
}

impl MidiSink for CaptureSink {
    fn send(&mut self, event: &MidiEvent, at: Duration) {
        lock(&self.events).push((*event, at));
    }
}

/// Writes raw MIDI bytes to a device node such as `/dev/snd/midiC1D0`
/// (or a virtual MIDI port, or a FIFO read by another program).
pub struct RawMidiSink {
    path: PathBuf,
    out: File,
    status_channel: u8,
}

impl RawMidiSink {
    /// `channel` is 1–16.
    pub fn open(path: &Path, channel: u8) -> Result<Self> {
        if !(1..=16).contains(&channel) {
            return Err(Error::Input(format!("MIDI channel must be 1-16, got {channel}")));
        }
        let out = std::fs::OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), out, status_channel: channel - 1 })
    }

    pub fn encode(event: &MidiEvent, channel0: u8) -> [u8; 3] {
        match event.kind {
            NoteKind::On => [0x90 | channel0, event.note & 0x7f, event.velocity & 0x7f],
            NoteKind::Off => [0x80 | channel0, event.note & 0x7f, 0],
        }
    }
}

impl MidiSink for RawMidiSink {
    fn send(&mut self, event: &MidiEvent, _at: Duration) {
        let bytes = Self::encode(event, self.status_channel);
        if let Err(e) = self.out.write_all(&bytes).and_then(|()| self.out.flush()) {
            log::error!("MIDI write to {} failed: {e}", self.path.display());
        }
    }
}

/// Engine state readable from other threads, refreshed by the loop.
#[derive(Default)]
pub struct StateCell {
    inner: Mutex<Option<(EngineState, BTreeMap<String, GenerationResult>)>>,
}

impl StateCell {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn get(&self) -> Option<(EngineState, BTreeMap<String, GenerationResult>)> {
        lock(&self.inner).clone()
    }

    fn set(&self, engine: &Engine) {
        *lock(&self.inner) = Some((engine.state(), engine.latest().clone()));
    }

    fn set_playhead(&self, playhead: usize) {
        if let Some((state, _)) = lock(&self.inner).as_mut() {
            state.playhead = playhead;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Tick,
    Gate,
}

#[derive(Debug, Clone, Default)]
pub struct LiveOptions {
    /// Shut down after this many steps have played (ticked and gated).
    pub stop_after_steps: Option<u64>,
}

/// The engine loop. Construct, then [`Live::run`] on its own thread (or call
/// [`spawn`]).
pub struct Live<C: Clock, S: MidiSink> {
    engine: Engine,
    clock: C,
    sink: S,
    mailbox: Arc<Mailbox>,
    hub: Arc<Hub>,
    state: Arc<StateCell>,
    options: LiveOptions,
    next: Option<(Duration, Phase)>,
    step_started: Duration,
    step_len: Duration,
    steps_done: u64,
}

impl<C: Clock, S: MidiSink> Live<C, S> {
    pub fn new(engine: Engine, clock: C, sink: S, mailbox: Arc<Mailbox>, hub: Arc<Hub>, state: Arc<StateCell>) -> Self {
        state.set(&engine);
        Self {
            engine,
            clock,
            sink,
            mailbox,
            hub,
            state,
            options: LiveOptions::default(),
            next: None,
            step_started: Duration::ZERO,
            step_len: Duration::ZERO,
            steps_done: 0,
        }
    }

    pub fn with_options(mut self, options: LiveOptions) -> Self {
        self.options = options;
        self
    }

    fn emit(&mut self, events: &[MidiEvent]) {
        let at = self.clock.now();
        for e in events {
            self.sink.send(e, at);
        }
    }

    fn apply(&mut self, control: &Control, origin: Option<ClientId>) {
        let was_running = self.engine.sequencer().is_running();
        match self.engine.apply(control) {
            Ok(applied) => {
                self.emit(&applied.midi);
                for o in applied.outbound {
                    self.hub.publish(&Event::Outbound(o));
                }
                if let Some(results) = applied.generated {
                    self.hub.publish(&Event::Ensemble(results));
                }
                self.state.set(&self.engine);
                self.hub.publish(&Event::State(self.engine.state()));
                let running = self.engine.sequencer().is_running();
                if matches!(control, Control::Transport(_)) {
                    // start (or restart) plays step 0 immediately
                    self.next = running.then(|| (self.clock.now(), Phase::Tick));
                    self.steps_done = 0;
                } else if was_running && !running {
                    self.next = None;
                }
            }
            Err(e) => {
                log::warn!("rejected {} control: {e}", control.address());
                if let Some(client) = origin {
                    self.hub.publish(&Event::Error { client, message: e.to_string() });
                }
            }
        }
    }

    fn fire(&mut self, at: Duration, phase: Phase) {
        match phase {
            Phase::Tick => {
                self.step_started = at;
                self.step_len = Duration::from_secs_f64(self.engine.sequencer().step_seconds());
                let (events, playhead) = self.engine.tick();
                self.emit(&events);
                if let Some(Outbound::Playhead(p)) = playhead {
                    self.state.set_playhead(usize::from(p));
                    self.hub.publish(&Event::Outbound(Outbound::Playhead(p)));
                }
                self.next = Some((at + self.step_len / 2, Phase::Gate));
            }
            Phase::Gate => {
                let off: Vec<_> = self.engine.gate().into_iter().collect();
                self.emit(&off);
                self.steps_done += 1;
                if self.options.stop_after_steps.is_some_and(|n| self.steps_done >= n) {
                    self.mailbox.shutdown();
                    self.next = None;
                } else {
                    self.next = Some((self.step_started + self.step_len, Phase::Tick));
                }
            }
        }
    }

    /// Runs until the mailbox is shut down, then closes any sounding note,
    /// closes the hub and returns the engine.
    pub fn run(mut self) -> Engine {
        loop {
            // A due tick fires before queued controls are applied, so a
            // control flood cannot push a note off the grid.
            if let Some((at, phase)) = self.next {
                if self.clock.now() >= at && !self.mailbox.is_shutdown() {
                    self.fire(at, phase);
                    continue;
                }
            }
            for (control, origin) in self.mailbox.drain() {
                self.apply(&control, origin);
            }
            if self.mailbox.is_shutdown() {
                break;
            }
            if let Some((at, _)) = self.next {
                if self.clock.now() >= at {
                    continue;
                }
            }
            self.clock.wait(&self.mailbox, self.next.map(|(t, _)| t));
        }
        let off = self.engine.shutdown();
        self.emit(&off);
        self.state.set(&self.engine);
        self.hub.close();
        self.engine
    }
}

/// Runs a [`Live`] loop on a dedicated thread.
pub fn spawn<C, S>(live: Live<C, S>) -> JoinHandle<Engine>
where
    C: Clock + 'static,
    S: MidiSink + 'static,
{
    std::thread::Builder::new()
        .name("latentseq-engine".into())
        .spawn(move || live.run())
        .expect("spawn engine thread")
}

#[cfg(test)]
mod tests {
    use super::*;
    use latentseq_core::control::Transport;
    use latentseq_core::generator::Ensemble;
    use latentseq_core::nn::{Architecture, Autoencoder};
    use latentseq_core::TimeBase;

    fn engine() -> Engine {
        let mut ens = Ensemble::new();
        ens.insert("zero", Autoencoder::zeros(Architecture::Prototype).split().1);
        Engine::new(ens, None, TimeBase::default()).unwrap()
    }

    #[test]
    fn latent_updates_coalesce_in_place() {
        let mb = Mailbox::new();
        mb.push(Control::Latent { x: 1.0, y: 1.0 }, None);
        mb.push(Control::Length(4), None);
        mb.push(Control::Latent { x: 2.0, y: 3.0 }, Some(5));
        let got = mb.drain();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0], (Control::Latent { x: 2.0, y: 3.0 }, Some(5)));
        assert_eq!(mb.coalesced(), 1);
    }

    #[test]
    fn hub_drops_oldest_and_routes_errors() {
        let hub = Hub::new();
        let a = hub.subscribe(2);
        let b = hub.subscribe(8);
        for p in 0..5 {
            hub.publish(&Event::Outbound(Outbound::Playhead(p)));
        }
        hub.publish(&Event::Error { client: b.id(), message: "x".into() });
        let got_a = a.try_drain();
        assert_eq!(got_a, vec![Event::Outbound(Outbound::Playhead(3)), Event::Outbound(Outbound::Playhead(4))]);
        assert_eq!(a.dropped(), 3);
        assert_eq!(b.try_drain().len(), 6);
        drop(a);
        assert_eq!(hub.subscriber_count(), 1);
        hub.close();
        assert_eq!(b.recv_timeout(Duration::from_millis(1)), Err(()));
    }

    #[test]
    fn simulated_run_is_on_the_ideal_grid() {
        let mb = Mailbox::new();
        let hub = Hub::new();
        let sink = CaptureSink::new();
        mb.push(Control::Transport(Transport::Start), None);
        let live = Live::new(engine(), SimulatedClock::new(), sink.clone(), Arc::clone(&mb), hub, StateCell::new())
            .with_options(LiveOptions { stop_after_steps: Some(4) });
        live.run();
        let ev = sink.events();
        // all-ones pattern: on/off per step
        assert_eq!(ev.len(), 8);
        for (i, (e, at)) in ev.iter().enumerate() {
            let expect_ms = (i / 2) as u64 * 125 + (i % 2) as u64 * 62;
            assert!(at.as_micros() / 1000 == u128::from(expect_ms), "{i}: {e:?} at {at:?}");
        }
    }

    #[test]
    fn raw_sink_bytes() {
        let on = MidiEvent { tick: 0, kind: NoteKind::On, note: 60, velocity: 100 };
        let off = MidiEvent { kind: NoteKind::Off, velocity: 0, ..on };
        assert_eq!(RawMidiSink::encode(&on, 9), [0x99, 60, 100]);
        assert_eq!(RawMidiSink::encode(&off, 0), [0x80, 60, 0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("midi");
        std::fs::write(&p, b"").unwrap();
        let mut sink = RawMidiSink::open(&p, 1).unwrap();
        sink.send(&on, Duration::ZERO);
        sink.send(&off, Duration::ZERO);
        assert_eq!(std::fs::read(&p).unwrap(), [0x90, 60, 100, 0x80, 60, 0]);
    }
}
