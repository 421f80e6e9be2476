mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{constant_decoder, four_on_the_floor, paired};
use latentseq::live::{CaptureSink, Hub, Live, LiveOptions, Mailbox, MonotonicClock, SimulatedClock, StateCell};
use latentseq_core::control::{Control, Transport};
use latentseq_core::engine::Engine;
use latentseq_core::generator::Ensemble;
use latentseq_core::smf::{write_smf, NoteKind};
use latentseq_core::{ManyHotPattern, TimeBase};

fn engine_with(pattern: &ManyHotPattern, tb: TimeBase) -> Engine {
    let mut ens = Ensemble::new();
    ens.insert("fixed", constant_decoder(pattern));
    Engine::new(ens, None, tb).unwrap()
}

fn run_simulated(engine: Engine, steps: u64, controls: &[Control]) -> Vec<(latentseq_core::sequencer::MidiEvent, Duration)> {
    let mailbox = Mailbox::new();
    for c in controls {
        mailbox.push(c.clone(), None);
    }
    mailbox.push(Control::Transport(Transport::Start), None);
    let sink = CaptureSink::new();
    Live::new(engine, SimulatedClock::new(), sink.clone(), mailbox, Hub::new(), StateCell::new())
        .with_options(LiveOptions { stop_after_steps: Some(steps) })
        .run();
    sink.events()
}

#[test]
fn simulated_live_trace_equals_offline_render() {
    let tb = TimeBase::default();
    let engine = engine_with(&four_on_the_floor(), tb);
    let offline_events = engine.sequencer().trace(64);
    let offline_smf = engine.sequencer().render_offline(64).unwrap();
    let live = run_simulated(engine, 64, &[]);

    let live_events: Vec<_> = live.iter().map(|(e, _)| *e).collect();
    assert_eq!(live_events, offline_events);
    assert_eq!(write_smf(&live_events, &tb), offline_smf);
    assert_eq!(live_events.iter().filter(|e| e.kind == NoteKind::On).count(), 16);
    assert!(paired(&live_events));
    // wall-clock stamps sit on the ideal grid: 480 ticks per 0.5 s
    for (e, at) in &live {
        let ideal = e.tick as f64 / 480.0 * 0.5;
        assert!((at.as_secs_f64() - ideal).abs() < 1e-6, "{e:?} at {at:?}");
    }
}

#[test]
fn controls_before_start_shape_the_live_trace() {
    let tb = TimeBase::default();
    let mut engine = engine_with(&ManyHotPattern::from_steps(0..32).unwrap(), tb);
    let controls = [Control::Length(3), Control::Pitch { slot: 1, note: 40 }];
    for c in &controls {
        engine.apply(c).unwrap();
    }
    let offline = engine.sequencer().trace(12);
    let fresh = engine_with(&ManyHotPattern::from_steps(0..32).unwrap(), tb);
    let live: Vec<_> = run_simulated(fresh, 12, &controls).into_iter().map(|(e, _)| e).collect();
    assert_eq!(live, offline);
    let notes: Vec<u8> = live.iter().filter(|e| e.kind == NoteKind::On).map(|e| e.note).collect();
    assert_eq!(&notes[..6], [60, 40, 60, 60, 40, 60]);
}

/// Runs 128 steps against the wall clock while another thread floods the
/// mailbox with latent updates, and measures each note-on against the grid.
#[test]
fn live_clock_jitter_under_two_ms_at_120_bpm() {
    let engine = engine_with(&ManyHotPattern::from_steps(0..32).unwrap(), TimeBase::default());
    let mailbox = Mailbox::new();
    let sink = CaptureSink::new();
    let live = Live::new(engine, MonotonicClock::new(), sink.clone(), Arc::clone(&mailbox), Hub::new(), StateCell::new())
        .with_options(LiveOptions { stop_after_steps: Some(128) });
    mailbox.push(Control::Transport(Transport::Start), None);
    let handle = latentseq::live::spawn(live);
    let flood_box = Arc::clone(&mailbox);
    let flood = std::thread::spawn(move || {
        let mut i = 0u32;
        while !flood_box.is_shutdown() {
            flood_box.push(Control::Latent { x: f64::from(i % 100) * 0.01, y: 0.5 }, None);
            i += 1;
            std::thread::sleep(Duration::from_millis(1));
        }
    });
    handle.join().unwrap();
    flood.join().unwrap();

    let ons: Vec<Duration> = sink.events().iter().filter(|(e, _)| e.kind == NoteKind::On).map(|(_, t)| *t).collect();
    assert_eq!(ons.len(), 128);
    let t0 = ons[0];
    let worst = ons
        .iter()
        .enumerate()
        .map(|(k, t)| (t.as_secs_f64() - t0.as_secs_f64() - k as f64 * 0.125).abs())
        .fold(0.0, f64::max);
    println!("worst step jitter over 128 steps: {:.3} ms", worst * 1e3);
    assert!(worst < 0.002, "worst jitter {worst}");
    assert!(paired(&sink.events().into_iter().map(|(e, _)| e).collect::<Vec<_>>()));
}

#[test]
fn shutdown_mid_note_closes_it() {
    let engine = engine_with(&ManyHotPattern::from_steps(0..32).unwrap(), TimeBase::default());
    let mailbox = Mailbox::new();
    let sink = CaptureSink::new();
    let live = Live::new(engine, MonotonicClock::new(), sink.clone(), Arc::clone(&mailbox), Hub::new(), StateCell::new());
    mailbox.push(Control::Transport(Transport::Start), None);
    let handle = latentseq::live::spawn(live);
    // 10 ms into step 0: the note is still inside its 62.5 ms gate
    std::thread::sleep(Duration::from_millis(10));
    mailbox.shutdown();
    let engine = handle.join().unwrap();
    let events: Vec<_> = sink.events().into_iter().map(|(e, _)| e).collect();
    assert_eq!(events.len(), 2, "{events:?}");
    assert!(paired(&events));
    assert_eq!(engine.sequencer().sounding(), None);
}
