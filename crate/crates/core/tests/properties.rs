use latentseq_core::control::{Control, Transport};
use latentseq_core::generator::{generate, GenerationRequest};
use latentseq_core::nn::{Architecture, Autoencoder};
use latentseq_core::osc::{OscArg, OscMessage};
use latentseq_core::pattern::{quantize_to_steps, seconds_to_ticks, steps_to_ticks, ManyHotPattern, TickOnsets, TimeBase};
use latentseq_core::sequencer::{MidiEvent, Sequencer};
use latentseq_core::smf::NoteKind;
use proptest::prelude::*;

fn pattern() -> impl Strategy<Value = ManyHotPattern> {
    prop::array::uniform32(any::<bool>()).prop_map(ManyHotPattern::from_bools)
}

fn osc_arg() -> impl Strategy<Value = OscArg> {
    prop_oneof![
        any::<i32>().prop_map(OscArg::Int),
        (-1e6f32..1e6).prop_map(OscArg::Float),
        "[a-zA-Z0-9 _/.-]{0,12}".prop_map(OscArg::Str),
        prop::collection::vec(any::<u8>(), 0..9).prop_map(OscArg::Blob),
    ]
}

/// Every note-on is closed before the same note sounds again, and nothing
/// is left open at the end.
fn assert_paired(events: &[MidiEvent]) {
    let mut open: Option<u8> = None;
    for e in events {
        match e.kind {
            NoteKind::On => {
                assert_eq!(open, None, "overlapping note-on in {events:?}");
                open = Some(e.note);
            }
            NoteKind::Off => {
                assert_eq!(open, Some(e.note), "stray note-off in {events:?}");
                open = None;
            }
        }
    }
    assert_eq!(open, None, "dangling note");
}

proptest! {
    #[test]
    fn grid_aligned_round_trip(p in pattern()) {
        let tb = TimeBase::default();
        prop_assert_eq!(quantize_to_steps(&steps_to_ticks(&p, &tb), &tb).unwrap(), p);
    }

    #[test]
    fn seconds_to_ticks_is_monotone(mut secs in prop::collection::vec(0.0f64..8.0, 0..40), bpm in 40.0f64..240.0) {
        secs.sort_by(f64::total_cmp);
        let tb = TimeBase::with_bpm(bpm).unwrap();
        let ticks = seconds_to_ticks(&secs, &tb).unwrap();
        prop_assert_eq!(ticks.ticks().len(), secs.len());
        prop_assert!(ticks.ticks().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quantize_any_density(ticks in prop::collection::vec(0u64..100_000, 0..200)) {
        let p = quantize_to_steps(&TickOnsets::new(ticks), &TimeBase::default()).unwrap();
        prop_assert!(p.count_active() <= 32);
    }

    #[test]
    fn perturbation_within_half_step_keeps_slot(step in 0usize..32, offset in -59i64..=59) {
        let tb = TimeBase::default();
        let grid = step as i64 * 120;
        prop_assume!(grid + offset >= 0);
        let p = quantize_to_steps(&TickOnsets::new(vec![(grid + offset) as u64]), &tb).unwrap();
        prop_assert_eq!(p, ManyHotPattern::from_steps([step]).unwrap());
    }

    #[test]
    fn osc_round_trip(addr in "/[a-z]{1,8}(/[a-z0-9]{1,6}){0,3}", args in prop::collection::vec(osc_arg(), 0..6)) {
        let msg = OscMessage::new(addr, args);
        let bytes = msg.encode().unwrap();
        prop_assert_eq!(bytes.len() % 4, 0);
        prop_assert_eq!(OscMessage::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn osc_decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = OscMessage::decode(&bytes);
    }

    #[test]
    fn velocity_monotone_and_bounded_below(seed in 0u64..50, x in -10.0f64..10.0, y in -10.0f64..10.0, t in 0.0f64..=1.0) {
        let dec = Autoencoder::init(Architecture::Model3, seed).split().1;
        let r = generate(&dec, &GenerationRequest::new("m", x, y, t)).unwrap();
        let floor = (t * 127.0).round() as i32 - 1;
        for i in 0..32 {
            prop_assert_eq!(r.pattern.get(i), r.raw[i] >= t);
            prop_assert_eq!(r.velocities[i], (r.raw[i] * 127.0).round() as u8);
            if r.pattern.get(i) {
                prop_assert!(i32::from(r.velocities[i]) >= floor);
            }
            for j in 0..32 {
                if r.raw[i] <= r.raw[j] {
                    prop_assert!(r.velocities[i] <= r.velocities[j]);
                }
            }
        }
    }

    #[test]
    fn sequencer_is_periodic_in_length(p in pattern(), length in 1usize..=32) {
        let mut s = Sequencer::default();
        s.load(p, [100; 32]);
        s.set_length(length).unwrap();
        s.start();
        let mut notes = Vec::new();
        for _ in 0..length * 3 {
            let ons: Vec<(u8, u8)> = s.tick().iter().filter(|e| e.kind == NoteKind::On).map(|e| (e.note, e.velocity)).collect();
            notes.push((s.playhead(), ons));
            s.gate();
        }
        prop_assert_eq!(&notes[..length], &notes[length..2 * length]);
        prop_assert_eq!(&notes[..length], &notes[2 * length..]);
    }

    #[test]
    fn pitch_is_lane_at_step_mod_8(lane in prop::array::uniform8(0u8..128), p in pattern(), n in 1usize..100) {
        let mut s = Sequencer::default();
        for (i, &note) in lane.iter().enumerate() {
            s.set_pitch(i, note).unwrap();
        }
        s.load(p, [80; 32]);
        s.start();
        for _ in 0..n {
            for e in s.tick() {
                if e.kind == NoteKind::On {
                    prop_assert_eq!(e.note, lane[s.playhead() % 8]);
                }
            }
            s.gate();
        }
    }

    #[test]
    fn control_osc_round_trip(x in -100.0f32..100.0, y in -100.0f32..100.0, t in 0.0f32..=1.0, len in 1u8..=32, slot in 0u8..8, note in 0u8..128) {
        let cases = [
            Control::Latent { x: f64::from(x), y: f64::from(y) },
            Control::Threshold(f64::from(t)),
            Control::Length(len),
            Control::Pitch { slot, note },
            Control::Transport(Transport::Start),
        ];
        for c in cases {
            let bytes = c.to_osc().encode().unwrap();
            prop_assert_eq!(Control::from_osc(&OscMessage::decode(&bytes).unwrap()).unwrap(), c);
        }
    }
}

#[derive(Debug, Clone)]
enum Mutation {
    Tick,
    Gate,
    Swap(ManyHotPattern),
    Length(usize),
    Pitch(usize, u8),
    Start,
    Stop,
}

fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        6 => Just(Mutation::Tick),
        4 => Just(Mutation::Gate),
        2 => pattern().prop_map(Mutation::Swap),
        1 => (0usize..40).prop_map(Mutation::Length),
        1 => (0usize..10, 0u8..130).prop_map(|(s, n)| Mutation::Pitch(s, n)),
        1 => Just(Mutation::Start),
        1 => Just(Mutation::Stop),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn note_pairing_survives_random_control_traces(ops in prop::collection::vec(mutation(), 1..120)) {
        let mut s = Sequencer::default();
        let mut events = s.start();
        for op in ops {
            match op {
                Mutation::Tick => events.extend(s.tick()),
                Mutation::Gate => events.extend(s.gate()),
                Mutation::Swap(p) => s.load(p, [99; 32]),
                Mutation::Length(l) => { let _ = s.set_length(l); }
                Mutation::Pitch(slot, n) => { let _ = s.set_pitch(slot, n); }
                Mutation::Start => events.extend(s.start()),
                Mutation::Stop => events.extend(s.stop()),
            }
            if s.is_running() {
                prop_assert!(s.playhead() < s.length());
            }
        }
        events.extend(s.stop());
        assert_paired(&events);
    }
}
