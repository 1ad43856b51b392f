//! Engine invariants under randomized performer input.

use std::collections::HashMap;

use jamloop_core::generator::{GeneratorPlugin, StubGenerator};
use jamloop_core::improv::ImprovConfig;
use jamloop_core::model::{Instrument, Mode, Pitch, TrackKind, Velocity};
use jamloop_core::{ControlCommand, Emission, EngineOptions, InboundEvent, Looper};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Action {
    Wait(f64),
    On(u8),
    Off(u8),
    Mode(Mode),
    Gate(bool),
    Deliver,
    Stop,
    Play,
    Drums,
}

fn action() -> impl Strategy<Value = Action> {
    let pitch = 48u8..60;
    prop_oneof![
        4 => (1.0f64..300.0).prop_map(Action::Wait),
        4 => pitch.clone().prop_map(Action::On),
        4 => pitch.prop_map(Action::Off),
        1 => proptest::sample::select(vec![Mode::Bass, Mode::Chords, Mode::Improv, Mode::Free]).prop_map(Action::Mode),
        1 => any::<bool>().prop_map(Action::Gate),
        1 => Just(Action::Deliver),
        1 => Just(Action::Drums),
        1 => Just(Action::Stop),
        1 => Just(Action::Play),
    ]
}

/// Net sounding count per (instrument, pitch); negative means an off without
/// an on.
fn tally(sounding: &mut HashMap<(Instrument, u8), i64>, emissions: &[Emission]) {
    for e in emissions {
        let k = (e.note.instrument, e.note.pitch.value());
        *sounding.entry(k).or_default() += if e.note.is_on() { 1 } else { -1 };
    }
}

fn run(actions: &[Action]) -> (Looper, HashMap<(Instrument, u8), i64>) {
    let mut l = Looper::new(EngineOptions {
        improv: ImprovConfig { threshold: 4, seed: 3, ..Default::default() },
        ..Default::default()
    });
    let mut sounding = HashMap::new();
    let mut now = 0.0;
    let mut pending = Vec::new();
    tally(&mut sounding, &l.start_playback(now));
    for a in actions {
        let out = match a {
            Action::Wait(ms) => {
                now += ms;
                l.tick(now)
            }
            Action::On(p) => l.handle_note_on(Pitch::new(i64::from(*p)).unwrap(), Velocity::DEFAULT, now),
            Action::Off(p) => l.handle_note_off(Pitch::new(i64::from(*p)).unwrap(), now),
            Action::Mode(m) => {
                l.apply(InboundEvent::Control(ControlCommand::Mode { mode: *m }), now).unwrap_or_default()
            }
            Action::Gate(g) => l.control(ControlCommand::Gate { engaged: *g }, now).unwrap(),
            Action::Deliver => {
                for r in pending.drain(..) {
                    l.on_generator_response(&StubGenerator.generate(&r));
                }
                Vec::new()
            }
            Action::Drums => {
                l.request_generated_drums();
                Vec::new()
            }
            Action::Stop => l.stop_playback(now),
            Action::Play => l.start_playback(now),
        };
        pending.extend(l.take_requests());
        tally(&mut sounding, &out);
        for v in sounding.values() {
            assert!(*v >= 0, "note-off without note-on");
        }
    }
    now += 1.0;
    for p in 48..60 {
        tally(&mut sounding, &l.handle_note_off(Pitch::new(p).unwrap(), now));
    }
    let out = l.stop_playback(now);
    tally(&mut sounding, &out);
    (l, sounding)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stop_leaves_nothing_sounding(actions in proptest::collection::vec(action(), 0..300)) {
        let (l, sounding) = run(&actions);
        prop_assert!(sounding.values().all(|v| *v == 0), "dangling: {:?}", sounding);
        prop_assert_eq!(l.held_keys(), 0);
        prop_assert_eq!(l.pending_offs(), 0);
    }

    #[test]
    fn all_notes_off_silences_held_keys(actions in proptest::collection::vec(action(), 0..100)) {
        let (mut l, mut sounding) = run(&actions);
        tally(&mut sounding, &l.handle_note_on(Pitch::new(50).unwrap(), Velocity::DEFAULT, 1e6));
        tally(&mut sounding, &l.all_notes_off(1e6));
        prop_assert!(sounding.values().all(|v| *v == 0));
    }

    #[test]
    fn committed_notes_survive_mode_switches(
        switches in proptest::collection::vec(proptest::sample::select(vec![Mode::Improv, Mode::Free, Mode::Chords]), 1..20)
    ) {
        let mut l = Looper::default();
        l.start_playback(0.0);
        l.set_mode(Mode::Bass).unwrap();
        l.handle_note_on(Pitch::new(40).unwrap(), Velocity::DEFAULT, 0.0);
        l.handle_note_off(Pitch::new(40).unwrap(), 100.0);
        l.tick(2000.0);
        let before: Vec<_> = l.playable_notes().copied().collect();
        prop_assert!(before.iter().any(|n| n.track == TrackKind::Bass));
        for m in switches {
            l.set_mode(m).unwrap();
        }
        let after: Vec<_> = l.playable_notes().copied().collect();
        prop_assert_eq!(before, after);
    }
}
