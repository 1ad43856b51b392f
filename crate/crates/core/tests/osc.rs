mod support {
    pub mod golden;
    pub mod osc_ref;
}

use std::net::UdpSocket;
use std::sync::Arc;
use std::time::Duration;

use crossbeam_channel::unbounded;
use jamloop_core::model::{Instrument, Pitch, Velocity};
use jamloop_core::osc::{
    decode, encode, AppMessage, OscArg, OscMessage, OscReceiver, OscSender, OutboundNote, TransportStats,
};
use proptest::prelude::*;
use support::golden::{golden_message, GOLDEN};
use support::osc_ref::reference_encode;

#[test]
fn golden_vectors_match() {
    for (name, hex) in GOLDEN {
        let m = golden_message(name);
        let bytes = hex::decode(hex).unwrap();
        assert_eq!(encode(&m).unwrap(), bytes, "{name}");
        assert_eq!(reference_encode(&m), bytes, "{name} (reference)");
        assert_eq!(decode(&bytes).unwrap(), m, "{name}");
    }
}

#[test]
fn golden_schema_mapping() {
    let app = |name| AppMessage::from_osc(&golden_message(name)).unwrap();
    let p60 = Pitch::new(60).unwrap();
    assert_eq!(app("note_on"), AppMessage::NoteOn { pitch: p60, velocity: Velocity::new(100).unwrap() });
    assert_eq!(app("note_on_zero_velocity"), AppMessage::NoteOff { pitch: p60 });
    assert_eq!(app("note_off"), AppMessage::NoteOff { pitch: p60 });
    assert_eq!(app("cc"), AppMessage::Cc { controller: 64, value: 127 });
    assert_eq!(
        app("play_click1"),
        AppMessage::PlayNote(OutboundNote::on(Instrument::Click1, Pitch::new(84).unwrap(), Velocity::DEFAULT))
    );
    assert_eq!(
        app("play_hihat_off"),
        AppMessage::PlayNote(OutboundNote::off(Instrument::HiHat, Pitch::new(42).unwrap()))
    );
    assert!(matches!(app("gen_request"), AppMessage::GenRequest(_)));
    assert!(matches!(app("engine_state"), AppMessage::EngineState(b) if b.is_empty()));
}

fn arb_arg() -> impl Strategy<Value = OscArg> {
    prop_oneof![
        any::<i32>().prop_map(OscArg::Int),
        any::<f32>().prop_map(OscArg::Float),
        "[ -~]{0,16}".prop_map(OscArg::Str),
        proptest::collection::vec(any::<u8>(), 0..32).prop_map(OscArg::Blob),
    ]
}

fn arb_app() -> impl Strategy<Value = AppMessage> {
    let pitch = (0i64..=127).prop_map(|p| Pitch::new(p).unwrap());
    let vel = (1i64..=127).prop_map(|v| Velocity::new(v).unwrap());
    let inst = proptest::sample::select(Instrument::ALL.to_vec());
    let blob = proptest::collection::vec(any::<u8>(), 0..64);
    prop_oneof![
        (pitch.clone(), vel).prop_map(|(pitch, velocity)| AppMessage::NoteOn { pitch, velocity }),
        pitch.clone().prop_map(|pitch| AppMessage::NoteOff { pitch }),
        (0u8..=127, 0u8..=127).prop_map(|(controller, value)| AppMessage::Cc { controller, value }),
        (inst, pitch, 0u8..=127).prop_map(|(instrument, pitch, velocity)| AppMessage::PlayNote(OutboundNote {
            instrument,
            pitch,
            velocity
        })),
        blob.clone().prop_map(AppMessage::GenRequest),
        blob.clone().prop_map(AppMessage::GenResponse),
        blob.prop_map(AppMessage::EngineState),
    ]
}

proptest! {
    #[test]
    fn codec_agrees_with_reference(addr in "/[a-z0-9/_]{0,20}", args in proptest::collection::vec(arb_arg(), 0..8)) {
        let m = OscMessage::new(addr, args);
        let bytes = encode(&m).unwrap();
        prop_assert_eq!(&bytes, &reference_encode(&m));
        prop_assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn schema_round_trip(app in arb_app()) {
        let bytes = encode(&app.to_osc()).unwrap();
        prop_assert_eq!(bytes.len() % 4, 0);
        prop_assert_eq!(AppMessage::from_osc(&decode(&bytes).unwrap()).unwrap(), app);
    }

    #[test]
    fn truncations_never_panic(app in arb_app(), cut in 0usize..200) {
        let bytes = encode(&app.to_osc()).unwrap();
        let cut = cut.min(bytes.len());
        if let Ok(m) = decode(&bytes[..cut]) {
            // only the full message is a valid parse
            prop_assert_eq!(cut, bytes.len());
            prop_assert_eq!(m, app.to_osc());
        }
    }
}

#[test]
fn loopback_thousand_messages_in_order() {
    let stats = Arc::new(TransportStats::default());
    let (tx, rx) = unbounded();
    let receiver = OscReceiver::spawn(UdpSocket::bind("127.0.0.1:0").unwrap(), Arc::clone(&stats), move |m, _| {
        let _ = tx.send(m);
    })
    .unwrap();
    let sender = OscSender::bind(receiver.local_addr(), Arc::new(TransportStats::default())).unwrap();
    let mut got = Vec::new();
    for k in 0..1000u32 {
        let msg = AppMessage::Cc { controller: (k % 128) as u8, value: (k / 128) as u8 };
        sender.send(&msg).unwrap();
        // pace the sender so the kernel buffer never overflows
        if k % 50 == 49 {
            while got.len() < k as usize + 1 {
                got.push(rx.recv_timeout(Duration::from_secs(2)).unwrap());
            }
        }
    }
    let expected: Vec<AppMessage> =
        (0..1000u32).map(|k| AppMessage::Cc { controller: (k % 128) as u8, value: (k / 128) as u8 }).collect();
    assert_eq!(got, expected);
    assert_eq!(stats.snapshot().dispatched, 1000);
}
