//! Byte vectors produced by `tests/fixtures/osc_reference.py`, frozen here.

use jamloop_core::osc::{OscArg, OscMessage};

pub const GOLDEN: &[(&str, &str)] = &[
    ("ping", "2f70696e670000002c000000"),
    ("note_on", "2f6d6964692f6e6f74656f6e000000002c6969000000003c00000064"),
    ("note_on_zero_velocity", "2f6d6964692f6e6f74656f6e000000002c6969000000003c00000000"),
    ("note_off", "2f6d6964692f6e6f74656f66660000002c6900000000003c"),
    ("cc", "2f6d6964692f6363000000002c696900000000400000007f"),
    ("play_click1", "2f706c61792f6e6f746500002c69696900000000000000000000005400000064"),
    ("play_hihat_off", "2f706c61792f6e6f746500002c69696900000000000000070000002a00000000"),
    ("gen_request", "2f67656e2f72657175657374000000002c6200000000000e7b2276223a312c226964223a317d0000"),
    ("gen_response", "2f67656e2f726573706f6e73650000002c620000000000027b7d0000"),
    ("engine_state", "2f656e67696e652f73746174650000002c62000000000000"),
    ("mixed", "2f7800002c667369620000003fc0000061626300ffffffff000000050102030405000000"),
];

/// The message each golden vector encodes.
pub fn golden_message(name: &str) -> OscMessage {
    let i = OscArg::Int;
    let (addr, args) = match name {
        "ping" => ("/ping", vec![]),
        "note_on" => ("/midi/noteon", vec![i(60), i(100)]),
        "note_on_zero_velocity" => ("/midi/noteon", vec![i(60), i(0)]),
        "note_off" => ("/midi/noteoff", vec![i(60)]),
        "cc" => ("/midi/cc", vec![i(64), i(127)]),
        "play_click1" => ("/play/note", vec![i(0), i(84), i(100)]),
        "play_hihat_off" => ("/play/note", vec![i(7), i(42), i(0)]),
        "gen_request" => ("/gen/request", vec![OscArg::Blob(br#"{"v":1,"id":1}"#.to_vec())]),
        "gen_response" => ("/gen/response", vec![OscArg::Blob(b"{}".to_vec())]),
        "engine_state" => ("/engine/state", vec![OscArg::Blob(vec![])]),
        "mixed" => {
            ("/x", vec![OscArg::Float(1.5), OscArg::Str("abc".into()), i(-1), OscArg::Blob(vec![1, 2, 3, 4, 5])])
        }
        other => panic!("no golden message {other}"),
    };
    OscMessage::new(addr, args)
}
