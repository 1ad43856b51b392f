//! Application message set carried over OSC.
//!
//! | address          | tags  | meaning                                      |
//! |------------------|-------|----------------------------------------------|
//! | `/midi/noteon`   | `ii`  | pitch, velocity (velocity 0 means note-off)  |
//! | `/midi/noteoff`  | `i`   | pitch                                        |
//! | `/midi/cc`       | `ii`  | controller, value                            |
//! | `/play/note`     | `iii` | instrument id, pitch, velocity (0 = off)     |
//! | `/gen/request`   | `b`   | JSON generator request                       |
//! | `/gen/response`  | `b`   | JSON generator response                      |
//! | `/engine/state`  | `b`   | JSON engine snapshot                         |

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codec::{OscArg, OscMessage};
use crate::model::{Instrument, Pitch, Velocity};

pub mod address {
    pub const NOTE_ON: &str = "/midi/noteon";
    pub const NOTE_OFF: &str = "/midi/noteoff";
    pub const CC: &str = "/midi/cc";
    pub const PLAY_NOTE: &str = "/play/note";
    pub const GEN_REQUEST: &str = "/gen/request";
    pub const GEN_RESPONSE: &str = "/gen/response";
    pub const ENGINE_STATE: &str = "/engine/state";
}

/// A note event sent to the synthesizer. Velocity 0 releases the note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutboundNote {
    pub instrument: Instrument,
    pub pitch: Pitch,
    pub velocity: u8,
}

impl OutboundNote {
    pub fn on(instrument: Instrument, pitch: Pitch, velocity: Velocity) -> Self {
        OutboundNote { instrument, pitch, velocity: velocity.value() }
    }

    pub fn off(instrument: Instrument, pitch: Pitch) -> Self {
        OutboundNote { instrument, pitch, velocity: 0 }
    }

    pub fn is_on(&self) -> bool {
        self.velocity > 0
    }

    pub fn to_message(self) -> AppMessage {
        AppMessage::PlayNote(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AppMessage {
    NoteOn { pitch: Pitch, velocity: Velocity },
    NoteOff { pitch: Pitch },
    Cc { controller: u8, value: u8 },
    PlayNote(OutboundNote),
    GenRequest(Vec<u8>),
    GenResponse(Vec<u8>),
    EngineState(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown address {0}")]
    UnknownAddress(String),
    #[error("{address} expects ,{expected} but got ,{got}")]
    BadArguments { address: &'static str, expected: &'static str, got: String },
    #[error("{address}: argument {value} out of range")]
    OutOfRange { address: &'static str, value: i32 },
}

fn midi_byte(address: &'static str, v: i32) -> Result<u8, SchemaError> {
    u8::try_from(v).ok().filter(|b| *b <= 127).ok_or(SchemaError::OutOfRange { address, value: v })
}

fn pitch(address: &'static str, v: i32) -> Result<Pitch, SchemaError> {
    Pitch::new(i64::from(v)).map_err(|_| SchemaError::OutOfRange { address, value: v })
}

impl AppMessage {
    pub fn address(&self) -> &'static str {
        match self {
            AppMessage::NoteOn { .. } => address::NOTE_ON,
            AppMessage::NoteOff { .. } => address::NOTE_OFF,
            AppMessage::Cc { .. } => address::CC,
            AppMessage::PlayNote(_) => address::PLAY_NOTE,
            AppMessage::GenRequest(_) => address::GEN_REQUEST,
            AppMessage::GenResponse(_) => address::GEN_RESPONSE,
            AppMessage::EngineState(_) => address::ENGINE_STATE,
        }
    }

    pub fn to_osc(&self) -> OscMessage {
        let int = |v: u8| OscArg::Int(i32::from(v));
        let args = match self {
            AppMessage::NoteOn { pitch, velocity } => vec![int(pitch.value()), int(velocity.value())],
            AppMessage::NoteOff { pitch } => vec![int(pitch.value())],
            AppMessage::Cc { controller, value } => vec![int(*controller), int(*value)],
            AppMessage::PlayNote(n) => {
                vec![OscArg::Int(n.instrument.wire_id()), int(n.pitch.value()), int(n.velocity)]
            }
            AppMessage::GenRequest(b) | AppMessage::GenResponse(b) | AppMessage::EngineState(b) => {
                vec![OscArg::Blob(b.clone())]
            }
        };
        OscMessage::new(self.address(), args)
    }

    pub fn from_osc(m: &OscMessage) -> Result<AppMessage, SchemaError> {
        let ints: Option<Vec<i32>> = m.args.iter().map(OscArg::as_int).collect();
        let blob = match m.args.as_slice() {
            [OscArg::Blob(b)] => Some(b.clone()),
            _ => None,
        };
        let bad = |address: &'static str, expected: &'static str| SchemaError::BadArguments {
            address,
            expected,
            got: m.type_tags(),
        };

        match m.address.as_str() {
            address::NOTE_ON => match ints.as_deref() {
                Some(&[p, v]) => {
                    let pitch = pitch(address::NOTE_ON, p)?;
                    match midi_byte(address::NOTE_ON, v)? {
                        0 => Ok(AppMessage::NoteOff { pitch }),
                        v => Ok(AppMessage::NoteOn { pitch, velocity: Velocity::new(i64::from(v)).expect("1..=127") }),
                    }
                }
                _ => Err(bad(address::NOTE_ON, "ii")),
            },
            address::NOTE_OFF => match ints.as_deref() {
                Some(&[p]) => Ok(AppMessage::NoteOff { pitch: pitch(address::NOTE_OFF, p)? }),
                _ => Err(bad(address::NOTE_OFF, "i")),
            },
            address::CC => match ints.as_deref() {
                Some(&[c, v]) => {
                    Ok(AppMessage::Cc { controller: midi_byte(address::CC, c)?, value: midi_byte(address::CC, v)? })
                }
                _ => Err(bad(address::CC, "ii")),
            },
            address::PLAY_NOTE => match ints.as_deref() {
                Some(&[i, p, v]) => {
                    let instrument = Instrument::from_wire(i)
                        .ok_or(SchemaError::OutOfRange { address: address::PLAY_NOTE, value: i })?;
                    Ok(AppMessage::PlayNote(OutboundNote {
                        instrument,
                        pitch: pitch(address::PLAY_NOTE, p)?,
                        velocity: midi_byte(address::PLAY_NOTE, v)?,
                    }))
                }
                _ => Err(bad(address::PLAY_NOTE, "iii")),
            },
            address::GEN_REQUEST => blob.map(AppMessage::GenRequest).ok_or_else(|| bad(address::GEN_REQUEST, "b")),
            address::GEN_RESPONSE => blob.map(AppMessage::GenResponse).ok_or_else(|| bad(address::GEN_RESPONSE, "b")),
            address::ENGINE_STATE => blob.map(AppMessage::EngineState).ok_or_else(|| bad(address::ENGINE_STATE, "b")),
            other => Err(SchemaError::UnknownAddress(other.to_owned())),
        }
    }
}
