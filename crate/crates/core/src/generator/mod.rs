//! Pluggable melody and drum generation.
//!
//! A [`GeneratorPlugin`] turns a primer into a continuation. The built-in
//! [`StubGenerator`] is deterministic and mimics the observable behaviour of a
//! trained melody model (output stays in the primer's key and keeps its note
//! density); [`RemoteGenerator`] forwards requests over OSC to another process.

mod key;
mod remote;
mod stub;
mod worker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instrument, Pitch};

pub use key::{infer_key, KeyEstimate, Scale};
pub use remote::{serve_requests, RemoteGenerator};
pub use stub::{stub_generate, stub_generate_drums, StubGenerator};
pub use worker::GeneratorWorker;

/// Version tag carried by every serialized request/response blob.
pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("cannot infer a key from an empty pitch list")]
    EmptyInput,
    #[error("malformed generator payload: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported payload version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Melody,
    Drums,
}

/// A melody token: pitch plus duration on the sixteenth grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: Pitch,
    pub duration_sixteenths: u32,
}

impl NoteEvent {
    pub fn new(pitch: Pitch, duration_sixteenths: u32) -> Self {
        NoteEvent { pitch, duration_sixteenths: duration_sixteenths.max(1) }
    }
}

/// The set of drum voices struck on one sixteenth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DrumStep(u8);

impl DrumStep {
    pub const EMPTY: DrumStep = DrumStep(0);
    pub const VOICES: [Instrument; 3] = [Instrument::Kick, Instrument::Snare, Instrument::HiHat];

    fn bit(voice: Instrument) -> u8 {
        match voice {
            Instrument::Kick => 1,
            Instrument::Snare => 2,
            Instrument::HiHat => 4,
            _ => 0,
        }
    }

    pub fn contains(self, voice: Instrument) -> bool {
        let bit = Self::bit(voice);
        bit != 0 && self.0 & bit != 0
    }

    /// Non-drum instruments are ignored.
    pub fn insert(&mut self, voice: Instrument) {
        self.0 |= Self::bit(voice);
    }

    pub fn with(mut self, voice: Instrument) -> Self {
        self.insert(voice);
        self
    }

    pub fn is_empty(self) -> bool {
        self.0 & 0b111 == 0
    }

    pub fn voices(self) -> impl Iterator<Item = Instrument> {
        Self::VOICES.into_iter().filter(move |v| self.contains(*v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primer {
    Melody { notes: Vec<NoteEvent> },
    Drums { steps: Vec<DrumStep>, steps_per_bar: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub id: u64,
    pub primer: Primer,
    pub requested_length: usize,
    pub seed: Option<u64>,
}

impl GeneratorRequest {
    pub fn kind(&self) -> GeneratorKind {
        match self.primer {
            Primer::Melody { .. } => GeneratorKind::Melody,
            Primer::Drums { .. } => GeneratorKind::Drums,
        }
    }

    pub fn to_wire(&self) -> Vec<u8> {
        to_wire(self)
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, GeneratorError> {
        from_wire(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generated {
    Melody { notes: Vec<NoteEvent> },
    Drums { steps: Vec<DrumStep> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub request_id: u64,
    pub output: Generated,
}

impl GeneratorResponse {
    pub fn empty(kind: GeneratorKind, request_id: u64) -> Self {
        let output = match kind {
            GeneratorKind::Melody => Generated::Melody { notes: Vec::new() },
            GeneratorKind::Drums => Generated::Drums { steps: Vec::new() },
        };
        GeneratorResponse { request_id, output }
    }

    /// An empty response answering `req`.
    pub fn empty_for(req: &GeneratorRequest) -> Self {
        Self::empty(req.kind(), req.id)
    }

    pub fn kind(&self) -> GeneratorKind {
        match self.output {
            Generated::Melody { .. } => GeneratorKind::Melody,
            Generated::Drums { .. } => GeneratorKind::Drums,
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.output {
            Generated::Melody { notes } => notes.is_empty(),
            Generated::Drums { steps } => steps.iter().all(|s| s.is_empty()),
        }
    }

    pub fn melody_pitches(&self) -> Vec<Pitch> {
        match &self.output {
            Generated::Melody { notes } => notes.iter().map(|n| n.pitch).collect(),
            Generated::Drums { .. } => Vec::new(),
        }
    }

    pub fn to_wire(&self) -> Vec<u8> {
        to_wire(self)
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, GeneratorError> {
        from_wire(bytes)
    }
}

/// Something that can continue a primer. Implementations run on the
/// generator worker thread, never on the timeline.
pub trait GeneratorPlugin: Send + Sync {
    fn name(&self) -> &str;

    fn supports(&self, kind: GeneratorKind) -> bool;

    fn generate(&self, req: &GeneratorRequest) -> GeneratorResponse;
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    v: u32,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct OwnedEnvelope<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

fn to_wire<T: Serialize>(body: &T) -> Vec<u8> {
    serde_json::to_vec(&Envelope { v: WIRE_VERSION, body }).expect("generator payloads always serialize")
}

fn from_wire<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, GeneratorError> {
    let env: OwnedEnvelope<T> = serde_json::from_slice(bytes)?;
    if env.v != WIRE_VERSION {
        return Err(GeneratorError::Version(env.v));
    }
    Ok(env.body)
}
