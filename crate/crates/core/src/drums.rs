//! Drum track derived from the bassline, and its hand-off to a drum generator.
//!
//! The deterministic beat follows three independent rules: a kick on the first
//! sixteenth of every bar, a snare on every bass onset, and a hi-hat on every
//! eighth note (every second sixteenth, whatever the meter).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{DrumStep, Generated, GeneratorKind, GeneratorRequest, GeneratorResponse, Primer};
use crate::model::{Instrument, Pitch, PlayableNote, SixteenthIndex, TrackKind};
use crate::num::Scalar;
use crate::transport::LoopSpec;

pub const KICK_PITCH: Pitch = Pitch::clamped(36);
pub const SNARE_PITCH: Pitch = Pitch::clamped(38);
pub const HIHAT_PITCH: Pitch = Pitch::clamped(42);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrumSource {
    Deterministic,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrumTrack {
    notes: Vec<PlayableNote>,
    source: DrumSource,
}

impl DrumTrack {
    /// Builds a track from per-step voice sets. Steps at or beyond
    /// `sequence_length` are ignored.
    pub fn from_steps(steps: &[DrumStep], sequence_length: u32, source: DrumSource) -> Self {
        let notes = steps
            .iter()
            .enumerate()
            .take(sequence_length as usize)
            .flat_map(|(pos, step)| step.voices().map(move |v| drum_note(v, pos as u32)))
            .collect();
        DrumTrack { notes, source }
    }

    pub fn notes(&self) -> &[PlayableNote] {
        &self.notes
    }

    pub fn source(&self) -> DrumSource {
        self.source
    }

    /// Dense step representation of length `sequence_length`.
    pub fn steps(&self, sequence_length: u32) -> Vec<DrumStep> {
        let mut steps = vec![DrumStep::EMPTY; sequence_length as usize];
        for n in &self.notes {
            if let Some(step) = steps.get_mut(n.position.0 as usize) {
                step.insert(n.instrument);
            }
        }
        steps
    }
}

fn drum_note(voice: Instrument, position: u32) -> PlayableNote {
    let pitch = match voice {
        Instrument::Kick => KICK_PITCH,
        Instrument::Snare => SNARE_PITCH,
        _ => HIHAT_PITCH,
    };
    PlayableNote::new(TrackKind::Drums, pitch, voice, SixteenthIndex(position), 1)
}

/// Applies the kick, snare and hi-hat rules to `bass_line`.
///
/// Output is sorted by position, then kick, snare, hi-hat. Bass onsets outside
/// the sequence are ignored.
pub fn derive_drums<T: Scalar>(bass_line: &[PlayableNote], spec: &LoopSpec<T>) -> DrumTrack {
    let len = spec.sequence_length();
    let spb = spec.sixteenths_per_bar();
    let onsets: BTreeSet<u32> = bass_line.iter().map(|n| n.position.0).filter(|&p| p < len).collect();

    let mut notes = Vec::new();
    for pos in 0..len {
        if pos % spb == 0 {
            notes.push(drum_note(Instrument::Kick, pos));
        }
        if onsets.contains(&pos) {
            notes.push(drum_note(Instrument::Snare, pos));
        }
        if pos % 2 == 0 {
            notes.push(drum_note(Instrument::HiHat, pos));
        }
    }
    DrumTrack { notes, source: DrumSource::Deterministic }
}

/// Packs a deterministic track as a polyphonic primer covering one loop pass.
pub fn drums_primer<T: Scalar>(track: &DrumTrack, spec: &LoopSpec<T>, id: u64, seed: Option<u64>) -> GeneratorRequest {
    let len = spec.sequence_length();
    GeneratorRequest {
        id,
        primer: Primer::Drums { steps: track.steps(len), steps_per_bar: spec.sixteenths_per_bar() },
        requested_length: len as usize,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DrumRejection {
    #[error("response is not a drum response")]
    WrongKind,
    #[error("response contains no hits")]
    Empty,
    #[error("hit at step {position} outside a {length}-step loop")]
    OutOfRange { position: usize, length: u32 },
}

/// Checks a generator response against the loop and converts it to a track.
pub fn validate_generated_drums<T: Scalar>(
    response: &GeneratorResponse,
    spec: &LoopSpec<T>,
) -> Result<DrumTrack, DrumRejection> {
    let Generated::Drums { steps } = &response.output else {
        return Err(DrumRejection::WrongKind);
    };
    let len = spec.sequence_length();
    if let Some(position) = steps.iter().skip(len as usize).position(|s| !s.is_empty()) {
        return Err(DrumRejection::OutOfRange { position: position + len as usize, length: len });
    }
    if response.is_empty() {
        return Err(DrumRejection::Empty);
    }
    Ok(DrumTrack::from_steps(steps, len, DrumSource::Generated))
}

/// The generated track if the response is usable, otherwise `deterministic`.
pub fn install_generated_drums<T: Scalar>(
    response: &GeneratorResponse,
    deterministic: &DrumTrack,
    spec: &LoopSpec<T>,
) -> DrumTrack {
    debug_assert_eq!(response.kind(), GeneratorKind::Drums);
    match validate_generated_drums(response, spec) {
        Ok(track) => track,
        Err(why) => {
            tracing::warn!(%why, "generated drums rejected, keeping deterministic beat");
            deterministic.clone()
        }
    }
}
