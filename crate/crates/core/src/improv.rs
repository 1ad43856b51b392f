//! Call-and-response improvisation.
//!
//! The machine cycles through three phases:
//!
//! 1. **Accumulating**: the performer's notes pass through unchanged and are
//!    collected until `threshold` notes have been played.
//! 2. **AwaitingGeneration**: the collected notes went out as a primer; notes
//!    keep passing through untouched while the generator works elsewhere.
//! 3. **Replacing**: each incoming note keeps its timing and velocity but takes
//!    the next generated pitch. When the generated queue runs dry the machine
//!    goes back to accumulating.
//!
//! Note-offs are paired through a substitution map so a released key always
//! silences the pitch that was actually sounded for it.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::generator::{GeneratorRequest, GeneratorResponse, NoteEvent, Primer};
use crate::model::{LiveNote, Pitch};
use crate::num::Scalar;
use crate::transport::{quantize_steps, LoopSpec};

pub const DEFAULT_THRESHOLD: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Accumulating,
    AwaitingGeneration,
    Replacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovConfig {
    /// Notes to collect before asking for a continuation.
    pub threshold: usize,
    /// Pitches to ask for; `None` means twice the threshold.
    pub requested_length: Option<usize>,
    /// Shift the generated line by whole octaves toward the performer's
    /// current register before replacing.
    pub octave_align: bool,
    /// Base seed; request `n` uses `seed + n`.
    pub seed: u64,
}

impl Default for ImprovConfig {
    fn default() -> Self {
        ImprovConfig { threshold: DEFAULT_THRESHOLD, requested_length: None, octave_align: false, seed: 0 }
    }
}

impl ImprovConfig {
    pub fn requested_length(&self) -> usize {
        self.requested_length.unwrap_or(2 * self.threshold).max(1)
    }
}

/// Result of feeding one note-on through the machine.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteOnOutcome<T> {
    /// The note to sound: the input with possibly a different pitch.
    pub output: LiveNote<T>,
    pub substituted: bool,
    /// Set when this note completed a primer.
    pub request: Option<GeneratorRequest>,
}

#[derive(Debug, Clone)]
pub struct ImprovMachine<T> {
    config: ImprovConfig,
    phase: Phase,
    accumulated: Vec<LiveNote<T>>,
    generated: VecDeque<Pitch>,
    substitution: HashMap<Pitch, Pitch>,
    engaged: bool,
    awaiting: Option<u64>,
    next_request_id: u64,
    align_pending: bool,
}

impl<T: Scalar> ImprovMachine<T> {
    pub fn new(mut config: ImprovConfig) -> Self {
        config.threshold = config.threshold.max(1);
        ImprovMachine {
            config,
            phase: Phase::Accumulating,
            accumulated: Vec::new(),
            generated: VecDeque::new(),
            substitution: HashMap::new(),
            engaged: true,
            awaiting: None,
            next_request_id: 1,
            align_pending: false,
        }
    }

    pub fn config(&self) -> &ImprovConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn threshold(&self) -> usize {
        self.config.threshold
    }

    pub fn accumulated(&self) -> &[LiveNote<T>] {
        &self.accumulated
    }

    pub fn generated(&self) -> impl Iterator<Item = Pitch> + '_ {
        self.generated.iter().copied()
    }

    pub fn queue_len(&self) -> usize {
        self.generated.len()
    }

    pub fn is_engaged(&self) -> bool {
        self.engaged
    }

    /// Id of the request whose response would currently be accepted.
    pub fn awaiting(&self) -> Option<u64> {
        self.awaiting
    }

    /// Number of held keys whose sounding pitch differs from the key.
    pub fn held_substitutions(&self) -> usize {
        self.substitution.len()
    }

    /// Back to a fresh accumulation. Outstanding responses become stale.
    /// Held substitutions survive so their note-offs still pair correctly.
    pub fn reset(&mut self) {
        self.phase = Phase::Accumulating;
        self.accumulated.clear();
        self.generated.clear();
        self.awaiting = None;
        self.align_pending = false;
    }

    /// Footpedal gate. While disengaged every note passes through untouched
    /// and the phase is frozen.
    pub fn gate(&mut self, engaged: bool) {
        self.engaged = engaged;
    }

    /// Collects `n`. Once the threshold is reached the accumulated notes are
    /// turned into a primer request and the machine waits for the response.
    /// Outside the accumulating phase (or while gated off) this is a no-op.
    pub fn accumulate(&mut self, n: LiveNote<T>, spec: &LoopSpec<T>) -> Option<GeneratorRequest> {
        if !self.engaged || self.phase != Phase::Accumulating {
            return None;
        }
        self.accumulated.push(n);
        if self.accumulated.len() < self.config.threshold {
            return None;
        }
        let notes = primer_notes(&self.accumulated, spec.sixteenth_ms());
        self.accumulated.clear();
        let id = self.next_request_id;
        self.next_request_id += 1;
        self.awaiting = Some(id);
        self.phase = Phase::AwaitingGeneration;
        Some(GeneratorRequest {
            id,
            primer: Primer::Melody { notes },
            requested_length: self.config.requested_length(),
            seed: Some(self.config.seed.wrapping_add(id)),
        })
    }

    /// Stores the pitches of a generated melody, dropping its rhythm.
    ///
    /// Returns `false` if the response was stale (no longer awaited) and was
    /// discarded. An empty response sends the machine back to accumulating.
    pub fn on_response(&mut self, r: &GeneratorResponse) -> bool {
        if self.phase != Phase::AwaitingGeneration || self.awaiting != Some(r.request_id) {
            return false;
        }
        self.awaiting = None;
        let pitches = r.melody_pitches();
        if pitches.is_empty() {
            self.phase = Phase::Accumulating;
        } else {
            self.generated = pitches.into();
            self.phase = Phase::Replacing;
            self.align_pending = self.config.octave_align;
        }
        true
    }

    /// Routes a performer note-on through the current phase.
    pub fn intercept_note_on(&mut self, n: LiveNote<T>, spec: &LoopSpec<T>) -> NoteOnOutcome<T> {
        let passthrough = |request| NoteOnOutcome { output: n, substituted: false, request };
        if !self.engaged {
            return passthrough(None);
        }
        match self.phase {
            Phase::Accumulating => {
                let request = self.accumulate(n, spec);
                passthrough(request)
            }
            Phase::AwaitingGeneration => passthrough(None),
            Phase::Replacing => {
                if self.align_pending {
                    self.align_pending = false;
                    let current: Vec<Pitch> = self.generated.iter().copied().collect();
                    self.generated = octave_align(&current, n.pitch).into();
                }
                let Some(pitch) = self.generated.pop_front() else {
                    // unreachable while the phase invariant holds
                    self.phase = Phase::Accumulating;
                    return passthrough(None);
                };
                if self.generated.is_empty() {
                    self.phase = Phase::Accumulating;
                }
                self.substitution.insert(n.pitch, pitch);
                NoteOnOutcome { output: n.with_pitch(pitch), substituted: true, request: None }
            }
        }
    }

    /// Pitch to silence when key `pitch_released` goes up.
    pub fn intercept_note_off(&mut self, pitch_released: Pitch) -> Pitch {
        self.substitution.remove(&pitch_released).unwrap_or(pitch_released)
    }

    /// Forgets every held substitution, returning `(key, sounding)` pairs.
    pub fn release_all(&mut self) -> Vec<(Pitch, Pitch)> {
        let mut held: Vec<_> = self.substitution.drain().collect();
        held.sort();
        held
    }
}

/// Quantizes accumulated notes into primer tokens. Each duration is the gap
/// to the next onset in sixteenths (at least one); the last note, having no
/// successor, takes the median of the other gaps.
pub fn primer_notes<T: Scalar>(notes: &[LiveNote<T>], sixteenth_ms: T) -> Vec<NoteEvent> {
    let mut gaps: Vec<u32> = notes
        .windows(2)
        .map(|w| quantize_steps(w[1].onset_ms - w[0].onset_ms, sixteenth_ms).clamp(1, u64::from(u32::MAX)) as u32)
        .collect();
    let last = if gaps.is_empty() {
        1
    } else {
        let mut sorted = gaps.clone();
        sorted.sort_unstable();
        sorted[(sorted.len() - 1) / 2]
    };
    gaps.push(last);
    notes.iter().zip(gaps).map(|(n, d)| NoteEvent::new(n.pitch, d)).collect()
}

/// Transposes `generated` by the whole number of octaves that brings its first
/// pitch closest to `reference`. Ties prefer the smaller shift, then the
/// downward one. Pitches clamp at the MIDI range ends.
pub fn octave_align(generated: &[Pitch], reference: Pitch) -> Vec<Pitch> {
    let Some(first) = generated.first() else {
        return Vec::new();
    };
    let first = i32::from(first.value());
    let reference = i32::from(reference.value());
    let octaves = (-11..=11).min_by_key(|k: &i32| ((first + 12 * k - reference).abs(), k.abs(), *k)).unwrap_or(0);
    generated.iter().map(|p| p.transpose(12 * octaves)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Generated, GeneratorKind};
    use crate::model::Velocity;

    fn p(v: i64) -> Pitch {
        Pitch::new(v).unwrap()
    }

    fn note(pitch: i64, vel: i64, onset: f64) -> LiveNote<f64> {
        LiveNote::new(p(pitch), Velocity::new(vel).unwrap(), onset)
    }

    fn spec() -> LoopSpec<f64> {
        LoopSpec::from_parts(1, 4, 4, 120.0).unwrap()
    }

    fn machine(threshold: usize) -> ImprovMachine<f64> {
        ImprovMachine::new(ImprovConfig { threshold, ..Default::default() })
    }

    fn melody(id: u64, pitches: &[i64]) -> GeneratorResponse {
        GeneratorResponse {
            request_id: id,
            output: Generated::Melody { notes: pitches.iter().map(|&x| NoteEvent::new(p(x), 2)).collect() },
        }
    }

    /// Drives a machine into Replacing with the given queue.
    fn replacing(queue: &[i64]) -> ImprovMachine<f64> {
        let mut m = machine(1);
        let req = m.accumulate(note(60, 90, 0.0), &spec()).unwrap();
        assert!(m.on_response(&melody(req.id, queue)));
        m
    }

    #[test]
    fn threshold_semantics() {
        let s = spec();
        let mut m = machine(3);
        assert!(m.accumulate(note(60, 90, 0.0), &s).is_none());
        assert!(m.accumulate(note(62, 90, 250.0), &s).is_none());
        let req = m.accumulate(note(64, 90, 375.0), &s).unwrap();
        let Primer::Melody { notes } = &req.primer else { panic!() };
        assert_eq!(notes, &vec![NoteEvent::new(p(60), 2), NoteEvent::new(p(62), 1), NoteEvent::new(p(64), 1)]);
        assert_eq!(req.requested_length, 6);
        assert_eq!(req.kind(), GeneratorKind::Melody);
        assert_eq!(m.phase(), Phase::AwaitingGeneration);
        assert!(m.accumulated().is_empty());
    }

    #[test]
    fn threshold_one_triggers_immediately() {
        let mut m = machine(1);
        let req = m.accumulate(note(60, 90, 0.0), &spec()).unwrap();
        let Primer::Melody { notes } = &req.primer else { panic!() };
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].duration_sixteenths, 1);
    }

    #[test]
    fn accumulate_ignored_while_replacing() {
        let mut m = replacing(&[67, 69]);
        assert!(m.accumulate(note(50, 90, 0.0), &spec()).is_none());
        assert!(m.accumulated().is_empty());
        assert_eq!(m.phase(), Phase::Replacing);
    }

    #[test]
    fn response_drops_rhythm() {
        let mut m = machine(1);
        let req = m.accumulate(note(60, 90, 0.0), &spec()).unwrap();
        let r = GeneratorResponse {
            request_id: req.id,
            output: Generated::Melody {
                notes: vec![NoteEvent::new(p(67), 4), NoteEvent::new(p(69), 2), NoteEvent::new(p(71), 2)],
            },
        };
        assert!(m.on_response(&r));
        assert_eq!(m.generated().collect::<Vec<_>>(), vec![p(67), p(69), p(71)]);
        assert_eq!(m.phase(), Phase::Replacing);
    }

    #[test]
    fn empty_response_goes_back_to_accumulating() {
        let mut m = machine(1);
        let req = m.accumulate(note(60, 90, 0.0), &spec()).unwrap();
        assert!(m.on_response(&GeneratorResponse::empty_for(&req)));
        assert_eq!(m.phase(), Phase::Accumulating);
    }

    #[test]
    fn stale_responses_are_discarded() {
        let mut m = machine(1);
        let req = m.accumulate(note(60, 90, 0.0), &spec()).unwrap();
        m.reset();
        assert!(!m.on_response(&melody(req.id, &[67])));
        assert_eq!(m.phase(), Phase::Accumulating);

        // a fresh request does not accept the old id either
        let fresh = m.accumulate(note(60, 90, 10.0), &spec()).unwrap();
        assert_ne!(fresh.id, req.id);
        assert!(!m.on_response(&melody(req.id, &[67])));
        assert!(m.on_response(&melody(fresh.id, &[67])));
    }

    #[test]
    fn intercept_replaces_pitch_keeps_rhythm() {
        let s = spec();
        let mut m = replacing(&[67, 69]);
        let out = m.intercept_note_on(note(60, 90, 1000.0), &s);
        assert!(out.substituted);
        assert_eq!(out.output, note(67, 90, 1000.0));
        assert_eq!(m.generated().collect::<Vec<_>>(), vec![p(69)]);

        let out = m.intercept_note_on(note(62, 40, 1100.0), &s);
        assert_eq!(out.output, note(69, 40, 1100.0));
        assert_eq!(m.queue_len(), 0);
        assert_eq!(m.phase(), Phase::Accumulating);
    }

    #[test]
    fn accumulating_passes_through() {
        let mut m = machine(4);
        let out = m.intercept_note_on(note(60, 90, 0.0), &spec());
        assert_eq!(out.output, note(60, 90, 0.0));
        assert!(!out.substituted);
        assert_eq!(m.accumulated().len(), 1);
    }

    #[test]
    fn awaiting_passes_through_without_collecting() {
        let mut m = machine(1);
        m.accumulate(note(60, 90, 0.0), &spec()).unwrap();
        let out = m.intercept_note_on(note(64, 90, 10.0), &spec());
        assert_eq!(out.output.pitch, p(64));
        assert!(m.accumulated().is_empty());
    }

    #[test]
    fn note_off_pairing() {
        let s = spec();
        let mut m = replacing(&[67, 69, 71]);
        m.intercept_note_on(note(60, 90, 0.0), &s);
        assert_eq!(m.intercept_note_off(p(60)), p(67));
        assert_eq!(m.intercept_note_off(p(60)), p(60));
        assert_eq!(m.intercept_note_off(p(62)), p(62));
    }

    #[test]
    fn octave_align_examples() {
        let shifted = octave_align(&[p(48), p(50)], p(72));
        assert_eq!(shifted, vec![p(72), p(74)]);
        assert_eq!(octave_align(&[p(72), p(60)], p(72)), vec![p(72), p(60)]);
        assert_eq!(octave_align(&[p(66)], p(72)), vec![p(66)]);
        assert_eq!(octave_align(&[p(78)], p(72)), vec![p(78)]);
        assert_eq!(octave_align(&[p(79)], p(72)), vec![p(67)]);
        assert!(octave_align(&[], p(72)).is_empty());
    }

    #[test]
    fn octave_align_applies_on_first_replacement() {
        let s = spec();
        let mut m = ImprovMachine::new(ImprovConfig { threshold: 1, octave_align: true, ..Default::default() });
        let req = m.accumulate(note(60, 90, 0.0), &s).unwrap();
        m.on_response(&melody(req.id, &[48, 50]));
        let out = m.intercept_note_on(note(73, 90, 10.0), &s);
        assert_eq!(out.output.pitch, p(72));
        assert_eq!(m.generated().collect::<Vec<_>>(), vec![p(74)]);
    }

    #[test]
    fn gate_freezes_phase() {
        let s = spec();
        let mut m = replacing(&[69]);
        m.gate(false);
        let out = m.intercept_note_on(note(60, 90, 0.0), &s);
        assert_eq!(out.output.pitch, p(60));
        assert_eq!(m.generated().collect::<Vec<_>>(), vec![p(69)]);
        m.gate(false);
        assert!(!m.is_engaged());
        m.gate(true);
        let out = m.intercept_note_on(note(60, 90, 10.0), &s);
        assert_eq!(out.output.pitch, p(69));
    }

    #[test]
    fn primer_duration_encoding() {
        let notes = [note(60, 90, 0.0), note(62, 90, 0.0), note(64, 90, 600.0), note(65, 90, 700.0)];
        let tokens = primer_notes(&notes, 125.0);
        let durations: Vec<u32> = tokens.iter().map(|t| t.duration_sixteenths).collect();
        // gaps 0 -> 1 (minimum), 600 ms -> 5, 100 ms -> 1; last = median(1, 5, 1) = 1
        assert_eq!(durations, vec![1, 5, 1, 1]);
    }
}
