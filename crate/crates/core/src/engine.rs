//! The looper: note store, modes, recording and the step scheduler.
//!
//! [`Looper`] is a plain state machine driven by explicit timestamps, so the
//! same code runs under the wall clock and under the simulator's virtual
//! clock. It is owned by exactly one thread.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlCommand, InboundEvent};
use crate::drums::{derive_drums, drums_primer, install_generated_drums, DrumSource, DrumTrack};
use crate::generator::{GeneratorKind, GeneratorRequest, GeneratorResponse};
use crate::improv::{ImprovConfig, ImprovMachine, Phase};
use crate::model::{
    Instrument, LiveNote, Mode, ModelError, Pitch, PlayableNote, SixteenthIndex, Tempo, TimeSignature, TrackKind,
    Velocity,
};
use crate::num::round_half_up;
use crate::osc::OutboundNote;
use crate::transport::{click_events, LoopSpec, TapTempo};

/// Velocity for every note played back from the loop.
pub const LOOP_VELOCITY: Velocity = Velocity::DEFAULT;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("loop structure cannot change during playback")]
    Playing,
    #[error("modes only apply during playback")]
    NotPlaying,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Played back from the loop at a grid time.
    Scheduled,
    /// Echo of (or response to) a performer note.
    Live,
}

/// An outbound note together with the time it should have been sent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub ideal_ms: f64,
    pub note: OutboundNote,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingSession {
    pub target: TrackKind,
    pub started: bool,
    pub start_position: SixteenthIndex,
    pub captured: Vec<PlayableNote>,
    start_step: u64,
    /// Held keys: index into `captured` and unwrapped onset step.
    open: HashMap<Pitch, (usize, u64)>,
}

impl RecordingSession {
    fn new(target: TrackKind) -> Self {
        RecordingSession {
            target,
            started: false,
            start_position: SixteenthIndex(0),
            captured: Vec::new(),
            start_step: 0,
            open: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineOptions {
    pub spec: LoopSpec<f64>,
    pub improv: ImprovConfig,
    /// Seed for drum generation requests.
    pub drum_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovSnapshot {
    pub phase: Phase,
    pub engaged: bool,
    pub accumulated: usize,
    pub threshold: usize,
    pub queue: Vec<Pitch>,
    pub awaiting: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSnapshot {
    pub target: TrackKind,
    pub started: bool,
    pub start_position: u32,
    pub captured: Vec<PlayableNote>,
}

/// Immutable copy of everything a monitor needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub playing: bool,
    pub mode: Mode,
    pub playhead: Option<u32>,
    pub qpm: f64,
    pub bars: u32,
    pub numerator: u8,
    pub denominator: u8,
    pub sequence_length: u32,
    pub click_muted: bool,
    pub improv: ImprovSnapshot,
    pub recording: Option<RecordingSnapshot>,
    pub bass: Vec<PlayableNote>,
    pub chords: Vec<PlayableNote>,
    pub drums: Vec<PlayableNote>,
    pub drum_source: Option<DrumSource>,
}

#[derive(Debug, Clone)]
pub struct Looper {
    spec: LoopSpec<f64>,
    mode: Mode,
    playing: bool,
    click_muted: bool,

    clicks: Vec<PlayableNote>,
    bass_line: Vec<PlayableNote>,
    chords: Vec<PlayableNote>,
    drums: Option<DrumTrack>,
    deterministic_drums: Option<DrumTrack>,
    store: BTreeMap<u32, Vec<PlayableNote>>,

    recording: Option<RecordingSession>,
    improv: ImprovMachine<f64>,

    // step k is due at anchor_ms + (k - anchor_step) * sixteenth_ms
    anchor_ms: f64,
    anchor_step: f64,
    next_step: u64,
    playhead: Option<u32>,

    pending_offs: Vec<(u64, OutboundNote)>,
    held: HashMap<Pitch, OutboundNote>,
    tap: TapTempo<f64>,

    outbox: Vec<GeneratorRequest>,
    drum_seed: Option<u64>,
    next_drum_id: u64,
    awaited_drums: Option<u64>,
    version: u64,
}

impl Default for Looper {
    fn default() -> Self {
        Looper::new(EngineOptions::default())
    }
}

impl Looper {
    pub fn new(options: EngineOptions) -> Self {
        let mut looper = Looper {
            spec: options.spec,
            mode: Mode::Free,
            playing: false,
            click_muted: false,
            clicks: click_events(&options.spec),
            bass_line: Vec::new(),
            chords: Vec::new(),
            drums: None,
            deterministic_drums: None,
            store: BTreeMap::new(),
            recording: None,
            improv: ImprovMachine::new(options.improv),
            anchor_ms: 0.0,
            anchor_step: 0.0,
            next_step: 0,
            playhead: None,
            pending_offs: Vec::new(),
            held: HashMap::new(),
            tap: TapTempo::new(),
            outbox: Vec::new(),
            drum_seed: options.drum_seed,
            next_drum_id: 1,
            awaited_drums: None,
            version: 0,
        };
        looper.rebuild_store();
        looper
    }

    pub fn spec(&self) -> &LoopSpec<f64> {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_playing(&self) -> bool {
        self.playing
    }

    pub fn bass_line(&self) -> &[PlayableNote] {
        &self.bass_line
    }

    pub fn chords(&self) -> &[PlayableNote] {
        &self.chords
    }

    pub fn drums(&self) -> Option<&DrumTrack> {
        self.drums.as_ref()
    }

    pub fn recording(&self) -> Option<&RecordingSession> {
        self.recording.as_ref()
    }

    pub fn improv(&self) -> &ImprovMachine<f64> {
        &self.improv
    }

    /// Position-ordered playable notes, including the click track.
    pub fn playable_notes(&self) -> impl Iterator<Item = &PlayableNote> {
        self.store.values().flatten()
    }

    /// Bumped on every state change other than the playhead moving.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Keys currently held by the performer.
    pub fn held_keys(&self) -> usize {
        self.held.len()
    }

    /// Scheduled note-offs not yet emitted.
    pub fn pending_offs(&self) -> usize {
        self.pending_offs.len()
    }

    fn step_ms(&self) -> f64 {
        self.spec.sixteenth_ms()
    }

    fn ideal_ms(&self, step: u64) -> f64 {
        self.anchor_ms + (step as f64 - self.anchor_step) * self.step_ms()
    }

    /// Continuous grid position at `now_ms`, in unwrapped sixteenths.
    fn grid_position(&self, now_ms: f64) -> f64 {
        (self.anchor_step + (now_ms - self.anchor_ms) / self.step_ms()).max(0.0)
    }

    /// When the next grid step is due, if playing.
    pub fn next_due_ms(&self) -> Option<f64> {
        self.playing.then(|| self.ideal_ms(self.next_step))
    }

    fn changed(&mut self) {
        self.version += 1;
    }

    fn rebuild_store(&mut self) {
        self.store.clear();
        let drums = self.drums.as_ref().map(DrumTrack::notes).unwrap_or(&[]);
        for n in self.clicks.iter().chain(&self.bass_line).chain(&self.chords).chain(drums) {
            self.store.entry(n.position.0).or_default().push(*n);
        }
        for notes in self.store.values_mut() {
            notes.sort();
            notes.dedup();
        }
    }

    // ---- structure -------------------------------------------------------

    pub fn set_loop_spec(&mut self, bars: u32, numerator: u32, denominator: u32) -> Result<(), EngineError> {
        if self.playing {
            return Err(EngineError::Playing);
        }
        let ts = TimeSignature::new(i64::from(numerator), i64::from(denominator))?;
        let spec = LoopSpec::new(bars, ts, self.spec.tempo())?;
        self.spec = spec;
        let len = spec.sequence_length();
        let trim = |notes: &mut Vec<PlayableNote>| {
            notes.retain(|n| n.position.0 < len);
            for n in notes.iter_mut() {
                n.duration_sixteenths = n.duration_sixteenths.min(2 * len - n.position.0);
            }
        };
        trim(&mut self.bass_line);
        trim(&mut self.chords);
        self.clicks = click_events(&spec);
        if self.drums.is_some() {
            let det = derive_drums(&self.bass_line, &spec);
            self.drums = Some(det.clone());
            self.deterministic_drums = Some(det);
            self.awaited_drums = None;
        }
        self.rebuild_store();
        self.changed();
        Ok(())
    }

    pub fn set_tempo(&mut self, qpm: f64, now_ms: f64) -> Result<(), EngineError> {
        let tempo = Tempo::new(qpm)?;
        self.install_tempo(tempo, now_ms);
        Ok(())
    }

    fn install_tempo(&mut self, tempo: Tempo<f64>, now_ms: f64) {
        if self.playing {
            self.anchor_step += (now_ms - self.anchor_ms) / self.step_ms();
            self.anchor_ms = now_ms;
        }
        self.spec = self.spec.with_tempo(tempo);
        self.changed();
    }

    pub fn tap(&mut self, now_ms: f64) -> Option<f64> {
        let tempo = self.tap.tap(now_ms)?;
        self.install_tempo(tempo, now_ms);
        Some(tempo.qpm())
    }

    pub fn set_click_muted(&mut self, muted: bool) {
        self.click_muted = muted;
        self.changed();
    }

    pub fn set_gate(&mut self, engaged: bool) {
        self.improv.gate(engaged);
        self.changed();
    }

    // ---- transport -------------------------------------------------------

    /// Starts the loop at position 0. The first step is emitted immediately.
    pub fn start_playback(&mut self, now_ms: f64) -> Vec<Emission> {
        if self.playing {
            return Vec::new();
        }
        self.playing = true;
        self.anchor_ms = now_ms;
        self.anchor_step = 0.0;
        self.next_step = 0;
        self.changed();
        self.tick(now_ms)
    }

    /// Halts the loop and releases everything that is sounding.
    pub fn stop_playback(&mut self, now_ms: f64) -> Vec<Emission> {
        if !self.playing {
            return Vec::new();
        }
        self.playing = false;
        self.playhead = None;
        self.recording = None;
        self.mode = Mode::Free;
        self.improv.reset();
        self.all_notes_off(now_ms)
    }

    /// Releases every scheduled and held note, playing or not.
    pub fn all_notes_off(&mut self, now_ms: f64) -> Vec<Emission> {
        self.improv.release_all();
        let mut out: Vec<Emission> = self
            .pending_offs
            .drain(..)
            .map(|(_, note)| Emission { ideal_ms: now_ms, note, origin: Origin::Scheduled })
            .collect();
        let mut held: Vec<(Pitch, OutboundNote)> = self.held.drain().collect();
        held.sort_by_key(|(k, _)| *k);
        out.extend(held.into_iter().map(|(_, n)| Emission {
            ideal_ms: now_ms,
            note: OutboundNote::off(n.instrument, n.pitch),
            origin: Origin::Live,
        }));
        self.changed();
        out
    }

    /// Emits every step that has come due by `now_ms`.
    pub fn tick(&mut self, now_ms: f64) -> Vec<Emission> {
        let mut out = Vec::new();
        if !self.playing {
            return out;
        }
        let len = u64::from(self.spec.sequence_length());
        while self.ideal_ms(self.next_step) <= now_ms {
            let step = self.next_step;
            let ideal_ms = self.ideal_ms(step);

            let mut i = 0;
            while i < self.pending_offs.len() {
                if self.pending_offs[i].0 <= step {
                    let (_, note) = self.pending_offs.swap_remove(i);
                    out.push(Emission { ideal_ms, note, origin: Origin::Scheduled });
                } else {
                    i += 1;
                }
            }

            if step.is_multiple_of(len) && self.recording.as_ref().is_some_and(|s| s.started && step > s.start_step) {
                self.finalize_recording(step);
            }

            let pos = (step % len) as u32;
            if let Some(notes) = self.store.get(&pos) {
                for n in notes {
                    if n.track == TrackKind::Click && self.click_muted {
                        continue;
                    }
                    let on = OutboundNote::on(n.instrument, n.pitch, LOOP_VELOCITY);
                    out.push(Emission { ideal_ms, note: on, origin: Origin::Scheduled });
                    self.pending_offs
                        .push((step + u64::from(n.duration_sixteenths), OutboundNote::off(n.instrument, n.pitch)));
                }
            }
            self.playhead = Some(pos);
            self.next_step += 1;
        }
        out
    }

    pub fn playhead(&self) -> Option<u32> {
        self.playhead
    }

    // ---- modes and recording ---------------------------------------------

    pub fn set_mode(&mut self, mode: Mode) -> Result<(), EngineError> {
        if !self.playing {
            return Err(EngineError::NotPlaying);
        }
        self.mode = mode;
        self.recording = match mode {
            Mode::Bass => Some(RecordingSession::new(TrackKind::Bass)),
            Mode::Chords => Some(RecordingSession::new(TrackKind::Chords)),
            Mode::Improv | Mode::Free => None,
        };
        if mode == Mode::Improv {
            self.improv.reset();
        }
        self.changed();
        Ok(())
    }

    fn capture(&mut self, pitch: Pitch, now_ms: f64) {
        let step = round_half_up(self.grid_position(now_ms));
        let len = u64::from(self.spec.sequence_length());
        let Some(session) = self.recording.as_mut() else {
            return;
        };
        let pos = (step % len) as u32;
        if !session.started {
            session.started = true;
            session.start_position = SixteenthIndex(pos);
            session.start_step = step;
        }
        let instrument = match session.target {
            TrackKind::Bass => Instrument::Bass,
            _ => Instrument::Keys,
        };
        session.captured.push(PlayableNote::new(session.target, pitch, instrument, SixteenthIndex(pos), 1));
        session.open.insert(pitch, (session.captured.len() - 1, step));
    }

    fn close_capture(&mut self, pitch: Pitch, release_step: u64) {
        let len = self.spec.sequence_length();
        if let Some(session) = self.recording.as_mut() {
            if let Some((idx, onset)) = session.open.remove(&pitch) {
                let n = &mut session.captured[idx];
                let dur = release_step.saturating_sub(onset).clamp(1, u64::from(2 * len - n.position.0));
                n.duration_sixteenths = dur as u32;
            }
        }
    }

    fn finalize_recording(&mut self, wrap_step: u64) {
        let open: Vec<Pitch> = self.recording.as_ref().map(|s| s.open.keys().copied().collect()).unwrap_or_default();
        for pitch in open {
            self.close_capture(pitch, wrap_step);
        }
        let Some(session) = self.recording.take() else {
            return;
        };
        let mut captured = session.captured;
        captured.sort();
        captured.dedup();
        match session.target {
            TrackKind::Bass => {
                self.bass_line = captured;
                let det = derive_drums(&self.bass_line, &self.spec);
                self.drums = Some(det.clone());
                self.deterministic_drums = Some(det);
                self.awaited_drums = None;
            }
            _ => {
                self.chords.extend(captured);
                self.chords.sort();
                self.chords.dedup();
            }
        }
        self.mode = Mode::Free;
        self.rebuild_store();
        self.changed();
    }

    // ---- performer notes -------------------------------------------------

    pub fn handle_note_on(&mut self, pitch: Pitch, velocity: Velocity, now_ms: f64) -> Vec<Emission> {
        let mut out = Vec::with_capacity(2);
        if self.held.contains_key(&pitch) {
            out.extend(self.handle_note_off(pitch, now_ms));
        }
        let (instrument, sounding) = if !self.playing {
            (Instrument::Piano, pitch)
        } else {
            match self.mode {
                Mode::Bass | Mode::Chords => {
                    self.capture(pitch, now_ms);
                    (self.mode.echo_instrument(), pitch)
                }
                Mode::Improv => {
                    let outcome = self.improv.intercept_note_on(LiveNote::new(pitch, velocity, now_ms), &self.spec);
                    if let Some(req) = outcome.request {
                        self.outbox.push(req);
                    }
                    (Instrument::Lead, outcome.output.pitch)
                }
                Mode::Free => (Instrument::Piano, pitch),
            }
        };
        let note = OutboundNote::on(instrument, sounding, velocity);
        self.held.insert(pitch, note);
        out.push(Emission { ideal_ms: now_ms, note, origin: Origin::Live });
        self.changed();
        out
    }

    pub fn handle_note_off(&mut self, pitch: Pitch, now_ms: f64) -> Vec<Emission> {
        self.improv.intercept_note_off(pitch);
        if self.playing {
            let step = round_half_up(self.grid_position(now_ms));
            self.close_capture(pitch, step);
        }
        match self.held.remove(&pitch) {
            Some(n) => {
                self.changed();
                vec![Emission {
                    ideal_ms: now_ms,
                    note: OutboundNote::off(n.instrument, n.pitch),
                    origin: Origin::Live,
                }]
            }
            None => Vec::new(),
        }
    }

    // ---- generation ------------------------------------------------------

    /// Requests produced since the last call, for the generator worker.
    pub fn take_requests(&mut self) -> Vec<GeneratorRequest> {
        std::mem::take(&mut self.outbox)
    }

    /// Makes sure a deterministic beat exists and asks for a generated one
    /// primed with it.
    pub fn request_generated_drums(&mut self) {
        let det = match &self.deterministic_drums {
            Some(d) => d.clone(),
            None => {
                let d = derive_drums(&self.bass_line, &self.spec);
                self.deterministic_drums = Some(d.clone());
                self.drums = Some(d.clone());
                self.rebuild_store();
                d
            }
        };
        let id = self.next_drum_id;
        self.next_drum_id += 1;
        self.awaited_drums = Some(id);
        let seed = self.drum_seed.map(|s| s.wrapping_add(id));
        self.outbox.push(drums_primer(&det, &self.spec, id, seed));
        self.changed();
    }

    /// Applies a generator response. Stale or unusable responses are
    /// ignored; returns whether state changed.
    pub fn on_generator_response(&mut self, response: &GeneratorResponse) -> bool {
        let applied = match response.kind() {
            GeneratorKind::Melody => self.improv.on_response(response),
            GeneratorKind::Drums => {
                if self.awaited_drums != Some(response.request_id) {
                    return false;
                }
                self.awaited_drums = None;
                let Some(det) = &self.deterministic_drums else {
                    return false;
                };
                self.drums = Some(install_generated_drums(response, det, &self.spec));
                self.rebuild_store();
                true
            }
        };
        if applied {
            self.changed();
        }
        applied
    }

    // ---- dispatch --------------------------------------------------------

    pub fn apply(&mut self, event: InboundEvent, now_ms: f64) -> Result<Vec<Emission>, EngineError> {
        match event {
            InboundEvent::NoteOn { pitch, velocity } => Ok(self.handle_note_on(pitch, velocity, now_ms)),
            InboundEvent::NoteOff { pitch } => Ok(self.handle_note_off(pitch, now_ms)),
            InboundEvent::Control(c) => self.control(c, now_ms),
        }
    }

    pub fn control(&mut self, command: ControlCommand, now_ms: f64) -> Result<Vec<Emission>, EngineError> {
        let ts = self.spec.time_signature();
        let (bars, num, den) = (self.spec.num_bars(), u32::from(ts.numerator()), u32::from(ts.denominator()));
        match command {
            ControlCommand::Play => return Ok(self.start_playback(now_ms)),
            ControlCommand::Stop => return Ok(self.stop_playback(now_ms)),
            ControlCommand::Mode { mode } => self.set_mode(mode)?,
            ControlCommand::Tap => {
                self.tap(now_ms);
            }
            ControlCommand::Qpm { qpm } => self.set_tempo(qpm, now_ms)?,
            ControlCommand::Spec { bars, numerator, denominator } => {
                self.set_loop_spec(bars, numerator, denominator)?
            }
            ControlCommand::Bars { bars } => self.set_loop_spec(bars, num, den)?,
            ControlCommand::Numerator { numerator } => self.set_loop_spec(bars, numerator, den)?,
            ControlCommand::Denominator { denominator } => self.set_loop_spec(bars, num, denominator)?,
            ControlCommand::Gate { engaged } => self.set_gate(engaged),
            ControlCommand::Drums => self.request_generated_drums(),
            ControlCommand::MuteClick { muted } => self.set_click_muted(muted),
        }
        Ok(Vec::new())
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        let ts = self.spec.time_signature();
        EngineSnapshot {
            playing: self.playing,
            mode: self.mode,
            playhead: self.playhead,
            qpm: self.spec.tempo().qpm(),
            bars: self.spec.num_bars(),
            numerator: ts.numerator(),
            denominator: ts.denominator(),
            sequence_length: self.spec.sequence_length(),
            click_muted: self.click_muted,
            improv: ImprovSnapshot {
                phase: self.improv.phase(),
                engaged: self.improv.is_engaged(),
                accumulated: self.improv.accumulated().len(),
                threshold: self.improv.threshold(),
                queue: self.improv.generated().collect(),
                awaiting: self.improv.awaiting(),
            },
            recording: self.recording.as_ref().map(|s| RecordingSnapshot {
                target: s.target,
                started: s.started,
                start_position: s.start_position.0,
                captured: s.captured.clone(),
            }),
            bass: self.bass_line.clone(),
            chords: self.chords.clone(),
            drums: self.drums.as_ref().map(|d| d.notes().to_vec()).unwrap_or_default(),
            drum_source: self.drums.as_ref().map(DrumTrack::source),
        }
    }
}
