//! Shared domain vocabulary: pitches, grid positions, notes, tracks and modes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("pitch {0} outside 0..=127")]
    PitchOutOfRange(i64),
    #[error("velocity {0} outside 1..=127")]
    VelocityOutOfRange(i64),
    #[error("invalid time signature {numerator}/{denominator}")]
    InvalidTimeSignature { numerator: i64, denominator: i64 },
    #[error("tempo {0} qpm outside {min}..={max}", min = MIN_QPM, max = MAX_QPM)]
    TempoOutOfRange(f64),
    #[error("number of bars must be at least 1")]
    NoBars,
    #[error("release at {release} ms is not after onset at {onset} ms")]
    ReleaseBeforeOnset { onset: f64, release: f64 },
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("unknown instrument {0:?}")]
    UnknownInstrument(String),
}

/// MIDI note number, 0–127.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Pitch(u8);

impl Pitch {
    pub const MIN: Pitch = Pitch(0);
    pub const MAX: Pitch = Pitch(127);
    pub const MIDDLE_C: Pitch = Pitch(60);

    pub fn new(value: i64) -> Result<Self, ModelError> {
        if (0..=127).contains(&value) {
            Ok(Pitch(value as u8))
        } else {
            Err(ModelError::PitchOutOfRange(value))
        }
    }

    /// Clamps into range; usable in constants.
    pub const fn clamped(value: u8) -> Self {
        if value > 127 {
            Pitch(127)
        } else {
            Pitch(value)
        }
    }

    /// Like [`Pitch::new`] but clamps into range.
    pub fn saturating(value: i64) -> Self {
        Pitch(value.clamp(0, 127) as u8)
    }

    #[inline]
    pub const fn value(self) -> u8 {
        self.0
    }

    /// Shifts by `semitones`, clamping into 0–127.
    pub fn transpose(self, semitones: i32) -> Pitch {
        Pitch::saturating(i64::from(self.0) + i64::from(semitones))
    }

    /// Pitch class, 0 = C.
    #[inline]
    pub const fn pitch_class(self) -> u8 {
        self.0 % 12
    }
}

impl TryFrom<u8> for Pitch {
    type Error = ModelError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Pitch::new(i64::from(v))
    }
}

impl From<Pitch> for u8 {
    fn from(p: Pitch) -> u8 {
        p.0
    }
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Free-function form of [`Pitch::transpose`].
pub fn transpose(p: Pitch, semitones: i32) -> Pitch {
    p.transpose(semitones)
}

/// Free-function form of [`Pitch::pitch_class`].
pub fn pitch_class(p: Pitch) -> u8 {
    p.pitch_class()
}

/// Velocity of a sounding note, 1–127. Zero means note-off on the wire and is
/// therefore not a valid `Velocity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Velocity(u8);

impl Velocity {
    pub const DEFAULT: Velocity = Velocity(100);

    pub fn new(value: i64) -> Result<Self, ModelError> {
        if (1..=127).contains(&value) {
            Ok(Velocity(value as u8))
        } else {
            Err(ModelError::VelocityOutOfRange(value))
        }
    }

    #[inline]
    pub const fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Velocity {
    type Error = ModelError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Velocity::new(i64::from(v))
    }
}

impl From<Velocity> for u8 {
    fn from(v: Velocity) -> u8 {
        v.0
    }
}

/// A bar holds `numerator` beats of `1/denominator`; the denominator is 4, 8
/// or 16 so that every bar is a whole number of sixteenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTimeSignature", into = "RawTimeSignature")]
pub struct TimeSignature {
    numerator: u8,
    denominator: u8,
}

#[derive(Serialize, Deserialize)]
struct RawTimeSignature {
    numerator: u8,
    denominator: u8,
}

impl TryFrom<RawTimeSignature> for TimeSignature {
    type Error = ModelError;
    fn try_from(raw: RawTimeSignature) -> Result<Self, ModelError> {
        TimeSignature::new(i64::from(raw.numerator), i64::from(raw.denominator))
    }
}

impl From<TimeSignature> for RawTimeSignature {
    fn from(ts: TimeSignature) -> Self {
        RawTimeSignature { numerator: ts.numerator, denominator: ts.denominator }
    }
}

impl TimeSignature {
    pub const COMMON: TimeSignature = TimeSignature { numerator: 4, denominator: 4 };
    pub const MAX_NUMERATOR: u8 = 16;

    pub fn new(numerator: i64, denominator: i64) -> Result<Self, ModelError> {
        let err = ModelError::InvalidTimeSignature { numerator, denominator };
        if !matches!(denominator, 4 | 8 | 16) {
            return Err(err);
        }
        if !(1..=i64::from(Self::MAX_NUMERATOR)).contains(&numerator) {
            return Err(err);
        }
        if (numerator * 16) % denominator != 0 {
            return Err(err);
        }
        Ok(TimeSignature { numerator: numerator as u8, denominator: denominator as u8 })
    }

    #[inline]
    pub const fn numerator(self) -> u8 {
        self.numerator
    }

    #[inline]
    pub const fn denominator(self) -> u8 {
        self.denominator
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl FromStr for TimeSignature {
    type Err = ModelError;

    /// Parses `"7/8"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidTimeSignature { numerator: -1, denominator: -1 };
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        TimeSignature::new(n, d)
    }
}

pub const MIN_QPM: f64 = 20.0;
pub const MAX_QPM: f64 = 400.0;

/// Playback speed in quarter notes per minute.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Tempo<T> {
    qpm: T,
}

impl<T: Scalar> Tempo<T> {
    pub fn new(qpm: T) -> Result<Self, ModelError> {
        if qpm >= T::lit(MIN_QPM) && qpm <= T::lit(MAX_QPM) {
            Ok(Tempo { qpm })
        } else {
            Err(ModelError::TempoOutOfRange(qpm.to_f64().unwrap_or(f64::NAN)))
        }
    }

    /// Clamps into the operating range. NaN maps to the minimum.
    pub fn clamped(qpm: T) -> Self {
        let lo = T::lit(MIN_QPM);
        let hi = T::lit(MAX_QPM);
        let qpm = if qpm.is_nan() { lo } else { qpm.max(lo).min(hi) };
        Tempo { qpm }
    }

    #[inline]
    pub fn qpm(self) -> T {
        self.qpm
    }
}

impl<T: Scalar> Default for Tempo<T> {
    fn default() -> Self {
        Tempo { qpm: T::lit(120.0) }
    }
}

/// Position on the loop grid, in sixteenths from the start of the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SixteenthIndex(pub u32);

impl SixteenthIndex {
    #[inline]
    pub const fn value(self) -> u32 {
        self.0
    }
}

impl fmt::Display for SixteenthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackKind {
    Click,
    Bass,
    Chords,
    Drums,
}

/// Sound source tag. The integer wire ids are part of the `/play/note`
/// contract and must not be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Click1,
    Click2,
    Click3,
    Bass,
    Keys,
    Kick,
    Snare,
    HiHat,
    Lead,
    Piano,
}

impl Instrument {
    pub const ALL: [Instrument; 10] = [
        Instrument::Click1,
        Instrument::Click2,
        Instrument::Click3,
        Instrument::Bass,
        Instrument::Keys,
        Instrument::Kick,
        Instrument::Snare,
        Instrument::HiHat,
        Instrument::Lead,
        Instrument::Piano,
    ];

    pub const fn wire_id(self) -> i32 {
        match self {
            Instrument::Click1 => 0,
            Instrument::Click2 => 1,
            Instrument::Click3 => 2,
            Instrument::Bass => 3,
            Instrument::Keys => 4,
            Instrument::Kick => 5,
            Instrument::Snare => 6,
            Instrument::HiHat => 7,
            Instrument::Lead => 8,
            Instrument::Piano => 9,
        }
    }

    pub fn from_wire(id: i32) -> Option<Instrument> {
        Instrument::ALL.iter().copied().find(|i| i.wire_id() == id)
    }

    pub const fn name(self) -> &'static str {
        match self {
            Instrument::Click1 => "click1",
            Instrument::Click2 => "click2",
            Instrument::Click3 => "click3",
            Instrument::Bass => "bass",
            Instrument::Keys => "keys",
            Instrument::Kick => "kick",
            Instrument::Snare => "snare",
            Instrument::HiHat => "hihat",
            Instrument::Lead => "lead",
            Instrument::Piano => "piano",
        }
    }

    pub const fn is_drum(self) -> bool {
        matches!(self, Instrument::Kick | Instrument::Snare | Instrument::HiHat)
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Instrument {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Instrument::ALL
            .iter()
            .copied()
            .find(|i| i.name() == s)
            .ok_or_else(|| ModelError::UnknownInstrument(s.to_owned()))
    }
}

/// One schedulable loop event.
///
/// Field order matters: the derived `Ord` sorts by position first, which is
/// what the note store relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlayableNote {
    pub position: SixteenthIndex,
    pub track: TrackKind,
    pub instrument: Instrument,
    pub pitch: Pitch,
    pub duration_sixteenths: u32,
}

impl PlayableNote {
    pub fn new(
        track: TrackKind,
        pitch: Pitch,
        instrument: Instrument,
        position: SixteenthIndex,
        duration_sixteenths: u32,
    ) -> Self {
        PlayableNote { position, track, instrument, pitch, duration_sixteenths: duration_sixteenths.max(1) }
    }

    /// Position is on the grid and the note sustains past the loop point at
    /// most once.
    pub fn fits(&self, sequence_length: u32) -> bool {
        self.position.0 < sequence_length
            && self.duration_sixteenths >= 1
            && u64::from(self.position.0) + u64::from(self.duration_sixteenths) <= 2 * u64::from(sequence_length)
    }
}

/// An unquantized note from the performer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiveNote<T> {
    pub pitch: Pitch,
    pub velocity: Velocity,
    pub onset_ms: T,
    pub release_ms: Option<T>,
}

impl<T: Scalar> LiveNote<T> {
    pub fn new(pitch: Pitch, velocity: Velocity, onset_ms: T) -> Self {
        LiveNote { pitch, velocity, onset_ms, release_ms: None }
    }

    pub fn with_release(mut self, release_ms: T) -> Result<Self, ModelError> {
        if release_ms <= self.onset_ms {
            return Err(ModelError::ReleaseBeforeOnset {
                onset: self.onset_ms.to_f64().unwrap_or(f64::NAN),
                release: release_ms.to_f64().unwrap_or(f64::NAN),
            });
        }
        self.release_ms = Some(release_ms);
        Ok(self)
    }

    /// Same timing and velocity, different pitch.
    pub fn with_pitch(self, pitch: Pitch) -> Self {
        LiveNote { pitch, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bass,
    Chords,
    Improv,
    #[default]
    Free,
}

impl Mode {
    pub const fn name(self) -> &'static str {
        match self {
            Mode::Bass => "bass",
            Mode::Chords => "chords",
            Mode::Improv => "improv",
            Mode::Free => "free",
        }
    }

    /// Instrument used to echo the performer's notes in this mode.
    pub const fn echo_instrument(self) -> Instrument {
        match self {
            Mode::Bass => Instrument::Bass,
            Mode::Chords => Instrument::Keys,
            Mode::Improv => Instrument::Lead,
            Mode::Free => Instrument::Piano,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bass" => Ok(Mode::Bass),
            "chords" => Ok(Mode::Chords),
            "improv" => Ok(Mode::Improv),
            "free" => Ok(Mode::Free),
            _ => Err(ModelError::UnknownMode(s.to_owned())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: i64) -> Pitch {
        Pitch::new(v).unwrap()
    }

    #[test]
    fn transpose_examples() {
        assert_eq!(transpose(p(60), 12), p(72));
        assert_eq!(transpose(p(60), 0), p(60));
        assert_eq!(transpose(p(126), 12), p(127));
        assert_eq!(transpose(p(3), -12), p(0));
    }

    #[test]
    fn pitch_class_examples() {
        assert_eq!(pitch_class(p(60)), 0);
        assert_eq!(pitch_class(p(61)), 1);
        assert_eq!(pitch_class(p(0)), 0);
    }

    #[test]
    fn ranges() {
        assert!(Pitch::new(128).is_err());
        assert!(Pitch::new(-1).is_err());
        assert!(Velocity::new(0).is_err());
        assert!(Velocity::new(127).is_ok());
        assert!(Tempo::<f64>::new(19.9).is_err());
        assert!(Tempo::<f32>::new(400.0).is_ok());
        assert_eq!(Tempo::<f64>::clamped(1000.0).qpm(), 400.0);
    }

    #[test]
    fn time_signatures() {
        assert!(TimeSignature::new(4, 4).is_ok());
        assert!(TimeSignature::new(7, 8).is_ok());
        assert!(TimeSignature::new(4, 5).is_err());
        assert!(TimeSignature::new(0, 4).is_err());
        assert!(TimeSignature::new(17, 16).is_err());
        assert_eq!("6/8".parse::<TimeSignature>().unwrap(), TimeSignature::new(6, 8).unwrap());
        assert!("6-8".parse::<TimeSignature>().is_err());
        let json = serde_json::to_string(&TimeSignature::COMMON).unwrap();
        assert!(serde_json::from_str::<TimeSignature>(&json.replace('4', "5")).is_err());
    }

    #[test]
    fn live_note_release_must_follow_onset() {
        let n = LiveNote::new(p(60), Velocity::DEFAULT, 100.0_f64);
        assert!(n.with_release(100.0).is_err());
        assert_eq!(n.with_release(150.0).unwrap().release_ms, Some(150.0));
    }

    #[test]
    fn instrument_wire_ids_are_stable() {
        for (i, inst) in Instrument::ALL.iter().enumerate() {
            assert_eq!(inst.wire_id(), i as i32);
            assert_eq!(Instrument::from_wire(i as i32), Some(*inst));
            assert_eq!(inst.name().parse::<Instrument>().unwrap(), *inst);
        }
        assert_eq!(Instrument::from_wire(10), None);
    }

    #[test]
    fn playable_note_fit() {
        let n = PlayableNote::new(TrackKind::Bass, p(40), Instrument::Bass, SixteenthIndex(15), 17);
        assert!(n.fits(16));
        let n = PlayableNote { duration_sixteenths: 18, ..n };
        assert!(!n.fits(16));
        assert!(!PlayableNote { position: SixteenthIndex(16), ..n }.fits(16));
    }

    proptest! {
        #[test]
        fn transpose_monotone_and_identity(v in 0i64..=127, a in -200i32..200, b in -200i32..200) {
            let x = p(v);
            prop_assert_eq!(x.transpose(0), x);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(x.transpose(lo) <= x.transpose(hi));
        }
    }
}
