//! Grid geometry, tempo conversion, tap tempo and click-track generation.
//!
//! All functions here are pure and generic over the millisecond scalar.

use serde::{Deserialize, Serialize};

use crate::model::{Instrument, ModelError, Pitch, PlayableNote, SixteenthIndex, Tempo, TimeSignature, TrackKind};
use crate::num::{round_half_up, Scalar};

/// Gaps longer than this between taps start a new tap sequence.
pub const TAP_WINDOW_MS: f64 = 3000.0;

pub const CLICK1_PITCH: Pitch = Pitch::clamped(84);
pub const CLICK2_PITCH: Pitch = Pitch::clamped(79);
pub const CLICK3_PITCH: Pitch = Pitch::clamped(72);

/// Loop structure: bars, meter and tempo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec<T> {
    num_bars: u32,
    time_signature: TimeSignature,
    tempo: Tempo<T>,
}

impl<T: Scalar> LoopSpec<T> {
    pub fn new(num_bars: u32, time_signature: TimeSignature, tempo: Tempo<T>) -> Result<Self, ModelError> {
        if num_bars == 0 {
            return Err(ModelError::NoBars);
        }
        Ok(LoopSpec { num_bars, time_signature, tempo })
    }

    /// Validates raw integers, e.g. from a control surface.
    pub fn from_parts(bars: i64, numerator: i64, denominator: i64, qpm: T) -> Result<Self, ModelError> {
        let ts = TimeSignature::new(numerator, denominator)?;
        let bars = u32::try_from(bars).map_err(|_| ModelError::NoBars)?;
        LoopSpec::new(bars, ts, Tempo::new(qpm)?)
    }

    #[inline]
    pub fn num_bars(&self) -> u32 {
        self.num_bars
    }

    #[inline]
    pub fn time_signature(&self) -> TimeSignature {
        self.time_signature
    }

    #[inline]
    pub fn tempo(&self) -> Tempo<T> {
        self.tempo
    }

    pub fn with_tempo(self, tempo: Tempo<T>) -> Self {
        LoopSpec { tempo, ..self }
    }

    pub fn sixteenths_per_bar(&self) -> u32 {
        sixteenths_per_bar(self.time_signature)
    }

    pub fn sequence_length(&self) -> u32 {
        self.num_bars * self.sixteenths_per_bar()
    }

    pub fn sixteenth_ms(&self) -> T {
        sixteenth_duration_ms(self.tempo)
    }

    pub fn loop_duration_ms(&self) -> T {
        self.sixteenth_ms() * T::count(u64::from(self.sequence_length()))
    }
}

impl<T: Scalar> Default for LoopSpec<T> {
    fn default() -> Self {
        LoopSpec { num_bars: 1, time_signature: TimeSignature::COMMON, tempo: Tempo::default() }
    }
}

pub fn sixteenths_per_bar(ts: TimeSignature) -> u32 {
    u32::from(ts.numerator()) * 16 / u32::from(ts.denominator())
}

/// Spacing of beat clicks in sixteenths: 4 for x/4, 2 for x/8, 1 for x/16.
pub fn click_period(ts: TimeSignature) -> u32 {
    16 / u32::from(ts.denominator())
}

pub fn sixteenth_duration_ms<T: Scalar>(tempo: Tempo<T>) -> T {
    T::lit(60_000.0) / (tempo.qpm() * T::lit(4.0))
}

/// Grid index and fractional phase within the current sixteenth.
pub fn position_at<T: Scalar>(elapsed_ms: T, spec: &LoopSpec<T>) -> (SixteenthIndex, T) {
    let steps = elapsed_ms.max(T::zero()) / spec.sixteenth_ms();
    let whole = steps.floor();
    let phase = steps - whole;
    let index = whole.to_u64().unwrap_or(0) % u64::from(spec.sequence_length());
    (SixteenthIndex(index as u32), phase)
}

/// Nearest grid index (half rounds up), wrapped to the sequence.
pub fn quantize<T: Scalar>(onset_ms: T, spec: &LoopSpec<T>) -> SixteenthIndex {
    let steps = quantize_steps(onset_ms, spec.sixteenth_ms());
    SixteenthIndex((steps % u64::from(spec.sequence_length())) as u32)
}

/// Unwrapped number of sixteenths nearest to `duration_ms`.
pub fn quantize_steps<T: Scalar>(duration_ms: T, sixteenth_ms: T) -> u64 {
    round_half_up(duration_ms.max(T::zero()) / sixteenth_ms)
}

/// Estimates tempo from tap times.
///
/// Only the trailing run of taps whose consecutive gaps are all within
/// [`TAP_WINDOW_MS`] counts. Returns `None` when that run has fewer than two
/// taps, meaning "leave the tempo unchanged".
pub fn tap_tempo<T: Scalar>(tap_timestamps_ms: &[T]) -> Option<Tempo<T>> {
    let run = trailing_run(tap_timestamps_ms);
    if run.len() < 2 {
        return None;
    }
    let span = run[run.len() - 1] - run[0];
    let mean = span / T::count((run.len() - 1) as u64);
    // Also rejects NaN.
    if mean.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    Some(Tempo::clamped(T::lit(60_000.0) / mean))
}

fn trailing_run<T: Scalar>(taps: &[T]) -> &[T] {
    let window = T::lit(TAP_WINDOW_MS);
    let mut start = taps.len().saturating_sub(1);
    while start > 0 {
        let gap = taps[start] - taps[start - 1];
        if gap > window || gap < T::zero() {
            break;
        }
        start -= 1;
    }
    &taps[start..]
}

/// Stateful tap button: remembers recent taps and reports a tempo once two
/// taps fall inside the window.
#[derive(Debug, Clone, Default)]
pub struct TapTempo<T> {
    taps: Vec<T>,
}

impl<T: Scalar> TapTempo<T> {
    /// Taps beyond this many are forgotten.
    const MAX_TAPS: usize = 8;

    pub fn new() -> Self {
        TapTempo { taps: Vec::new() }
    }

    pub fn tap(&mut self, now_ms: T) -> Option<Tempo<T>> {
        if let Some(&last) = self.taps.last() {
            let gap = now_ms - last;
            if gap > T::lit(TAP_WINDOW_MS) || gap < T::zero() {
                self.taps.clear();
            }
        }
        self.taps.push(now_ms);
        if self.taps.len() > Self::MAX_TAPS {
            self.taps.remove(0);
        }
        tap_tempo(&self.taps)
    }
}

/// Metronome events for one pass of the loop.
///
/// Click 1 marks the sequence start, click 2 the first sixteenth of every other
/// bar, click 3 every beat (period set by the denominator) where no bar-start
/// click already sounds. Output is position-ordered.
pub fn click_events<T: Scalar>(spec: &LoopSpec<T>) -> Vec<PlayableNote> {
    let spb = spec.sixteenths_per_bar();
    let period = click_period(spec.time_signature());
    let len = spec.sequence_length();
    let click = |instrument, pitch, pos| PlayableNote::new(TrackKind::Click, pitch, instrument, SixteenthIndex(pos), 1);
    (0..len)
        .filter_map(|pos| {
            if pos == 0 {
                Some(click(Instrument::Click1, CLICK1_PITCH, pos))
            } else if pos % spb == 0 {
                Some(click(Instrument::Click2, CLICK2_PITCH, pos))
            } else if (pos % spb).is_multiple_of(period) {
                Some(click(Instrument::Click3, CLICK3_PITCH, pos))
            } else {
                None
            }
        })
        .collect()
}
