//! Deterministic stand-in for a trained melody/drum model.
//!
//! Melodies come from a seeded random walk whose steps are drawn from the
//! primer's own intervals, snapped to the primer's key and kept within five
//! semitones of the primer's range. Durations are drawn from the primer's
//! durations as a shuffled bag, so every full pass over the bag reproduces
//! the primer's note density exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    infer_key, DrumStep, Generated, GeneratorKind, GeneratorPlugin, GeneratorRequest, GeneratorResponse, NoteEvent,
    Primer,
};
use crate::model::{Instrument, Pitch};

/// Semitones the walk may stray beyond the primer's lowest/highest pitch.
pub const RANGE_MARGIN: i32 = 5;

const FALLBACK_STEPS: [i32; 4] = [-2, -1, 1, 2];

#[derive(Debug, Clone, Copy, Default)]
pub struct StubGenerator;

impl GeneratorPlugin for StubGenerator {
    fn name(&self) -> &str {
        "stub"
    }

    fn supports(&self, _kind: GeneratorKind) -> bool {
        true
    }

    fn generate(&self, req: &GeneratorRequest) -> GeneratorResponse {
        match req.kind() {
            GeneratorKind::Melody => stub_generate(req),
            GeneratorKind::Drums => stub_generate_drums(req),
        }
    }
}

fn rng_for(req: &GeneratorRequest) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(req.seed.unwrap_or(0))
}

/// Continues a melody primer. Empty primers yield an empty response.
pub fn stub_generate(req: &GeneratorRequest) -> GeneratorResponse {
    let Primer::Melody { notes: primer } = &req.primer else {
        return GeneratorResponse::empty(GeneratorKind::Melody, req.id);
    };
    let pitches: Vec<Pitch> = primer.iter().map(|n| n.pitch).collect();
    let Ok(key) = infer_key::<f64>(&pitches) else {
        return GeneratorResponse::empty(GeneratorKind::Melody, req.id);
    };
    let in_scale = key.pitch_classes();

    let values: Vec<i32> = pitches.iter().map(|p| i32::from(p.value())).collect();
    let lo = (values.iter().min().copied().unwrap_or(0) - RANGE_MARGIN).max(0);
    let hi = (values.iter().max().copied().unwrap_or(127) + RANGE_MARGIN).min(127);

    let steps: Vec<i32> =
        if values.len() < 2 { FALLBACK_STEPS.to_vec() } else { values.windows(2).map(|w| w[1] - w[0]).collect() };
    let durations: Vec<u32> = primer.iter().map(|n| n.duration_sixteenths.max(1)).collect();

    let mut rng = rng_for(req);
    let mut bag: Vec<u32> = Vec::with_capacity(durations.len());
    let mut previous = *values.last().expect("primer is non-empty");
    let mut notes = Vec::with_capacity(req.requested_length);
    for _ in 0..req.requested_length {
        let step = steps[rng.random_range(0..steps.len())];
        let candidate = (previous + step).clamp(lo, hi);
        let pitch = snap_to_scale(candidate, lo, hi, &in_scale);
        previous = pitch;

        if bag.is_empty() {
            bag.extend_from_slice(&durations);
            bag.shuffle(&mut rng);
        }
        let duration = bag.pop().expect("bag refilled from non-empty primer");
        notes.push(NoteEvent::new(Pitch::saturating(i64::from(pitch)), duration));
    }
    GeneratorResponse { request_id: req.id, output: Generated::Melody { notes } }
}

/// Nearest in-scale pitch to `candidate` within `[lo, hi]`; ties go down.
///
/// Any six consecutive semitones contain a diatonic pitch, and the window is
/// always at least that wide, so a match exists.
fn snap_to_scale(candidate: i32, lo: i32, hi: i32, in_scale: &[bool; 12]) -> i32 {
    let member = |p: i32| (lo..=hi).contains(&p) && in_scale[p.rem_euclid(12) as usize];
    (0..=12).flat_map(|d| [candidate - d, candidate + d]).find(|&p| member(p)).unwrap_or(candidate)
}

/// Resamples a drum primer: each voice hits each step with probability equal
/// to its density in the primer. The kick on step 0 is always kept.
pub fn stub_generate_drums(req: &GeneratorRequest) -> GeneratorResponse {
    let Primer::Drums { steps: primer, .. } = &req.primer else {
        return GeneratorResponse::empty(GeneratorKind::Drums, req.id);
    };
    let densities: Vec<(Instrument, f64)> = DrumStep::VOICES
        .iter()
        .map(|&v| {
            let hits = primer.iter().filter(|s| s.contains(v)).count();
            let p = if primer.is_empty() { 0.0 } else { hits as f64 / primer.len() as f64 };
            (v, p)
        })
        .collect();

    let mut rng = rng_for(req);
    let steps = (0..req.requested_length)
        .map(|i| {
            let mut step = DrumStep::EMPTY;
            for &(voice, p) in &densities {
                if rng.random::<f64>() < p {
                    step.insert(voice);
                }
            }
            if i == 0 {
                step.insert(Instrument::Kick);
            }
            step
        })
        .collect();
    GeneratorResponse { request_id: req.id, output: Generated::Drums { steps } }
}
