//! Key estimation by matching a pitch-class histogram against binary scale
//! templates.

use serde::{Deserialize, Serialize};

use super::GeneratorError;
use crate::model::Pitch;
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Major,
    NaturalMinor,
}

impl Scale {
    /// Candidate order; earlier wins ties.
    pub const ALL: [Scale; 2] = [Scale::Major, Scale::NaturalMinor];

    pub const fn intervals(self) -> [u8; 7] {
        match self {
            Scale::Major => [0, 2, 4, 5, 7, 9, 11],
            Scale::NaturalMinor => [0, 2, 3, 5, 7, 8, 10],
        }
    }

    /// Membership of each pitch class in this scale built on `tonic`.
    pub fn template(self, tonic: u8) -> [bool; 12] {
        let mut t = [false; 12];
        for i in self.intervals() {
            t[usize::from((tonic + i) % 12)] = true;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyEstimate<T> {
    pub tonic: u8,
    pub scale: Scale,
    /// Fraction of the input notes whose pitch class lies in the scale.
    pub score: T,
}

impl<T> KeyEstimate<T> {
    pub fn pitch_classes(&self) -> [bool; 12] {
        self.scale.template(self.tonic)
    }

    pub fn contains(&self, p: Pitch) -> bool {
        self.pitch_classes()[usize::from(p.pitch_class())]
    }
}

/// Best of the 24 major/natural-minor keys for `pitches`.
///
/// The score is the dot product of the normalized pitch-class histogram with
/// the 0/1 template. Ties go to the lower tonic, then major before minor, so
/// relative keys (identical templates) always resolve to the major one.
pub fn infer_key<T: Scalar>(pitches: &[Pitch]) -> Result<KeyEstimate<T>, GeneratorError> {
    if pitches.is_empty() {
        return Err(GeneratorError::EmptyInput);
    }
    let mut histogram = [0u64; 12];
    for p in pitches {
        histogram[usize::from(p.pitch_class())] += 1;
    }
    // integer dot products keep ties exact; normalizing is a common positive
    // factor and does not change the ranking
    let mut best: Option<(u64, u8, Scale)> = None;
    for tonic in 0..12u8 {
        for scale in Scale::ALL {
            let template = scale.template(tonic);
            let dot: u64 = histogram.iter().zip(template).filter(|(_, m)| *m).map(|(c, _)| c).sum();
            if best.is_none_or(|(b, _, _)| dot > b) {
                best = Some((dot, tonic, scale));
            }
        }
    }
    let (dot, tonic, scale) = best.expect("24 candidates evaluated");
    let score = T::count(dot) / T::count(pitches.len() as u64);
    Ok(KeyEstimate { tonic, scale, score })
}
