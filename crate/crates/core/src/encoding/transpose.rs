use alloc::vec::Vec;

use super::{Corpus, Letter, MelodySequence, Pitch, Token};
use crate::error::{Error, Result};

/// A spelled interval: letter-name steps and exact semitones.
/// A major second up is `(1, 2)`, a minor third down is `(-2, -3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    pub diatonic: i32,
    pub chromatic: i32,
}

impl Interval {
    pub const fn new(diatonic: i32, chromatic: i32) -> Self {
        Self {
            diatonic,
            chromatic,
        }
    }

    pub fn inverse(self) -> Self {
        Self::new(-self.diatonic, -self.chromatic)
    }
}

pub(crate) fn transpose_pitch(p: Pitch, iv: Interval) -> Result<Pitch> {
    let target = p.diatonic_index() + iv.diatonic;
    let octave = target.div_euclid(7);
    let letter = Letter::from_step(target);
    let natural = 12 * (octave + 1) + letter.natural_semitone();
    let accidental = p.midi() + iv.chromatic - natural;
    if !(-2..=2).contains(&accidental) {
        return Err(Error::OutOfSpelling(alloc::format!(
            "{p} moved by {} steps and {} semitones",
            iv.diatonic,
            iv.chromatic
        )));
    }
    Pitch::new(letter, accidental as i8, octave)
}

/// Moves every note by `interval`; holds are unchanged.
pub fn transpose(seq: &MelodySequence, interval: Interval) -> Result<MelodySequence> {
    let tokens = seq
        .tokens()
        .iter()
        .map(|t| match t {
            Token::Note(p) => transpose_pitch(*p, interval).map(Token::Note),
            other => Ok(*other),
        })
        .collect::<Result<Vec<_>>>()?;
    MelodySequence::new(tokens)
}

/// Letter steps of the conventional interval spelling for each semitone count
/// in an octave (tritone as augmented fourth).
const CONVENTIONAL_STEPS: [i32; 12] = [0, 1, 1, 2, 2, 3, 3, 4, 5, 5, 6, 6];

fn conventional_interval(semitones: i32) -> Interval {
    let steps = CONVENTIONAL_STEPS[semitones.unsigned_abs() as usize % 12];
    Interval::new(steps * semitones.signum(), semitones)
}

/// Spells a chromatic shift of `seq` with the fewest accidentals; ties go to
/// the conventional interval spelling.
fn simplest_transposition(seq: &MelodySequence, semitones: i32) -> Option<MelodySequence> {
    let base = conventional_interval(semitones);
    let mut best: Option<(u32, MelodySequence)> = None;
    for delta in [0, -1, 1] {
        let iv = Interval::new(base.diatonic + delta, semitones);
        let Ok(candidate) = transpose(seq, iv) else { continue };
        let cost = candidate
            .pitches()
            .map(|p| p.accidental().unsigned_abs() as u32)
            .sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, candidate));
        }
    }
    best.map(|(_, s)| s)
}

/// Result of [`augment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub corpus: Corpus,
    /// Transpositions dropped for leaving the range or the spelling bounds.
    pub omitted: usize,
}

/// All transpositions by -11..=11 semitones that stay inside `range`
/// (inclusive, by MIDI number). Defaults to the corpus' own range. The
/// original sequences come first, in order.
pub fn augment(corpus: &Corpus, range: Option<(Pitch, Pitch)>) -> Augmented {
    let Some((lo, hi)) = range.or_else(|| corpus.pitch_range()) else {
        return Augmented {
            corpus: corpus.clone(),
            omitted: 0,
        };
    };
    let (lo, hi) = (lo.midi(), hi.midi());
    let mut sequences = corpus.sequences.clone();
    let mut omitted = 0;
    for shift in (-11..=11).filter(|s| *s != 0) {
        for seq in &corpus.sequences {
            let fits = seq
                .pitches()
                .all(|p| (lo..=hi).contains(&(p.midi() + shift)));
            match simplest_transposition(seq, shift) {
                Some(t) if fits => sequences.push(t),
                _ => omitted += 1,
            }
        }
    }
    Augmented {
        corpus: Corpus::new(corpus.name.clone(), sequences),
        omitted,
    }
}
