//! Melodico-rhythmic encoding of monophonic melodies.
//!
//! Each sixteenth note is one token: a note name when a note starts, `__`
//! while the previous note is held. `START`, `END` and `NC` are reserved for
//! padding and for the constraint sequence.

mod corpus;
mod token;
mod transpose;
mod vocab;

pub use corpus::{decode_notes, encode_notes, parse_corpus, Corpus, MelodySequence};
pub use token::{Letter, Pitch, Token, HOLD_SURFACE};
pub use transpose::{augment, transpose, Augmented, Interval};
pub use vocab::Vocabulary;
