//! Anticipation-RNN: left-to-right sequence generation that honours
//! positional constraints.
//!
//! A backward constraint LSTM reads the dense constraint sequence
//! `c_N .. c_1` and emits one summary vector per position. A forward token
//! LSTM consumes the previous token embedding concatenated with the summary
//! for the position it is about to predict. Sampling therefore costs one
//! constraint pass and one token pass over the sequence.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and the HTTP service live in the companion `anticipation-cli` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod diagnostics;
pub mod encoding;
mod error;
pub mod model;
pub mod numerics;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};

pub use dataset::{MaskPolicy, TrainingExample};
pub use model::{Checkpoint, ModelConfig, ModelParams, StepDistribution};
pub use sampler::{ConstraintSet, EnforceMode, GenerationRecord};
pub use encoding::{Corpus, MelodySequence, Pitch, Token, Vocabulary};
