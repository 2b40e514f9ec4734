//! The two-stack architecture.
//!
//! A constraint LSTM stack runs backward over `c_N .. c_1`; its top-layer
//! output after consuming `c_t` is `o_t`, a summary of every constraint at or
//! after position `t`. A token LSTM stack predicts `s_t` from
//! `[embed(s_{t-1}) | o_t]`, with dropout on that concatenation during
//! training. Both stacks start from zero state.
//!
//! Training goes through the recording [`Tape`](crate::numerics::Tape) in
//! batches; sampling and diagnostics use the unbatched inference path in
//! [`infer`], which evaluates the same arithmetic without recording.

mod config;
mod graph;
pub mod infer;
mod params;

pub use config::ModelConfig;
pub use graph::LossStats;
pub use infer::{ConstraintSummary, HiddenState, StepDistribution};
pub use params::{LstmIds, ModelParams};

use crate::encoding::Vocabulary;
use crate::error::{invalid, Result};

/// Everything needed to run a trained model: vocabulary and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocabulary: Vocabulary,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(vocabulary: Vocabulary, params: ModelParams) -> Result<Self> {
        if vocabulary.len() != params.config().vocab_size {
            return Err(invalid(alloc::format!(
                "vocabulary has {} tokens but the model expects {}",
                vocabulary.len(),
                params.config().vocab_size
            )));
        }
        Ok(Self { vocabulary, params })
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }
}
