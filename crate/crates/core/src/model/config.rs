use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub token_embedding: usize,
    pub constraint_embedding: usize,
    pub constraint_hidden: usize,
    pub token_hidden: usize,
    /// Layers in each LSTM stack.
    pub layers: usize,
    /// Dropout rate on the token stack input.
    pub dropout: f64,
}

impl ModelConfig {
    /// Embeddings of 20, hidden size 256, two layers, 20% dropout.
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            token_embedding: 20,
            constraint_embedding: 20,
            constraint_hidden: 256,
            token_hidden: 256,
            layers: 2,
            dropout: 0.2,
        }
    }

    /// Same hidden size for both stacks.
    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.constraint_hidden = hidden;
        self.token_hidden = hidden;
        self
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.vocab_size,
            self.token_embedding,
            self.constraint_embedding,
            self.constraint_hidden,
            self.token_hidden,
            self.layers,
        ];
        if dims.contains(&0) {
            return Err(invalid("model dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid("dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Width of the token stack input: token embedding plus constraint summary.
    pub fn token_input(&self) -> usize {
        self.token_embedding + self.constraint_hidden
    }
}
