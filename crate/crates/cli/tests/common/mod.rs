#![allow(dead_code)]

use anticipation_core::encoding::parse_corpus;
use anticipation_core::{Checkpoint, ModelConfig, ModelParams, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn random_checkpoint(corpus: &str, seed: u64) -> Checkpoint {
    let vocab = Vocabulary::from_corpus(&parse_corpus(corpus, "t").unwrap());
    let cfg = ModelConfig::new(vocab.len()).with_hidden(8);
    let params = ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    Checkpoint::new(vocab, params).unwrap()
}

/// Zero output projection: every step is uniform over the vocabulary.
pub fn uniform_checkpoint(corpus: &str) -> Checkpoint {
    let mut cp = random_checkpoint(corpus, 0);
    cp.params.zero_output();
    cp
}

pub const TOY: &str = "C4 D4 E4 __ F4 G4 __ __\nE4 __ D4 C4 G4 __ F4 E4\nG4 F4 E4 D4 C4 __ __ __\n";
