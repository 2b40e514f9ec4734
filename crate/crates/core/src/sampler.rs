//! Constrained left-to-right generation.
//!
//! One backward pass of the constraint stack produces `o_1 .. o_N`, then the
//! token stack samples `s_1 .. s_N` one step at a time: `2N` cell steps in
//! total, which every [`GenerationRecord`] reports.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::ConstraintSequence;
use crate::encoding::Vocabulary;
use crate::error::{invalid, Error, Result};
use crate::model::{Checkpoint, StepDistribution};

/// Positional constraints `{(i, c_i)}` for a sequence of `length` tokens.
/// Positions are 1-based; values are note or hold ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstraintSet {
    length: usize,
    pairs: Vec<(usize, usize)>,
}

impl ConstraintSet {
    pub fn empty(length: usize) -> Self {
        Self {
            length,
            pairs: Vec::new(),
        }
    }

    pub fn new(length: usize, mut pairs: Vec<(usize, usize)>, vocab: &Vocabulary) -> Result<Self> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(alloc::format!("position {} constrained twice", w[0].0)));
            }
        }
        for &(pos, id) in &pairs {
            if pos == 0 || pos > length {
                return Err(invalid(alloc::format!(
                    "constraint position {pos} outside 1..={length}"
                )));
            }
            if id >= vocab.len() || vocab.is_special(id) {
                return Err(invalid(alloc::format!(
                    "constraint value at position {pos} must be a note or hold"
                )));
            }
        }
        Ok(Self { length, pairs })
    }

    /// Parses `i:TOKEN` pairs separated by commas, e.g. `1:D4,9:G4`.
    /// Blank text is the empty set.
    pub fn parse(text: &str, length: usize, vocab: &Vocabulary) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (pos, tok) = item
                .split_once(':')
                .ok_or_else(|| invalid(alloc::format!("`{item}` is not of the form i:TOKEN")))?;
            let pos: usize = pos
                .trim()
                .parse()
                .map_err(|_| invalid(alloc::format!("bad constraint position `{pos}`")))?;
            pairs.push((pos, vocab.lookup(tok.trim())?));
        }
        Self::new(length, pairs, vocab)
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for (k, (pos, id)) in self.pairs.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{pos}:{}", vocab.surface(*id));
        }
        out
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Dense form with `NC` at unconstrained positions.
    pub fn to_constraint_sequence(&self, vocab: &Vocabulary) -> ConstraintSequence {
        let mut seq = ConstraintSequence::unconstrained(self.length, vocab);
        for &(pos, id) in &self.pairs {
            seq.ids[pos - 1] = id;
        }
        seq
    }

    pub fn satisfied_flags(&self, seq: &[usize]) -> Vec<bool> {
        self.pairs
            .iter()
            .map(|&(pos, id)| seq.get(pos - 1) == Some(&id))
            .collect()
    }

    pub fn is_satisfied_by(&self, seq: &[usize]) -> bool {
        self.pairs
            .iter()
            .all(|&(pos, id)| seq.get(pos - 1) == Some(&id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnforceMode {
    /// Sample freely from the constrained model.
    #[default]
    Learned,
    /// Overwrite constrained positions after sampling.
    Clamped,
}

impl EnforceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnforceMode::Learned => "learned",
            EnforceMode::Clamped => "clamped",
        }
    }
}

impl FromStr for EnforceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(EnforceMode::Learned),
            "clamped" => Ok(EnforceMode::Clamped),
            other => Err(invalid(alloc::format!(
                "unknown mode `{other}` (expected learned or clamped)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    /// `s_1 .. s_N`.
    pub sequence: Vec<usize>,
    /// `distributions[t]` is the (tempered) distribution `s_{t+1}` was drawn from.
    pub distributions: Vec<StepDistribution>,
    pub constraint_calls: usize,
    pub token_calls: usize,
    pub seed: u64,
    pub temperature: f64,
    pub mode: EnforceMode,
    /// `END` was emitted before the last position.
    pub early_end: bool,
}

/// Generates `cs.length()` tokens with a fresh generator seeded by `seed`.
pub fn generate(
    checkpoint: &Checkpoint,
    cs: &ConstraintSet,
    temperature: f64,
    seed: u64,
    mode: EnforceMode,
) -> Result<GenerationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = generate_with_rng(checkpoint, cs, temperature, mode, &mut rng)?;
    record.seed = seed;
    Ok(record)
}

/// Like [`generate`] but drawing from a caller-supplied generator, so that
/// many samples can share one stream. `seed` in the record is 0.
pub fn generate_with_rng<R: Rng + ?Sized>(
    checkpoint: &Checkpoint,
    cs: &ConstraintSet,
    temperature: f64,
    mode: EnforceMode,
    rng: &mut R,
) -> Result<GenerationRecord> {
    let n = cs.length();
    if n == 0 {
        return Err(invalid("generation length must be positive"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(invalid("temperature must be positive"));
    }
    let vocab = &checkpoint.vocabulary;
    let params = &checkpoint.params;
    let constraints = cs.to_constraint_sequence(vocab);
    let summary = params.constraint_rnn_forward(&constraints.ids)?;

    let mut state = params.token_initial_state();
    let mut prev = vocab.start();
    let mut sequence = Vec::with_capacity(n);
    let mut distributions = Vec::with_capacity(n);
    let mut token_calls = 0;
    for t in 1..=n {
        let logits = params.token_logits(prev, summary.at(t), &mut state, false, None)?;
        token_calls += 1;
        let dist = StepDistribution::from_logits(logits, temperature)?;
        let mut s = dist.sample(rng);
        if mode == EnforceMode::Clamped && constraints.ids[t - 1] != vocab.nc() {
            s = constraints.ids[t - 1];
        }
        distributions.push(dist);
        sequence.push(s);
        prev = s;
    }
    let early_end = sequence[..n - 1].contains(&vocab.end());
    Ok(GenerationRecord {
        sequence,
        distributions,
        constraint_calls: summary.cell_steps,
        token_calls,
        seed: 0,
        temperature,
        mode,
        early_end,
    })
}

/// Teacher-forced distributions of `seq` under the constraints `cs`.
pub fn step_distributions(
    checkpoint: &Checkpoint,
    cs: &ConstraintSet,
    seq: &[usize],
) -> Result<Vec<StepDistribution>> {
    if seq.len() != cs.length() {
        return Err(invalid(alloc::format!(
            "sequence of length {} for constraints of length {}",
            seq.len(),
            cs.length()
        )));
    }
    let vocab = &checkpoint.vocabulary;
    let constraints = cs.to_constraint_sequence(vocab);
    checkpoint
        .params
        .teacher_forced(&constraints.ids, seq, vocab.start())
}
