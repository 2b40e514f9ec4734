//! Masked training examples.
//!
//! Every training melody window is paired with a constraint sequence that
//! reveals a random subset of its own tokens and hides the rest behind `NC`,
//! so the model learns to honour arbitrary positional constraints.

use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;

use crate::encoding::Vocabulary;
use crate::error::{invalid, Error, Result};

/// How constraint masks are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskPolicy {
    /// No position constrained: a plain language-model example.
    None,
    /// Every position constrained.
    All,
    /// Inclusion rate `rho ~ U(0,1)` per example, then `Bernoulli(rho)` bits.
    #[default]
    Uniform,
}

impl MaskPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskPolicy::None => "none",
            MaskPolicy::All => "all",
            MaskPolicy::Uniform => "uniform",
        }
    }
}

impl FromStr for MaskPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MaskPolicy::None),
            "all" => Ok(MaskPolicy::All),
            "uniform" => Ok(MaskPolicy::Uniform),
            other => Err(invalid(alloc::format!(
                "unknown mask policy `{other}` (expected none, all or uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub bits: Vec<bool>,
}

pub fn sample_mask<R: Rng + ?Sized>(len: usize, rng: &mut R, policy: MaskPolicy) -> Mask {
    let bits = match policy {
        MaskPolicy::None => vec![false; len],
        MaskPolicy::All => vec![true; len],
        MaskPolicy::Uniform => {
            let rho: f64 = rng.gen();
            (0..len).map(|_| rng.gen::<f64>() < rho).collect()
        }
    };
    Mask { bits }
}

/// Dense constraint sequence over the vocabulary, `NC` where unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstraintSequence {
    pub ids: Vec<usize>,
}

impl ConstraintSequence {
    pub fn unconstrained(len: usize, vocab: &Vocabulary) -> Self {
        Self {
            ids: vec![vocab.nc(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Every constrained position agrees with `targets`.
    pub fn is_coherent_with(&self, targets: &[usize], vocab: &Vocabulary) -> bool {
        self.ids.len() == targets.len()
            && self
                .ids
                .iter()
                .zip(targets)
                .all(|(&c, &s)| c == vocab.nc() || c == s)
    }
}

/// `c_i = s_i` where the mask bit is set, `NC` elsewhere.
pub fn apply_mask(seq: &[usize], mask: &Mask, vocab: &Vocabulary) -> Result<ConstraintSequence> {
    if seq.len() != mask.bits.len() {
        return Err(invalid(alloc::format!(
            "sequence of length {} with a mask of length {}",
            seq.len(),
            mask.bits.len()
        )));
    }
    Ok(ConstraintSequence {
        ids: seq
            .iter()
            .zip(&mask.bits)
            .map(|(&s, &m)| if m { s } else { vocab.nc() })
            .collect(),
    })
}

/// One window of a melody: inputs `s_0..s_{N-1}` with `s_0 = START`,
/// constraints `c_1..c_N` and targets `s_1..s_N`. Positions after `END` are
/// padding and excluded from the loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub input_ids: Vec<usize>,
    pub constraint_ids: Vec<usize>,
    pub target_ids: Vec<usize>,
    pub valid: Vec<bool>,
}

impl TrainingExample {
    /// Builds an example from `targets` (at most `window` real tokens),
    /// appending `END` when there is room.
    pub fn from_window(
        targets: &[usize],
        window: usize,
        mask: &Mask,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        if targets.is_empty() || targets.len() > window || mask.bits.len() != window {
            return Err(invalid("window, targets and mask lengths disagree"));
        }
        let real = targets.len();
        let mut target_ids = targets.to_vec();
        let mut valid = vec![true; real];
        if real < window {
            target_ids.push(vocab.end());
            valid.push(true);
            target_ids.resize(window, vocab.end());
            valid.resize(window, false);
        }
        // Only real tokens may be constrained.
        let bits = mask
            .bits
            .iter()
            .enumerate()
            .map(|(i, &b)| b && i < real)
            .collect();
        let constraint = apply_mask(&target_ids, &Mask { bits }, vocab)?;
        let mut input_ids = Vec::with_capacity(window);
        input_ids.push(vocab.start());
        input_ids.extend_from_slice(&target_ids[..window - 1]);
        Ok(Self {
            input_ids,
            constraint_ids: constraint.ids,
            target_ids,
            valid,
        })
    }

    pub fn len(&self) -> usize {
        self.target_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_ids.is_empty()
    }

    pub fn valid_positions(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Splits each encoded melody into windows of `window` tokens and draws a
/// fresh mask per window.
pub fn make_examples<R: Rng + ?Sized>(
    sequences: &[Vec<usize>],
    vocab: &Vocabulary,
    window: usize,
    policy: MaskPolicy,
    rng: &mut R,
) -> Result<Vec<TrainingExample>> {
    if window < 2 {
        return Err(invalid("window must be at least 2"));
    }
    if sequences.is_empty() {
        return Err(invalid("cannot build examples from an empty corpus"));
    }
    let mut out = Vec::new();
    for seq in sequences {
        for chunk in seq.chunks(window) {
            let mask = sample_mask(window, rng, policy);
            out.push(TrainingExample::from_window(chunk, window, &mask, vocab)?);
        }
    }
    Ok(out)
}

/// Examples of one window length, with per-time-step accessors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub examples: Vec<TrainingExample>,
}

impl Batch {
    pub fn new(examples: Vec<TrainingExample>) -> Result<Self> {
        let Some(first) = examples.first() else {
            return Err(invalid("empty batch"));
        };
        let n = first.len();
        if examples.iter().any(|e| e.len() != n) {
            return Err(invalid("batch examples differ in length"));
        }
        Ok(Self { examples })
    }

    pub fn size(&self) -> usize {
        self.examples.len()
    }

    pub fn seq_len(&self) -> usize {
        self.examples[0].len()
    }

    pub fn inputs_at(&self, t: usize) -> Vec<usize> {
        self.examples.iter().map(|e| e.input_ids[t]).collect()
    }

    pub fn constraints_at(&self, t: usize) -> Vec<usize> {
        self.examples.iter().map(|e| e.constraint_ids[t]).collect()
    }

    /// Targets at step `t`; `None` for padding.
    pub fn targets_at(&self, t: usize) -> Vec<Option<usize>> {
        self.examples
            .iter()
            .map(|e| e.valid[t].then_some(e.target_ids[t]))
            .collect()
    }

    pub fn valid_positions(&self) -> usize {
        self.examples.iter().map(TrainingExample::valid_positions).sum()
    }
}

/// Consecutive groups of `size`; the last may be shorter.
pub fn batch(examples: &[TrainingExample], size: usize) -> Result<Vec<Batch>> {
    if size == 0 {
        return Err(invalid("batch size must be positive"));
    }
    examples
        .chunks(size)
        .map(|c| Batch::new(c.to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::parse_corpus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab_and_ids(text: &str) -> (Vocabulary, Vec<Vec<usize>>) {
        let corpus = parse_corpus(text, "t").unwrap();
        let vocab = Vocabulary::from_corpus(&corpus);
        let ids = corpus
            .sequences
            .iter()
            .map(|s| vocab.encode(s).unwrap())
            .collect();
        (vocab, ids)
    }

    #[test]
    fn boundary_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_mask(5, &mut rng, MaskPolicy::None).bits, [false; 5]);
        assert_eq!(sample_mask(5, &mut rng, MaskPolicy::All).bits, [true; 5]);
    }

    #[test]
    fn uniform_policy_has_half_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let ones: usize = (0..draws)
            .map(|_| {
                sample_mask(16, &mut rng, MaskPolicy::Uniform)
                    .bits
                    .iter()
                    .filter(|b| **b)
                    .count()
            })
            .sum();
        let density = ones as f64 / (draws * 16) as f64;
        assert!((0.48..=0.52).contains(&density), "{density}");
    }

    #[test]
    fn apply_mask_rule() {
        let (vocab, ids) = vocab_and_ids("D4 __ E4");
        let s = &ids[0];
        let c = apply_mask(s, &Mask { bits: vec![true, false, false] }, &vocab).unwrap();
        assert_eq!(vocab.render(&c.ids), "D4 NC NC");
        let none = apply_mask(s, &Mask { bits: vec![false; 3] }, &vocab).unwrap();
        assert_eq!(vocab.render(&none.ids), "NC NC NC");
        let all = apply_mask(s, &Mask { bits: vec![true; 3] }, &vocab).unwrap();
        assert_eq!(&all.ids, s);
        assert!(apply_mask(s, &Mask { bits: vec![true; 2] }, &vocab).is_err());
    }

    #[test]
    fn exact_fit_window_has_no_end() {
        let (vocab, ids) = vocab_and_ids("D4 __ E4 __ A4 __ __ __ G4 __ F#4 __ E4 __ __ __");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = make_examples(&ids, &vocab, 16, MaskPolicy::Uniform, &mut rng).unwrap();
        assert_eq!(ex.len(), 1);
        assert!(!ex[0].target_ids.contains(&vocab.end()));
        assert!(ex[0].valid.iter().all(|v| *v));
    }

    #[test]
    fn short_sequence_is_padded_after_end() {
        let (vocab, ids) = vocab_and_ids("C4 __ D4 __ E4 __ D4 __ C4 __");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = make_examples(&ids, &vocab, 16, MaskPolicy::All, &mut rng).unwrap();
        assert_eq!(ex.len(), 1);
        let e = &ex[0];
        // 1-based target position 11 holds END.
        assert_eq!(e.target_ids[10], vocab.end());
        assert!(e.valid[10]);
        assert!(e.valid[11..].iter().all(|v| !v));
        assert_eq!(e.valid_positions(), 11);
        assert!(e.constraint_ids[10..].iter().all(|&c| c == vocab.nc()));
        assert_eq!(&e.constraint_ids[..10], &ids[0][..]);
    }

    #[test]
    fn long_sequences_split_into_windows() {
        let (vocab, ids) = vocab_and_ids("C4 D4 E4 F4 G4");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = make_examples(&ids, &vocab, 2, MaskPolicy::None, &mut rng).unwrap();
        assert_eq!(ex.len(), 3);
        assert_eq!(vocab.render(&ex[2].target_ids), "G4 END");
    }

    #[test]
    fn structural_invariants_hold() {
        let (vocab, ids) = vocab_and_ids("C4 __ D4 E4 __ __ F4\nG4 __ __ __ A4 __ B4 C4 __ D4 __ __");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            for e in make_examples(&ids, &vocab, 8, MaskPolicy::Uniform, &mut rng).unwrap() {
                assert_eq!(e.input_ids[0], vocab.start());
                for t in 1..e.len() {
                    assert_eq!(e.input_ids[t], e.target_ids[t - 1]);
                }
                let c = ConstraintSequence { ids: e.constraint_ids.clone() };
                assert!(c.is_coherent_with(&e.target_ids, &vocab));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let none = make_examples(&ids, &vocab, 8, MaskPolicy::None, &mut rng).unwrap();
        assert!(none.iter().all(|e| e.constraint_ids.iter().all(|&c| c == vocab.nc())));
    }

    #[test]
    fn same_seed_same_stream() {
        let (vocab, ids) = vocab_and_ids("C4 __ D4 E4 __ __ F4\nG4 __ __ __ A4");
        let a = make_examples(&ids, &vocab, 4, MaskPolicy::Uniform, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = make_examples(&ids, &vocab, 4, MaskPolicy::Uniform, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus_and_bad_window_are_errors() {
        let (vocab, ids) = vocab_and_ids("C4");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(make_examples(&[], &vocab, 4, MaskPolicy::None, &mut rng).is_err());
        assert!(make_examples(&ids, &vocab, 1, MaskPolicy::None, &mut rng).is_err());
    }

    #[test]
    fn batch_sizes() {
        let (vocab, ids) = vocab_and_ids("C4 D4\nC4\nD4\nC4 C4\nD4 D4\nC4\nD4\nC4\nD4\nC4");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = make_examples(&ids, &vocab, 2, MaskPolicy::None, &mut rng).unwrap();
        assert_eq!(ex.len(), 10);
        let sizes: Vec<_> = batch(&ex, 4).unwrap().iter().map(Batch::size).collect();
        assert_eq!(sizes, [4, 4, 2]);
        assert!(batch(&ex, 1).unwrap().iter().all(|b| b.size() == 1));
        assert!(batch(&ex, 0).is_err());
        let b = &batch(&ex, 4).unwrap()[0];
        assert_eq!(b.targets_at(1)[1], Some(vocab.end()));
    }
}
