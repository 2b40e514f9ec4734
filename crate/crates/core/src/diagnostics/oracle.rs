use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::model::{Checkpoint, HiddenState, StepDistribution};
use crate::sampler::ConstraintSet;

/// Largest `|alphabet|^N` the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Exact constrained distribution over every sequence in `alphabet^N`.
///
/// Step distributions of the unconstrained model are renormalized over the
/// alphabet, so `unconstrained` sums to 1 over the enumeration even when the
/// model keeps some mass on tokens outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub alphabet: Vec<usize>,
    /// All of `alphabet^N` in lexicographic order of alphabet index.
    pub sequences: Vec<Vec<usize>>,
    pub unconstrained: Vec<f64>,
    /// `unconstrained / alpha` on satisfying sequences, exactly 0 elsewhere.
    pub constrained: Vec<f64>,
    pub alpha: f64,
}

impl OracleResult {
    pub fn probability(&self, seq: &[usize]) -> f64 {
        self.index_of(seq).map_or(0.0, |i| self.constrained[i])
    }

    fn index_of(&self, seq: &[usize]) -> Option<usize> {
        if seq.len() != self.sequence_len() {
            return None;
        }
        let k = self.alphabet.len();
        let mut idx = 0;
        for s in seq {
            idx = idx * k + self.alphabet.iter().position(|a| a == s)?;
        }
        Some(idx)
    }

    pub fn sequence_len(&self) -> usize {
        self.sequences.first().map_or(0, Vec::len)
    }

    /// Total variation between the constrained distribution and the empirical
    /// histogram of `samples`. Samples outside `alphabet^N` count as mass the
    /// oracle gives probability 0.
    pub fn total_variation<'a, I>(&self, samples: I) -> Result<f64>
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let mut counts = vec![0usize; self.sequences.len()];
        let mut outside = 0usize;
        let mut total = 0usize;
        for s in samples {
            total += 1;
            match self.index_of(s) {
                Some(i) => counts[i] += 1,
                None => outside += 1,
            }
        }
        if total == 0 {
            return Err(invalid("no samples to compare against"));
        }
        let n = total as f64;
        let inside: f64 = counts
            .iter()
            .zip(&self.constrained)
            .map(|(&c, &p)| libm::fabs(c as f64 / n - p))
            .sum();
        Ok(0.5 * (inside + outside as f64 / n))
    }

    /// Histogram of the constrained distribution keyed by sequence, with
    /// zero-probability sequences left out.
    pub fn support(&self) -> BTreeMap<Vec<usize>, f64> {
        self.sequences
            .iter()
            .zip(&self.constrained)
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (s.clone(), p))
            .collect()
    }
}

/// Enumerates `alphabet^N` (`N = cs.length()`), scores every sequence under
/// the unconstrained model and renormalizes the ones satisfying `cs`.
pub fn oracle_constrained_distribution(
    checkpoint: &Checkpoint,
    cs: &ConstraintSet,
    alphabet: &[usize],
) -> Result<OracleResult> {
    let n = cs.length();
    if n == 0 {
        return Err(invalid("sequence length must be positive"));
    }
    if alphabet.is_empty() {
        return Err(invalid("alphabet is empty"));
    }
    let mut sorted = alphabet.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != alphabet.len() {
        return Err(invalid("alphabet lists a token twice"));
    }
    if let Some(&bad) = alphabet.iter().find(|&&a| a >= checkpoint.vocabulary.len()) {
        return Err(invalid(alloc::format!("token id {bad} outside the vocabulary")));
    }
    let size = (alphabet.len() as u128)
        .checked_pow(n as u32)
        .filter(|&s| s <= ORACLE_LIMIT)
        .ok_or(Error::TooLarge {
            size: (alphabet.len() as u128).saturating_pow(n.min(u32::MAX as usize) as u32),
            limit: ORACLE_LIMIT,
        })?;

    let vocab = &checkpoint.vocabulary;
    let params = &checkpoint.params;
    let free = ConstraintSet::empty(n).to_constraint_sequence(vocab);
    let summary = params.constraint_rnn_forward(&free.ids)?;

    let mut sequences = Vec::with_capacity(size as usize);
    let mut unconstrained = Vec::with_capacity(size as usize);

    // Depth-first over prefixes; each level keeps its hidden state and the
    // renormalized step distribution so shared prefixes are run once.
    struct Frame {
        state: HiddenState,
        step: Vec<f64>,
        next: usize,
        log_p: f64,
    }
    let expand = |prev: usize, t: usize, state: &HiddenState| -> Result<(HiddenState, Vec<f64>)> {
        let mut state = state.clone();
        let logits = params.token_logits(prev, summary.at(t), &mut state, false, None)?;
        let dist = StepDistribution::from_logits(logits, 1.0)?;
        let mass: f64 = alphabet.iter().map(|&a| dist.probs[a]).sum();
        if !(mass > 0.0) {
            return Err(invalid("model assigns no mass to the alphabet"));
        }
        Ok((state, alphabet.iter().map(|&a| dist.probs[a] / mass).collect()))
    };

    let (state, step) = expand(vocab.start(), 1, &params.token_initial_state())?;
    let mut stack = vec![Frame {
        state,
        step,
        next: 0,
        log_p: 0.0,
    }];
    let mut prefix: Vec<usize> = Vec::with_capacity(n);
    while let Some(top) = stack.last_mut() {
        if top.next == alphabet.len() {
            stack.pop();
            prefix.pop();
            continue;
        }
        let k = top.next;
        top.next += 1;
        let log_p = top.log_p + libm::log(top.step[k]);
        let tok = alphabet[k];
        if prefix.len() + 1 == n {
            let mut seq = prefix.clone();
            seq.push(tok);
            sequences.push(seq);
            unconstrained.push(libm::exp(log_p));
            continue;
        }
        let (state, step) = expand(tok, prefix.len() + 2, &top.state)?;
        prefix.push(tok);
        stack.push(Frame {
            state,
            step,
            next: 0,
            log_p,
        });
    }

    let satisfied: Vec<bool> = sequences.iter().map(|s| cs.is_satisfied_by(s)).collect();
    let alpha: f64 = unconstrained
        .iter()
        .zip(&satisfied)
        .filter(|(_, &ok)| ok)
        .map(|(p, _)| p)
        .sum();
    if !(alpha > 0.0) {
        return Err(invalid("no sequence over the alphabet satisfies the constraints"));
    }
    let constrained = unconstrained
        .iter()
        .zip(&satisfied)
        .map(|(&p, &ok)| if ok { p / alpha } else { 0.0 })
        .collect();
    Ok(OracleResult {
        alphabet: alphabet.to_vec(),
        sequences,
        unconstrained,
        constrained,
        alpha: alpha.min(1.0),
    })
}
