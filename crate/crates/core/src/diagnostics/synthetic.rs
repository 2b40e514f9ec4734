use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::encoding::{Corpus, Letter, MelodySequence, Pitch, Token};
use crate::error::{invalid, Result};
use crate::model::infer::sample_index;
use crate::numerics::math;

/// Order-1 Markov chain over a few notes plus the hold symbol, used as a
/// ground-truth source whose entropy is known exactly.
///
/// States `0..notes.len()` are the notes and state `notes.len()` is `__`.
/// Melodies never start with a hold, so `initial` covers notes only.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    notes: Vec<Pitch>,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
}

fn check_row(row: &[f64], what: &str) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) || libm::fabs(sum - 1.0) > 1e-12 {
        return Err(invalid(format!("{what} is not a probability distribution")));
    }
    Ok(())
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * math::ln(x)).sum::<f64>()
}

fn natural(letter: Letter, octave: i32) -> Pitch {
    Pitch::new(letter, 0, octave).expect("natural pitch")
}

impl MarkovChain {
    pub fn new(notes: Vec<Pitch>, initial: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let k = notes.len();
        if k == 0 {
            return Err(invalid("chain needs at least one note"));
        }
        if initial.len() != k {
            return Err(invalid("initial distribution must cover the notes only"));
        }
        check_row(&initial, "initial distribution")?;
        if transition.len() != k + 1 || transition.iter().any(|r| r.len() != k + 1) {
            return Err(invalid("transition matrix must be square over notes plus hold"));
        }
        for (i, row) in transition.iter().enumerate() {
            check_row(row, &format!("transition row {i}"))?;
        }
        Ok(Self {
            notes,
            initial,
            transition,
        })
    }

    /// Five notes C4..G4 moving mostly by step, with holds.
    pub fn five_note() -> Self {
        let notes = [Letter::C, Letter::D, Letter::E, Letter::F, Letter::G]
            .into_iter()
            .map(|l| natural(l, 4))
            .collect();
        let mut transition = Vec::new();
        for i in 0..5 {
            let mut row = alloc::vec![0.0; 6];
            row[5] = 0.35;
            row[(i + 1) % 5] += 0.35;
            row[(i + 4) % 5] += 0.2;
            row[(i + 2) % 5] += 0.1;
            transition.push(row);
        }
        transition.push(alloc::vec![0.2, 0.15, 0.15, 0.1, 0.1, 0.3]);
        Self::new(notes, alloc::vec![0.4, 0.0, 0.3, 0.0, 0.3], transition).expect("valid chain")
    }

    /// Two notes and the hold: a three-symbol alphabet small enough to
    /// enumerate exhaustively.
    pub fn three_symbol() -> Self {
        Self::new(
            alloc::vec![natural(Letter::C, 4), natural(Letter::G, 4)],
            alloc::vec![0.6, 0.4],
            alloc::vec![
                alloc::vec![0.1, 0.5, 0.4],
                alloc::vec![0.5, 0.2, 0.3],
                alloc::vec![0.4, 0.3, 0.3],
            ],
        )
        .expect("valid chain")
    }

    pub fn notes(&self) -> &[Pitch] {
        &self.notes
    }

    /// Tokens of the chain's states, hold last.
    pub fn tokens(&self) -> Vec<Token> {
        let mut out: Vec<Token> = self.notes.iter().map(|&p| Token::Note(p)).collect();
        out.push(Token::Hold);
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<MelodySequence> {
        if len == 0 {
            return Err(invalid("sequence length must be positive"));
        }
        let tokens = self.tokens();
        let mut state = sample_index(&self.initial, rng);
        let mut out = alloc::vec![tokens[state]];
        for _ in 1..len {
            state = sample_index(&self.transition[state], rng);
            out.push(tokens[state]);
        }
        MelodySequence::new(out)
    }

    pub fn sample_corpus<R: Rng + ?Sized>(&self, count: usize, len: usize, rng: &mut R) -> Result<Corpus> {
        let sequences = (0..count).map(|_| self.sample(len, rng)).collect::<Result<_>>()?;
        Ok(Corpus::new("markov", sequences))
    }

    /// Exact per-token entropy (nats) of a `len`-token sample:
    /// `H(X_1..X_len) / len`, computed by propagating state marginals.
    pub fn entropy_per_token(&self, len: usize) -> Result<f64> {
        if len == 0 {
            return Err(invalid("sequence length must be positive"));
        }
        let k = self.notes.len() + 1;
        let mut marginal = self.initial.clone();
        marginal.push(0.0);
        let mut total = entropy(&self.initial);
        for _ in 1..len {
            total += marginal
                .iter()
                .zip(&self.transition)
                .map(|(m, row)| m * entropy(row))
                .sum::<f64>();
            let mut next = alloc::vec![0.0; k];
            for (m, row) in marginal.iter().zip(&self.transition) {
                for (n, p) in next.iter_mut().zip(row) {
                    *n += m * p;
                }
            }
            marginal = next;
        }
        Ok(total / len as f64)
    }

    /// Exact log-probability of a token sequence under the chain.
    pub fn log_prob(&self, seq: &[Token]) -> f64 {
        let tokens = self.tokens();
        let index = |t: &Token| tokens.iter().position(|x| x == t);
        let mut states = seq.iter().map(index);
        let Some(Some(first)) = states.next() else {
            return f64::NEG_INFINITY;
        };
        let Some(&p0) = self.initial.get(first) else {
            return f64::NEG_INFINITY;
        };
        let mut lp = math::ln(p0);
        let mut prev = first;
        for s in states {
            let Some(s) = s else {
                return f64::NEG_INFINITY;
            };
            lp += math::ln(self.transition[prev][s]);
            prev = s;
        }
        lp
    }
}
