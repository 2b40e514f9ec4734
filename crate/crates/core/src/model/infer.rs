//! Unbatched forward evaluation for sampling and diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::{LstmIds, ModelParams};
use crate::error::{invalid, Result};
use crate::numerics::{math, Floored, ParameterStore, PROB_FLOOR};

/// `p(s_t | s_<t)` over the whole vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl StepDistribution {
    pub fn from_logits(logits: Vec<f64>, temperature: f64) -> Result<Self> {
        let probs = crate::numerics::softmax(&logits, temperature)?;
        Ok(Self { logits, probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, id: usize) -> f64 {
        self.probs[id]
    }

    /// `ln p(id)`, floored at `ln 1e-30`.
    pub fn log_prob(&self, id: usize) -> Floored {
        let p = self.probs[id];
        Floored {
            value: math::ln(p.max(PROB_FLOOR)),
            floored: p < PROB_FLOOR,
        }
    }

    pub fn argmax(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * math::ln(*p))
            .sum::<f64>()
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `acc` just below 1: fall back to the last non-zero entry.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Per-layer `(h, c)` of one LSTM stack.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl HiddenState {
    pub fn zeros(layers: usize, hidden: usize) -> Self {
        Self {
            layers: vec![(vec![0.0; hidden], vec![0.0; hidden]); layers],
        }
    }

    pub fn top(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").0
    }
}

/// `o_1 .. o_N`; `vectors[t - 1]` is `o_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSummary {
    pub vectors: Vec<Vec<f64>>,
    /// Constraint stack time steps performed.
    pub cell_steps: usize,
}

impl ConstraintSummary {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `o_t` for 1-based `t`.
    pub fn at(&self, t: usize) -> &[f64] {
        &self.vectors[t - 1]
    }
}

/// One LSTM layer step on `x`, updating `h` and `c` in place. The arithmetic
/// order matches the tape path: `[x|h]·W`, then bias, then gates.
fn lstm_step(store: &ParameterStore, ids: &LstmIds, x: &[f64], h: &mut [f64], c: &mut [f64]) {
    let w = store.value(ids.w);
    let b = store.value(ids.b).data();
    let hidden = ids.hidden;
    let mut z = vec![0.0; 4 * hidden];
    for (k, &a) in x.iter().chain(h.iter()).enumerate() {
        if a == 0.0 {
            continue;
        }
        for (zj, wj) in z.iter_mut().zip(w.row(k)) {
            *zj += a * wj;
        }
    }
    for (zj, bj) in z.iter_mut().zip(b) {
        *zj += bj;
    }
    for j in 0..hidden {
        let i = math::sigmoid(z[j]);
        let f = math::sigmoid(z[hidden + j]);
        let g = math::tanh(z[2 * hidden + j]);
        let o = math::sigmoid(z[3 * hidden + j]);
        c[j] = f * c[j] + i * g;
        h[j] = o * math::tanh(c[j]);
    }
}

fn stack_step(store: &ParameterStore, layers: &[LstmIds], x: &[f64], state: &mut HiddenState) {
    let mut input = x.to_vec();
    for (ids, (h, c)) in layers.iter().zip(state.layers.iter_mut()) {
        lstm_step(store, ids, &input, h, c);
        input.clear();
        input.extend_from_slice(h);
    }
}

impl ModelParams {
    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.config().vocab_size) {
            Some(bad) => Err(invalid(alloc::format!("token id {bad} outside the vocabulary"))),
            None => Ok(()),
        }
    }

    /// Runs the constraint stack from `c_N` down to `c_1`.
    pub fn constraint_rnn_forward(&self, constraint_ids: &[usize]) -> Result<ConstraintSummary> {
        self.check_ids(constraint_ids)?;
        let cfg = self.config();
        let embed = self.store.value(self.ids.constraint_embed);
        let mut state = HiddenState::zeros(cfg.layers, cfg.constraint_hidden);
        let mut vectors = vec![Vec::new(); constraint_ids.len()];
        let mut cell_steps = 0;
        for t in (0..constraint_ids.len()).rev() {
            stack_step(
                &self.store,
                &self.ids.constraint_lstm,
                embed.row(constraint_ids[t]),
                &mut state,
            );
            cell_steps += 1;
            vectors[t] = state.top().to_vec();
        }
        Ok(ConstraintSummary {
            vectors,
            cell_steps,
        })
    }

    pub fn token_initial_state(&self) -> HiddenState {
        HiddenState::zeros(self.config().layers, self.config().token_hidden)
    }

    /// One token stack step: predicts the next token from the previous one
    /// and the constraint summary for the position being predicted.
    ///
    /// In train mode, dropout with the configured rate is applied to the
    /// concatenated input and `rng` is required.
    pub fn token_rnn_step(
        &self,
        prev: usize,
        summary: &[f64],
        state: &HiddenState,
        train: bool,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(StepDistribution, HiddenState)> {
        let mut next = state.clone();
        let logits = self.token_logits(prev, summary, &mut next, train, rng)?;
        Ok((StepDistribution::from_logits(logits, 1.0)?, next))
    }

    /// In-place variant of [`token_rnn_step`](Self::token_rnn_step)
    /// returning raw logits.
    pub(crate) fn token_logits(
        &self,
        prev: usize,
        summary: &[f64],
        state: &mut HiddenState,
        train: bool,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Vec<f64>> {
        let cfg = self.config();
        self.check_ids(&[prev])?;
        if summary.len() != cfg.constraint_hidden {
            return Err(invalid("constraint summary has the wrong width"));
        }
        let mut x = Vec::with_capacity(cfg.token_input());
        x.extend_from_slice(self.store.value(self.ids.token_embed).row(prev));
        x.extend_from_slice(summary);
        if train {
            let rng = rng.ok_or_else(|| invalid("train mode requires a random number generator"))?;
            apply_dropout(&mut x, cfg.dropout, rng);
        }
        stack_step(&self.store, &self.ids.token_lstm, &x, state);

        let w = self.store.value(self.ids.output_w);
        let mut logits = vec![0.0; cfg.vocab_size];
        for (k, &a) in state.top().iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (l, wj) in logits.iter_mut().zip(w.row(k)) {
                *l += a * wj;
            }
        }
        for (l, b) in logits.iter_mut().zip(self.store.value(self.ids.output_b).data()) {
            *l += b;
        }
        Ok(logits)
    }

    /// Teacher-forced step distributions of `targets` under `constraints`.
    /// Step `t` conditions on `START, targets[..t]`.
    pub fn teacher_forced(&self, constraints: &[usize], targets: &[usize], start: usize) -> Result<Vec<StepDistribution>> {
        if constraints.len() != targets.len() {
            return Err(invalid("constraint and token sequences differ in length"));
        }
        self.check_ids(targets)?;
        let summary = self.constraint_rnn_forward(constraints)?;
        let mut state = self.token_initial_state();
        let mut prev = start;
        let mut out = Vec::with_capacity(targets.len());
        for (t, &s) in targets.iter().enumerate() {
            let logits = self.token_logits(prev, summary.at(t + 1), &mut state, false, None)?;
            out.push(StepDistribution::from_logits(logits, 1.0)?);
            prev = s;
        }
        Ok(out)
    }
}

/// Inverted dropout: zero with probability `rate`, otherwise scale by
/// `1 / (1 - rate)`.
pub(crate) fn apply_dropout<R: Rng + ?Sized>(x: &mut [f64], rate: f64, rng: &mut R) {
    if rate == 0.0 {
        return;
    }
    let keep = 1.0 / (1.0 - rate);
    for v in x {
        *v *= if rng.gen::<f64>() < rate { 0.0 } else { keep };
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub fn stack_step(params: &ModelParams, constraint: &[usize], state: &mut HiddenState) {
        let embed = params.store.value(params.ids.constraint_embed);
        super::stack_step(&params.store, &params.ids.constraint_lstm, embed.row(constraint[0]), state);
    }
}
