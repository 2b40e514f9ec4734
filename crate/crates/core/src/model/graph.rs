//! Batched, recorded forward pass used for training.

use alloc::vec::Vec;

use rand::RngCore;

use super::infer::apply_dropout;
use super::{LstmIds, ModelParams};
use crate::dataset::Batch;
use crate::error::{invalid, Result};
use crate::numerics::{Matrix, NodeId, Tape};

/// Loss and bookkeeping from one forward pass over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossStats {
    /// `total_nll / positions`.
    pub mean_nll: f64,
    /// Summed negative log-likelihood over valid target positions.
    pub total_nll: f64,
    pub positions: usize,
    /// Constraint stack time steps, summed over examples.
    pub constraint_steps: usize,
    /// Token stack time steps, summed over examples.
    pub token_steps: usize,
}

struct StackNodes {
    w: NodeId,
    b: NodeId,
    hidden: usize,
}

fn record_stack(tape: &mut Tape, params: &ModelParams, layers: &[LstmIds]) -> Vec<StackNodes> {
    layers
        .iter()
        .map(|ids| StackNodes {
            w: tape.param(&params.store, ids.w),
            b: tape.param(&params.store, ids.b),
            hidden: ids.hidden,
        })
        .collect()
}

fn lstm_cell(tape: &mut Tape, layer: &StackNodes, x: NodeId, h: NodeId, c: NodeId) -> (NodeId, NodeId) {
    let hd = layer.hidden;
    let xh = tape.concat(x, h);
    let z = tape.matmul(xh, layer.w);
    let z = tape.add_row(z, layer.b);
    let i = tape.slice_cols(z, 0, hd);
    let i = tape.sigmoid(i);
    let f = tape.slice_cols(z, hd, hd);
    let f = tape.sigmoid(f);
    let g = tape.slice_cols(z, 2 * hd, hd);
    let g = tape.tanh(g);
    let o = tape.slice_cols(z, 3 * hd, hd);
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c);
    let ig = tape.mul(i, g);
    let c_next = tape.add(fc, ig);
    let tc = tape.tanh(c_next);
    let h_next = tape.mul(o, tc);
    (h_next, c_next)
}

fn stack_step(tape: &mut Tape, stack: &[StackNodes], x: NodeId, state: &mut [(NodeId, NodeId)]) -> NodeId {
    let mut input = x;
    for (layer, (h, c)) in stack.iter().zip(state.iter_mut()) {
        let (h2, c2) = lstm_cell(tape, layer, input, *h, *c);
        *h = h2;
        *c = c2;
        input = h2;
    }
    input
}

impl ModelParams {
    /// Records the full teacher-forced forward pass of `batch` on `tape` and
    /// returns the mean-NLL node. Dropout is applied when `dropout_rng` is
    /// given.
    pub(crate) fn record_loss(
        &self,
        tape: &mut Tape,
        batch: &Batch,
        mut dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<(NodeId, LossStats)> {
        let cfg = *self.config();
        let n = batch.seq_len();
        let bsz = batch.size();
        for e in &batch.examples {
            let in_range = |ids: &[usize]| ids.iter().all(|&i| i < cfg.vocab_size);
            if !(in_range(&e.input_ids) && in_range(&e.constraint_ids) && in_range(&e.target_ids)) {
                return Err(invalid("example token id outside the vocabulary"));
            }
        }
        let positions = batch.valid_positions();
        if positions == 0 {
            return Err(invalid("batch has no valid target positions"));
        }

        let c_embed = tape.param(&self.store, self.ids.constraint_embed);
        let c_stack = record_stack(tape, self, &self.ids.constraint_lstm);
        let t_embed = tape.param(&self.store, self.ids.token_embed);
        let t_stack = record_stack(tape, self, &self.ids.token_lstm);
        let out_w = tape.param(&self.store, self.ids.output_w);
        let out_b = tape.param(&self.store, self.ids.output_b);

        let zeros = |tape: &mut Tape, hidden: usize| {
            let z = tape.constant(Matrix::zeros(bsz, hidden));
            (z, z)
        };

        let mut c_state: Vec<_> = (0..cfg.layers).map(|_| zeros(tape, cfg.constraint_hidden)).collect();
        let mut summaries = alloc::vec![None; n];
        for t in (0..n).rev() {
            let x = tape.gather(c_embed, &batch.constraints_at(t));
            summaries[t] = Some(stack_step(tape, &c_stack, x, &mut c_state));
        }

        let mut t_state: Vec<_> = (0..cfg.layers).map(|_| zeros(tape, cfg.token_hidden)).collect();
        let mut total: Option<NodeId> = None;
        for (t, summary) in summaries.into_iter().enumerate() {
            let summary = summary.expect("filled above");
            let emb = tape.gather(t_embed, &batch.inputs_at(t));
            let mut x = tape.concat(emb, summary);
            if let Some(rng) = dropout_rng.as_deref_mut() {
                if cfg.dropout > 0.0 {
                    let mut mask = Matrix::filled(bsz, cfg.token_input(), 1.0);
                    apply_dropout(mask.data_mut(), cfg.dropout, rng);
                    let mask = tape.constant(mask);
                    x = tape.mul(x, mask);
                }
            }
            let top = stack_step(tape, &t_stack, x, &mut t_state);
            let logits = tape.matmul(top, out_w);
            let logits = tape.add_row(logits, out_b);
            let ce = tape.cross_entropy_sum(logits, &batch.targets_at(t));
            total = Some(match total {
                Some(acc) => tape.add(acc, ce),
                None => ce,
            });
        }
        let total = total.expect("sequence length is positive");
        let total_nll = tape.value(total).as_scalar();
        let loss = tape.scale(total, 1.0 / positions as f64);
        Ok((
            loss,
            LossStats {
                mean_nll: tape.value(loss).as_scalar(),
                total_nll,
                positions,
                constraint_steps: n * bsz,
                token_steps: n * bsz,
            },
        ))
    }

    /// Teacher-forced mean NLL of `batch`. Train mode applies dropout and
    /// requires `rng`.
    pub fn forward_loss(&self, batch: &Batch, train: bool, rng: Option<&mut dyn RngCore>) -> Result<LossStats> {
        let rng = dropout_rng(train, rng)?;
        let mut tape = Tape::new();
        Ok(self.record_loss(&mut tape, batch, rng)?.1)
    }

    /// Like [`forward_loss`](Self::forward_loss) and also accumulates the
    /// gradient of the mean NLL into the parameter store.
    pub fn loss_and_grad(&mut self, batch: &Batch, train: bool, rng: Option<&mut dyn RngCore>) -> Result<LossStats> {
        let rng = dropout_rng(train, rng)?;
        let mut tape = Tape::new();
        let (loss, stats) = self.record_loss(&mut tape, batch, rng)?;
        tape.backward(loss, &mut self.store)?;
        Ok(stats)
    }
}

fn dropout_rng(train: bool, rng: Option<&mut dyn RngCore>) -> Result<Option<&mut dyn RngCore>> {
    match (train, rng) {
        (false, _) => Ok(None),
        (true, Some(r)) => Ok(Some(r)),
        (true, None) => Err(invalid("train mode requires a random number generator")),
    }
}
