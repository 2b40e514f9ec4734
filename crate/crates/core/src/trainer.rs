//! Training loop: masked windows, Adam, per-epoch validation and
//! best-epoch selection. A run is a pure function of its inputs and seed.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{batch, make_examples, Batch, MaskPolicy};
use crate::encoding::{Corpus, Vocabulary};
use crate::error::{invalid, Error, Result};
use crate::model::{Checkpoint, ModelConfig, ModelParams};
use crate::numerics::{clip_grad_norm, Adam, AdamConfig};

/// Validation masks come from their own stream so every epoch is scored on
/// the same constraints.
const VALIDATION_STREAM: u64 = 0x05ee_d0f7_a11d;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub window: usize,
    pub mask_policy: MaskPolicy,
    pub adam: AdamConfig,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Fraction of sequences held out, in `[0, 1)`.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            window: 16,
            mask_policy: MaskPolicy::Uniform,
            adam: AdamConfig::default(),
            clip_norm: Some(5.0),
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        if self.window < 2 {
            return Err(invalid("window must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(invalid("validation fraction must lie in [0, 1)"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(invalid("clip norm must be positive"));
            }
        }
        Adam::new(self.adam).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean NLL over the epoch's training positions, dropout on.
    pub train_nll: f64,
    /// `None` when nothing is held out.
    pub val_nll: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned; `None` for a zero-epoch run.
    pub best_epoch: Option<usize>,
    pub optimizer_steps: u64,
}

impl TrainReport {
    /// Equality ignoring wall time.
    pub fn same_trajectory(&self, other: &TrainReport) -> bool {
        self.best_epoch == other.best_epoch
            && self.optimizer_steps == other.optimizer_steps
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_nll.to_bits() == b.train_nll.to_bits()
                    && a.val_nll.map(f64::to_bits) == b.val_nll.map(f64::to_bits)
            })
    }

    pub fn best(&self) -> Option<&EpochStats> {
        let e = self.best_epoch?;
        self.epochs.get(e - 1)
    }
}

/// Hooks for the caller: a clock (the core crate has none) and progress
/// callbacks. `()` ignores everything and reports zero seconds.
pub trait TrainMonitor {
    /// Seconds since some fixed origin.
    fn now(&mut self) -> f64 {
        0.0
    }

    fn epoch_done(&mut self, _stats: &EpochStats) {}

    /// Called with the new best parameters whenever they improve.
    fn new_best(&mut self, _checkpoint: &Checkpoint, _stats: &EpochStats) {}
}

impl TrainMonitor for () {}

/// Shuffles sequence indices and holds out `floor(n * fraction)` of them,
/// always keeping at least one for training.
pub(crate) fn split_indices(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let held = ((n as f64 * fraction) as usize).min(n.saturating_sub(1));
    let val = idx.split_off(n - held);
    (idx, val)
}

fn encode_all(vocab: &Vocabulary, corpus: &Corpus, which: &[usize]) -> Result<Vec<Vec<usize>>> {
    which.iter().map(|&i| vocab.encode(&corpus.sequences[i])).collect()
}

fn mean_nll(params: &ModelParams, batches: &[Batch]) -> Result<f64> {
    let mut total = 0.0;
    let mut positions = 0;
    for b in batches {
        let s = params.forward_loss(b, false, None)?;
        total += s.total_nll;
        positions += s.positions;
    }
    if positions == 0 {
        return Err(invalid("no positions to score"));
    }
    Ok(total / positions as f64)
}

/// Trains a model on `corpus`, whose vocabulary becomes the checkpoint's.
/// `model_config.vocab_size` is overwritten to match it.
///
/// Returns the parameters of the epoch with the lowest validation NLL (or
/// training NLL when nothing is held out).
pub fn train(
    corpus: &Corpus,
    model_config: ModelConfig,
    config: &TrainConfig,
    monitor: &mut dyn TrainMonitor,
) -> Result<(Checkpoint, TrainReport)> {
    if corpus.is_empty() {
        return Err(invalid("cannot train on an empty corpus"));
    }
    config.validate()?;
    let vocab = Vocabulary::from_corpus(corpus);
    let model_config = ModelConfig {
        vocab_size: vocab.len(),
        ..model_config
    };
    model_config.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train_idx, val_idx) = split_indices(corpus.len(), config.validation_fraction, &mut rng);
    let train_seqs = encode_all(&vocab, corpus, &train_idx)?;
    let val_seqs = encode_all(&vocab, corpus, &val_idx)?;

    let mut params = ModelParams::init(model_config, &mut rng)?;
    let val_batches = if val_seqs.is_empty() {
        Vec::new()
    } else {
        let mut vrng = ChaCha8Rng::seed_from_u64(config.seed ^ VALIDATION_STREAM);
        let ex = make_examples(&val_seqs, &vocab, config.window, config.mask_policy, &mut vrng)?;
        batch(&ex, config.batch_size)?
    };

    let mut adam = Adam::new(config.adam)?;
    let mut report = TrainReport::default();
    let mut best: Option<(f64, ModelParams)> = None;
    for epoch in 1..=config.epochs {
        let started = monitor.now();
        let mut examples = make_examples(&train_seqs, &vocab, config.window, config.mask_policy, &mut rng)?;
        examples.shuffle(&mut rng);
        let mut total = 0.0;
        let mut positions = 0;
        for b in batch(&examples, config.batch_size)? {
            let step = adam.steps() as usize + 1;
            params.store_mut().zero_grad();
            let stats = params.loss_and_grad(&b, true, Some(&mut rng))?;
            if !stats.total_nll.is_finite() {
                return Err(Error::Diverged { step });
            }
            if let Some(max) = config.clip_norm {
                clip_grad_norm(params.store_mut(), max);
            }
            adam.step(params.store_mut()).map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::Diverged { step },
                other => other,
            })?;
            total += stats.total_nll;
            positions += stats.positions;
        }
        let val_nll = if val_batches.is_empty() {
            None
        } else {
            Some(mean_nll(&params, &val_batches)?)
        };
        let stats = EpochStats {
            epoch,
            train_nll: total / positions.max(1) as f64,
            val_nll,
            seconds: monitor.now() - started,
        };
        report.epochs.push(stats);
        monitor.epoch_done(&stats);

        let score = val_nll.unwrap_or(stats.train_nll);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, params.clone()));
            report.best_epoch = Some(epoch);
            let cp = Checkpoint::new(vocab.clone(), params.clone())?;
            monitor.new_best(&cp, &stats);
        }
    }
    report.optimizer_steps = adam.steps();
    let mut params = best.map_or(params, |(_, p)| p);
    params.store_mut().zero_grad();
    Ok((Checkpoint::new(vocab, params)?, report))
}

/// Teacher-forced mean NLL of `corpus` (dropout off), with masks drawn from
/// `seed` under `policy`.
pub fn evaluate_nll(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
    window: usize,
    policy: MaskPolicy,
    seed: u64,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(invalid("cannot evaluate an empty corpus"));
    }
    let vocab = &checkpoint.vocabulary;
    if !vocab.contains_corpus(corpus) {
        return Err(invalid("corpus uses tokens outside the checkpoint vocabulary"));
    }
    let all: Vec<usize> = (0..corpus.len()).collect();
    let seqs = encode_all(vocab, corpus, &all)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = make_examples(&seqs, vocab, window, policy, &mut rng)?;
    mean_nll(&checkpoint.params, &batch(&examples, 64)?)
}
