use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::ModelConfig;
use crate::numerics::{math, Matrix, ParamId, ParameterStore};
use crate::error::{invalid, Result};

/// Parameter ids of one LSTM layer. `w` is `(input + hidden) x 4·hidden`
/// acting on `[x | h]`; gate blocks are ordered input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmIds {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Ids {
    pub constraint_embed: ParamId,
    pub constraint_lstm: Vec<LstmIds>,
    pub token_embed: ParamId,
    pub token_lstm: Vec<LstmIds>,
    pub output_w: ParamId,
    pub output_b: ParamId,
}

/// All learnable arrays of the model, held in a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub(crate) config: ModelConfig,
    pub(crate) store: ParameterStore,
    pub(crate) ids: Ids,
}

fn layout(config: &ModelConfig) -> Vec<(alloc::string::String, usize, usize)> {
    let mut out = Vec::new();
    let v = config.vocab_size;
    out.push(("constraint.embed".into(), v, config.constraint_embedding));
    let mut input = config.constraint_embedding;
    let hc = config.constraint_hidden;
    for l in 0..config.layers {
        out.push((format!("constraint.lstm{l}.w"), input + hc, 4 * hc));
        out.push((format!("constraint.lstm{l}.b"), 1, 4 * hc));
        input = hc;
    }
    out.push(("token.embed".into(), v, config.token_embedding));
    let mut input = config.token_input();
    let hs = config.token_hidden;
    for l in 0..config.layers {
        out.push((format!("token.lstm{l}.w"), input + hs, 4 * hs));
        out.push((format!("token.lstm{l}.b"), 1, 4 * hs));
        input = hs;
    }
    out.push(("output.w".into(), hs, v));
    out.push(("output.b".into(), 1, v));
    out
}

impl ModelParams {
    /// Uniform in `±1/sqrt(fan_in)` (embeddings have fan-in 1), LSTM forget
    /// gate biases set to 1.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut store = ParameterStore::new();
        for (name, rows, cols) in layout(&config) {
            let fan_in = if name.ends_with(".b") {
                store_fan_in(&store, &name)
            } else if name.ends_with(".embed") {
                1
            } else {
                rows
            };
            let bound = 1.0 / math::sqrt(fan_in as f64);
            let mut m = Matrix::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            if name.ends_with(".b") && name.contains(".lstm") {
                let h = cols / 4;
                m.data_mut()[h..2 * h].fill(1.0);
            }
            store.insert(&name, m)?;
        }
        Self::from_store(config, store)
    }

    /// Wraps a store whose entry names and shapes match `config`.
    pub fn from_store(config: ModelConfig, store: ParameterStore) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config);
        if store.len() != expected.len() {
            return Err(invalid(format!(
                "expected {} parameter matrices, found {}",
                expected.len(),
                store.len()
            )));
        }
        for ((name, rows, cols), (got_name, got)) in expected.iter().zip(store.iter()) {
            if name != got_name || (*rows, *cols) != got.shape() {
                return Err(invalid(format!(
                    "parameter `{got_name}` {:?} does not match expected `{name}` ({rows}, {cols})",
                    got.shape()
                )));
            }
        }
        let id = |n: &str| store.id(n).expect("validated above");
        let lstm = |prefix: &str, first_input: usize, hidden: usize| -> Vec<LstmIds> {
            (0..config.layers)
                .map(|l| LstmIds {
                    w: id(&format!("{prefix}.lstm{l}.w")),
                    b: id(&format!("{prefix}.lstm{l}.b")),
                    input: if l == 0 { first_input } else { hidden },
                    hidden,
                })
                .collect()
        };
        let ids = Ids {
            constraint_embed: id("constraint.embed"),
            constraint_lstm: lstm("constraint", config.constraint_embedding, config.constraint_hidden),
            token_embed: id("token.embed"),
            token_lstm: lstm("token", config.token_input(), config.token_hidden),
            output_w: id("output.w"),
            output_b: id("output.b"),
        };
        Ok(Self { config, store, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    pub fn into_store(self) -> ParameterStore {
        self.store
    }

    /// Sets the output projection to zero, making every step distribution
    /// uniform.
    pub fn zero_output(&mut self) {
        self.store.value_mut(self.ids.output_w).fill(0.0);
        self.store.value_mut(self.ids.output_b).fill(0.0);
    }
}

/// Fan-in of a bias is the row count of the matching weight.
fn store_fan_in(store: &ParameterStore, bias_name: &str) -> usize {
    let weight = format!("{}.w", bias_name.trim_end_matches(".b"));
    store.id(&weight).map_or(1, |id| store.value(id).rows())
}
