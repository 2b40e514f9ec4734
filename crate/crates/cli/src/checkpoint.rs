//! JSON checkpoint files. Floats are written in shortest round-trip form
//! and parsed exactly, so a reload is bit-identical.

use std::fs;
use std::path::Path;

use anticipation_core::numerics::{Matrix, ParameterStore};
use anticipation_core::{Checkpoint, ModelConfig, ModelParams, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub vocab_size: usize,
    pub token_embedding: usize,
    pub constraint_embedding: usize,
    pub constraint_hidden: usize,
    pub token_hidden: usize,
    pub layers: usize,
    pub dropout: f64,
}

impl From<&ModelConfig> for ConfigJson {
    fn from(c: &ModelConfig) -> Self {
        Self {
            vocab_size: c.vocab_size,
            token_embedding: c.token_embedding,
            constraint_embedding: c.constraint_embedding,
            constraint_hidden: c.constraint_hidden,
            token_hidden: c.token_hidden,
            layers: c.layers,
            dropout: c.dropout,
        }
    }
}

impl From<&ConfigJson> for ModelConfig {
    fn from(c: &ConfigJson) -> Self {
        ModelConfig {
            vocab_size: c.vocab_size,
            token_embedding: c.token_embedding,
            constraint_embedding: c.constraint_embedding,
            constraint_hidden: c.constraint_hidden,
            token_hidden: c.token_hidden,
            layers: c.layers,
            dropout: c.dropout,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamJson {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointJson {
    format_version: u32,
    config: ConfigJson,
    vocabulary: Vec<String>,
    params: Vec<ParamJson>,
}

pub fn to_json(cp: &Checkpoint) -> String {
    let doc = CheckpointJson {
        format_version: FORMAT_VERSION,
        config: cp.config().into(),
        vocabulary: cp.vocabulary.surfaces(),
        params: cp
            .params
            .store()
            .iter()
            .map(|(name, m)| ParamJson {
                name: name.to_string(),
                rows: m.rows(),
                cols: m.cols(),
                data: m.data().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("checkpoint serializes")
}

pub fn from_json(text: &str) -> Result<Checkpoint, CliError> {
    let doc: CheckpointJson =
        serde_json::from_str(text).map_err(|e| CliError::failure(format!("bad checkpoint: {e}")))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(CliError::failure(format!(
            "unsupported checkpoint format version {}",
            doc.format_version
        )));
    }
    let vocabulary = Vocabulary::from_surfaces(&doc.vocabulary)?;
    let mut store = ParameterStore::new();
    for p in doc.params {
        store.insert(&p.name, Matrix::from_vec(p.rows, p.cols, p.data)?)?;
    }
    let params = ModelParams::from_store((&doc.config).into(), store)?;
    Ok(Checkpoint::new(vocabulary, params)?)
}

pub fn save(cp: &Checkpoint, path: &Path) -> Result<(), CliError> {
    fs::write(path, to_json(cp))
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Checkpoint, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read checkpoint {}: {e}", path.display())))?;
    from_json(&text)
}
