//! The Topo-LSTM cell, cascade forward/backward passes and activation scoring.

mod backward;
mod cell;
mod forward;
mod score;

pub(crate) use backward::accumulate_cascade_gradient;
pub use backward::backward_cascade;
pub use cell::{aggregate, cell_backward, cell_forward, AggregatedInputs, CellState, CellTrace};
pub(crate) use forward::forward_with_topology;
pub use forward::{forward_cascade, topology_for_cascade, CascadeForwardResult, StepRecord};
pub use score::score_inactive;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Cascade, DataGraph, NodeId, NodeLabels};
use crate::numeric::checkpoint::{read_checkpoint, write_checkpoint};
use crate::numeric::{Matrix, ParameterStore};

/// How inactive nodes are scored against the active sender embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Mean of the senders with a topology edge into the candidate.
    PrecedentOnly,
    /// Mean of every active sender.
    #[default]
    AllActive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub node_count: usize,
    #[serde(default)]
    pub score_mode: ScoreMode,
    #[serde(default)]
    pub pooling: Pooling,
}

impl ModelConfig {
    pub fn new(hidden_dim: usize, node_count: usize) -> Self {
        ModelConfig {
            hidden_dim,
            node_count,
            score_mode: ScoreMode::default(),
            pooling: Pooling::Mean,
        }
    }

    pub fn with_score_mode(mut self, mode: ScoreMode) -> Self {
        self.score_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::arg("hidden dimension must be at least 1"));
        }
        if self.node_count == 0 {
            return Err(Error::arg("node count must be at least 1"));
        }
        Ok(())
    }
}

/// Slot indices into the model's [`ParameterStore`].
pub mod slot {
    pub const W_I: usize = 0;
    pub const U_I_P: usize = 1;
    pub const U_I_Q: usize = 2;
    pub const B_I: usize = 3;
    pub const W_F: usize = 4;
    /// forget gate for precedent memory, applied to the precedent aggregate
    pub const U_FP_P: usize = 5;
    /// forget gate for precedent memory, applied to the other-active aggregate
    pub const U_FP_Q: usize = 6;
    pub const U_FQ_P: usize = 7;
    pub const U_FQ_Q: usize = 8;
    pub const B_F: usize = 9;
    pub const W_C: usize = 10;
    pub const U_C_P: usize = 11;
    pub const U_C_Q: usize = 12;
    pub const B_C: usize = 13;
    pub const W_O: usize = 14;
    pub const U_O_P: usize = 15;
    pub const U_O_Q: usize = 16;
    pub const B_O: usize = 17;
    /// receiver embeddings, one row per node
    pub const RECEIVER: usize = 18;
    pub const RECEIVER_BIAS: usize = 19;

    pub const NAMES: [&str; 20] = [
        "W_i",
        "U_i_p",
        "U_i_q",
        "b_i",
        "W_f",
        "U_fp_p",
        "U_fp_q",
        "U_fq_p",
        "U_fq_q",
        "b_f",
        "W_c",
        "U_c_p",
        "U_c_q",
        "b_c",
        "W_o",
        "U_o_p",
        "U_o_q",
        "b_o",
        "receiver",
        "receiver_bias",
    ];

    /// Number of sender-embedding slots (the cell parameters).
    pub const EMBEDDING_SLOTS: usize = 18;
}

fn slot_shape(index: usize, d: usize, m: usize) -> (usize, usize) {
    match index {
        slot::W_I | slot::W_F | slot::W_C | slot::W_O => (d, m),
        slot::B_I | slot::B_F | slot::B_C | slot::B_O => (d, 1),
        slot::RECEIVER => (m, d),
        slot::RECEIVER_BIAS => (m, 1),
        _ => (d, d),
    }
}

/// All learnable parameters: the 18 cell slots plus per-node receiver
/// embeddings and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParameterStore,
}

impl Model {
    /// Recurrent matrices ~ U(±1/√d), input columns and receiver embeddings
    /// ~ U(±0.1), biases zero.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (d, m) = (config.hidden_dim, config.node_count);
        let recurrent = 1.0 / (d as f64).sqrt();
        let mut params = ParameterStore::new();
        for (i, name) in slot::NAMES.iter().enumerate() {
            let (r, c) = slot_shape(i, d, m);
            let bound = match i {
                slot::B_I | slot::B_F | slot::B_C | slot::B_O | slot::RECEIVER_BIAS => 0.0,
                slot::W_I | slot::W_F | slot::W_C | slot::W_O | slot::RECEIVER => 0.1,
                _ => recurrent,
            };
            let values = (0..r * c)
                .map(|_| {
                    if bound > 0.0 {
                        rng.gen_range(-bound..bound)
                    } else {
                        0.0
                    }
                })
                .collect();
            params.push(*name, Matrix::from_vec(r, c, values)?)?;
        }
        Ok(Model { config, params })
    }

    /// Model with every parameter set to zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (d, m) = (config.hidden_dim, config.node_count);
        let mut params = ParameterStore::new();
        for (i, name) in slot::NAMES.iter().enumerate() {
            let (r, c) = slot_shape(i, d, m);
            params.push(*name, Matrix::zeros(r, c))?;
        }
        Ok(Model { config, params })
    }

    /// Wraps an existing store after checking slot names and shapes.
    pub fn from_params(config: ModelConfig, params: ParameterStore) -> Result<Self> {
        config.validate()?;
        let expected = Model::zeros(config)?;
        expected.params.check_congruent(&params)?;
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn set_score_mode(&mut self, mode: ScoreMode) {
        self.config.score_mode = mode;
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn node_count(&self) -> usize {
        self.config.node_count
    }

    /// Summed negative log-likelihood of a cascade's prediction steps.
    pub fn cascade_nll(&self, graph: &DataGraph, cascade: &Cascade) -> Result<f64> {
        Ok(forward_cascade(graph, cascade, self)?.total_loss())
    }

    /// Probabilities of every inactive node being the next activation after
    /// `prefix`, sorted by descending probability (ties by ascending id).
    pub fn predict_next(&self, graph: &DataGraph, prefix: &[NodeId]) -> Result<Vec<(NodeId, f64)>> {
        forward::predict_next(self, graph, prefix)
    }

    /// Writes a checkpoint; `echo` is stored verbatim next to the model config.
    pub fn save(
        &self,
        path: impl AsRef<Path>,
        labels: &NodeLabels,
        echo: &serde_json::Value,
    ) -> Result<()> {
        let meta = serde_json::json!({
            "tool_version": crate::VERSION,
            "model_config": self.config,
            "labels": labels.as_slice(),
            "config": echo,
        });
        let file = BufWriter::new(File::create(path)?);
        write_checkpoint(file, &meta, &self.params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LoadedModel> {
        let file = BufReader::new(File::open(path)?);
        let (meta, params) = read_checkpoint(file)?;
        let config: ModelConfig = serde_json::from_value(
            meta.get("model_config")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("missing model_config".into()))?,
        )?;
        let labels: Vec<String> = serde_json::from_value(
            meta.get("labels")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("missing labels".into()))?,
        )?;
        let model = Model::from_params(config, params)
            .map_err(|e| Error::Checkpoint(format!("parameters do not match config: {e}")))?;
        Ok(LoadedModel {
            model,
            labels: NodeLabels::from_labels(labels)?,
            echo: meta
                .get("config")
                .cloned()
                .unwrap_or(serde_json::Value::Null),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: Model,
    pub labels: NodeLabels,
    pub echo: serde_json::Value,
}
