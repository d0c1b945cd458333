//! Topo-LSTM: next-activation prediction over diffusion topologies.
//!
//! A cascade is an ordered list of activated nodes on a directed data graph.
//! At every step the set of possible activation attempts forms a DAG (the
//! diffusion topology) that grows monotonically as the cascade proceeds. A
//! DAG-structured LSTM turns each activated node into a sender embedding, and
//! a softmax over receiver embeddings of the inactive nodes predicts the next
//! activation.
//!
//! Module map:
//! - [`graph`]: data graph, cascades, labels and diffusion topologies
//! - [`numeric`]: dense vectors/matrices, parameter stores, Adam, gradient checks, checkpoints
//! - [`model`]: the cell, cascade forward pass, scoring and the hand-derived backward pass
//! - [`trainer`]: dataset splits, the regularized objective and mini-batch training
//! - [`eval`]: ranking metrics (MAP@k, Hits@k) over per-step prediction instances
//! - [`icsb`]: the independent-cascade Static Bernoulli baseline
//! - [`datagen`]: synthetic graphs and independent-cascade simulation

pub mod datagen;
pub mod error;
pub mod eval;
pub mod graph;
pub mod icsb;
pub mod model;
pub mod numeric;
pub mod par;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Cascade, DataGraph, DiffusionTopology, NodeId, NodeLabels};
pub use model::{Model, ModelConfig, ScoreMode};

/// Crate version, echoed into every artifact written by the pipeline.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
