//! Relational message passing over prompted graphs.
//!
//! Each layer updates every node from its own state and the mean, per
//! relation, of `relu(h_j + x_ji)` over its in-edges. Layer outputs are
//! summarized per node by attention keyed on the input feature, and class
//! nodes are scored by a two-layer head.

mod backward;
mod checkpoint;
mod encode;
mod forward;
mod loss;
mod params;

pub use backward::{backward, backward_into};
pub use checkpoint::{BlockInfo, Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use encode::{label_vector, EncodedGraph, ReadoutPlan, RelationGroup};
pub use forward::{
    attention_readout, forward, layer_forward, node_readout, predict_class, sample_embedding, sigmoid, softmax,
    ForwardTrace, HeadTrace, NodeReadout,
};
pub use loss::{bce_loss, bce_score_grad, PROB_EPS};
pub use params::{ModelConfig, ModelParams, Scalar};
