//! Minimal deterministic neural toolkit: tensors, a reverse-mode tape,
//! recurrent and attention blocks, Adam, dropout, gradient checking and
//! parameter files.

pub mod adam;
pub mod dropout;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod layers;
pub mod store;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dropout::{dropout, dropout_mask, Mode};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use graph::{Gradients, Graph, NodeId, PROB_EPS};
pub use layers::{
    bilstm_last, bilstm_last_graph, feature_attention, loss, loss_graph, lstm_cell, output_head, output_head_graph,
    AttentionNodes, AttentionParams, Head, LstmNodes, LstmParams,
};
pub use store::{ParamStore, FORMAT_VERSION};
pub use tensor::{Precision, Tensor};

#[cfg(test)]
mod tests;
