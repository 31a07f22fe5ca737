//! Embedding + bidirectional LSTM encoder, the parent decoder and the child
//! decoder with soft parent embeddings.

mod forward;
mod params;

pub use forward::{
    decode_child, decode_parent, embed, encode_document_states, forward, forward_batch,
    forward_on_tape, soft_parent_embedding, ChildStage, DocOutputs, ForwardOptions, ParentStage,
    PredictionScores,
};
pub use params::{LstmWeights, ModelDims, ModelParams, ParamVars, PARAM_NAMES};
