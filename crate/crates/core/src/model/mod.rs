//! The conversational satisfaction model and its inputs.

mod config;
mod net;
mod vocab;

pub use config::{ModelConfig, OutputMode, Task, PRESETS};
pub use net::{
    build_loss, build_outputs, decide, init_params, param_layout, predict_online, ConvSatModel, Dropout, Label,
    OnlineState, Prediction, PreparedConversation, PreparedTurn, CONFIG_FILE, PARAMS_FILE, VOCAB_FILE,
};
pub use vocab::{
    char_id, chars_of, expand_context, read_embeddings, Token, Vocab, CHAR_VOCAB_SIZE, NUM_RESERVED, PAD_ID,
    R_END_ID, UNK_ID, U_END_ID,
};

#[cfg(test)]
mod tests;
