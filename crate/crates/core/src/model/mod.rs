//! The relation classifier: label indexing, vocabulary, LSTM cells and the
//! bidirectional recurrent-convolutional network.

mod config;
mod labels;
pub mod lstm;
mod network;
mod vocab;

pub use config::{ConfigError, LstmVariant, ModelConfig};
pub use labels::{z_index, z_map, RelationLabel};
pub use lstm::{lstm_sequence, lstm_step, LstmCell};
pub use network::{
    decode, is_embedding, loss, Brcnn, ClassifierHeads, ConvLayer, Example, Linear, Mode, ModelError, Objective,
    Outputs, PathDirection, Prediction, Rcnn,
};
pub use vocab::{read_word_vectors, PathFeatures, Vocab, UNK, UNK_TOKEN};
