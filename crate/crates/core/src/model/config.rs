use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How the LSTM output is formed from the cell state and output gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LstmVariant {
    /// `h = o * tanh(s)`
    #[default]
    Standard,
    /// `h = tanh(s * o)`
    PaperLiteral,
}

/// Network shape and training-time knobs. Hidden sizes of the word and
/// relation LSTMs equal the corresponding embedding sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub rel_dim: usize,
    pub conv_dim: usize,
    /// Number of directed relation types `K`.
    pub num_relations: usize,
    /// Weight of the forward distribution when decoding.
    pub alpha: f64,
    /// L2 weight on the non-embedding parameters (see `l2_embeddings`).
    pub lambda: f64,
    pub l2_embeddings: bool,
    /// Keep probability for dropout on embeddings during training.
    pub keep_prob: f64,
    pub lstm_variant: LstmVariant,
    pub share_fine_heads: bool,
    /// Words seen fewer times than this in training map to the UNK row.
    pub min_word_count: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 200,
            rel_dim: 50,
            conv_dim: 200,
            num_relations: 9,
            alpha: 0.5,
            lambda: 1e-5,
            l2_embeddings: false,
            keep_prob: 0.5,
            lstm_variant: LstmVariant::Standard,
            share_fine_heads: false,
            min_word_count: 2,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("invalid model config: {0}")]
pub struct ConfigError(pub String);

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_string()));
        if self.word_dim == 0 || self.rel_dim == 0 || self.conv_dim == 0 {
            return err("dimensions must be positive");
        }
        if self.num_relations == 0 {
            return err("num_relations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return err("alpha must lie in [0, 1]");
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return err("keep_prob must lie in (0, 1]");
        }
        if self.lambda < 0.0 {
            return err("lambda must be non-negative");
        }
        Ok(())
    }

    pub fn fine_classes(&self) -> usize {
        2 * self.num_relations + 1
    }

    pub fn coarse_classes(&self) -> usize {
        self.num_relations + 1
    }

    /// Width of one dependency unit `[h_a ; r_ab ; h_b]`.
    pub fn unit_dim(&self) -> usize {
        2 * self.word_dim + self.rel_dim
    }
}
