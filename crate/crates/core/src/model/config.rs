use serde::{Deserialize, Serialize};

use crate::data::{Vocabulary, RESERVED};
use crate::{Error, Result};

/// Trunk and head dimensions. `vocab_size` and `char_vocab_size` come from
/// the [`Vocabulary`]; see [`ModelConfig::with_vocab`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub char_vocab_size: usize,
    pub d_model: usize,
    pub trunk_layers: usize,
    pub attention_heads: usize,
    pub max_len: usize,
    /// Must equal `d_model` when set; the slot head averages the intent
    /// embedding with a token state elementwise.
    pub intent_embedding_dim: Option<usize>,
    /// Intent, slot and intent-embedding heads. Off gives a plain LM.
    pub slu_heads: bool,
    pub action_head: bool,
    /// Vocabulary-row binary action layer for the factored decoding mode.
    pub factored_head: bool,
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            char_vocab_size: 0,
            d_model: 64,
            trunk_layers: 2,
            attention_heads: 4,
            max_len: 32,
            intent_embedding_dim: None,
            slu_heads: true,
            action_head: true,
            factored_head: false,
            init_std: 0.02,
        }
    }
}

impl ModelConfig {
    pub fn with_vocab(mut self, vocab: &Vocabulary) -> Self {
        self.vocab_size = vocab.len();
        self.char_vocab_size = vocab.char_len();
        self
    }

    pub fn intent_dim(&self) -> usize {
        self.intent_embedding_dim.unwrap_or(self.d_model)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.vocab_size <= RESERVED.len() {
            return fail(format!(
                "vocab_size {} leaves no ordinary tokens",
                self.vocab_size
            ));
        }
        if self.char_vocab_size == 0 {
            return fail("char_vocab_size must be >= 1".into());
        }
        self.validate_architecture()
    }

    /// Everything [`validate`](Self::validate) checks except the vocabulary
    /// sizes, which are only known once a corpus is loaded.
    pub fn validate_architecture(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.trunk_layers == 0 || self.max_len == 0 {
            return fail("d_model, trunk_layers and max_len must be >= 1".into());
        }
        if self.attention_heads == 0 || !self.d_model.is_multiple_of(self.attention_heads) {
            return fail(format!(
                "attention_heads {} must divide d_model {}",
                self.attention_heads, self.d_model
            ));
        }
        if self.intent_dim() != self.d_model {
            return fail(format!(
                "intent_embedding_dim {} must equal d_model {}",
                self.intent_dim(),
                self.d_model
            ));
        }
        if self.action_head && !self.slu_heads {
            return fail("action_head requires slu_heads".into());
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return fail("init_std must be positive".into());
        }
        Ok(())
    }
}
