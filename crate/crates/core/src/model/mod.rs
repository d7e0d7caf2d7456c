//! The shared causal transformer trunk and its heads: next-token LM, intent,
//! slot, latent action (one sigmoid per slot class) and the optional factored
//! binary action layer.
//!
//! Token input is `tok_emb[word] + mean(char_emb[chars]) + pos_emb[t]`, so
//! out-of-vocabulary words still carry their spelling. Every head reads the
//! final layer-normed trunk state `e_t`; the sentence representation is the
//! mean of the `e_t`.

mod checkpoint;
mod config;
mod forward;
mod infer;
mod layout;
mod schema;
#[cfg(test)]
mod tests;
mod toy;

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    load_checkpoint, read_tensors, save_checkpoint, write_tensors, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::ModelConfig;
pub use forward::TapeForward;
pub use infer::{CandidateScores, DecodeState, EncodedSequence, Extension};
pub use schema::{LabelSchema, OUTSIDE};
pub use toy::{toy_model, toy_schema, toy_vocab};

use crate::data::{TokenInput, UtteranceRecord, Vocabulary};
use crate::numerics::ParamSet;
use crate::{Error, Result};
use layout::Layout;

/// Which action probability a decoder is steered toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionTarget {
    /// Probability that the next token carries slot label `c`.
    Slot(usize),
    /// Collapsed action: whether the next token belongs to any slot span.
    Binary { desired: bool },
}

/// How the action layer scores next-token candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringMode {
    /// Extend the trunk by each candidate and read the action head there.
    #[default]
    Rescoring,
    /// One sigmoid per candidate from a vocabulary-row layer over the prefix
    /// state; binary targets only.
    Factored,
}

/// A record mapped to ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub inputs: Vec<TokenInput>,
    pub intent: usize,
    pub slots: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    schema: LabelSchema,
    vocab: Vocabulary,
    params: ParamSet,
    layout: Layout,
}

impl Model {
    /// Fresh model; `config` must already carry the vocabulary sizes.
    pub fn new(
        config: ModelConfig,
        schema: LabelSchema,
        vocab: Vocabulary,
        seed: u64,
    ) -> Result<Self> {
        Self::check(&config, &vocab)?;
        let params = layout::init_params(&config, &schema, seed);
        Self::from_params(config, schema, vocab, params)
    }

    pub fn from_params(
        config: ModelConfig,
        schema: LabelSchema,
        vocab: Vocabulary,
        params: ParamSet,
    ) -> Result<Self> {
        Self::check(&config, &vocab)?;
        let layout = Layout::resolve(&params, &config, &schema)?;
        for (_, name, t) in params.iter() {
            t.ensure_finite(name)?;
        }
        Ok(Self {
            config,
            schema,
            vocab,
            params,
            layout,
        })
    }

    fn check(config: &ModelConfig, vocab: &Vocabulary) -> Result<()> {
        config.validate()?;
        if config.vocab_size != vocab.len() || config.char_vocab_size != vocab.char_len() {
            return Err(Error::Config(format!(
                "config sizes ({}, {}) do not match vocabulary ({}, {})",
                config.vocab_size,
                config.char_vocab_size,
                vocab.len(),
                vocab.char_len()
            )));
        }
        Ok(())
    }

    /// Scalar count `config` allocates under `schema`.
    pub fn expected_parameter_count(config: &ModelConfig, schema: &LabelSchema) -> usize {
        layout::expected_numel(config, schema)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Mutable access for optimizers. Tensor shapes must not change.
    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.numel()
    }

    /// Names of the action-layer tensors (both modes).
    pub fn action_param_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for lin in [self.layout.action, self.layout.factored]
            .into_iter()
            .flatten()
        {
            out.push(self.params.name(lin.w));
            out.push(self.params.name(lin.b));
        }
        out
    }

    pub fn encode_inputs(&self, tokens: &[String]) -> Vec<TokenInput> {
        self.vocab.encode(tokens)
    }

    /// Maps a labeled record to ids; unknown labels are an invalid batch.
    pub fn example(&self, record: &UtteranceRecord) -> Result<Example> {
        if record.tokens.is_empty() || record.slots.len() != record.tokens.len() {
            return Err(Error::InvalidBatch(format!(
                "record needs one slot label per token ({} tokens, {} labels)",
                record.tokens.len(),
                record.slots.len()
            )));
        }
        let intent = self
            .schema
            .intent_index(&record.intent)
            .ok_or_else(|| Error::InvalidBatch(format!("unknown intent {:?}", record.intent)))?;
        let slots = record
            .slots
            .iter()
            .map(|s| {
                self.schema
                    .slot_index(s)
                    .ok_or_else(|| Error::InvalidBatch(format!("unknown slot label {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Example {
            inputs: self.vocab.encode(&record.tokens),
            intent,
            slots,
        })
    }
}
