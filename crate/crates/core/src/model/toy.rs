//! Small fixed vocabularies and schemas for tests, grad checks and
//! benchmarks on random models.

use super::{LabelSchema, Model, ModelConfig};
use crate::data::{Vocabulary, RESERVED};
use crate::Result;

/// `vocab_size` ids: the reserved entries, then `w3`, `w4`, ...
pub fn toy_vocab(vocab_size: usize) -> Vocabulary {
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain((RESERVED.len()..vocab_size.max(RESERVED.len() + 1)).map(|i| format!("w{i}")))
        .collect();
    Vocabulary::from_parts(tokens, "0123456789w".chars().collect())
}

/// Three intents and two slot types.
pub fn toy_schema() -> LabelSchema {
    LabelSchema::from_slot_types(
        vec!["ask".into(), "order".into(), "greet".into()],
        &["item".into(), "place".into()],
    )
    .expect("static schema")
}

/// A randomly initialized model over [`toy_vocab`] and [`toy_schema`].
pub fn toy_model(config: ModelConfig, vocab_size: usize, seed: u64) -> Result<Model> {
    let vocab = toy_vocab(vocab_size);
    Model::new(config.with_vocab(&vocab), toy_schema(), vocab, seed)
}
