//! Finite-difference check of the full training loss on a small model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::RESERVED;
use crate::model::{toy_model, Example, ModelConfig};
use crate::numerics::{grad_check, CoordSample, GradCheckReport};
use crate::training::{batch_loss, ActionLossMode, LossOptions, Reduction};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub d_model: usize,
    pub trunk_layers: usize,
    pub attention_heads: usize,
    pub vocab_size: usize,
    pub seq_len: usize,
    /// Initialization scale. Near-zero weights leave attention uniform and
    /// its score gradients below finite-difference resolution.
    pub init_std: f64,
    pub batch_size: usize,
    pub alpha: f64,
    /// Weight of the next-token loss, so the LM head is checked too.
    pub lm_weight: f64,
    pub eps: f64,
    pub tolerance: f64,
    /// Probe this many coordinates per tensor; every coordinate when unset.
    pub per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            d_model: 16,
            trunk_layers: 2,
            attention_heads: 2,
            vocab_size: 50,
            seq_len: 8,
            init_std: 0.3,
            batch_size: 2,
            alpha: 0.125,
            lm_weight: 1.0,
            eps: 1e-5,
            tolerance: 1e-4,
            per_param: None,
            seed: 7,
        }
    }
}

/// Checks the gradient of `L_SLU + α·L_action + w·L_LM` (both action layers
/// enabled) on a random batch.
pub fn gradcheck_model(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.seq_len == 0 || cfg.batch_size == 0 || cfg.vocab_size <= RESERVED.len() {
        return Err(Error::Config(
            "seq_len and batch_size must be >= 1 and vocab_size must exceed the reserved ids"
                .into(),
        ));
    }
    let config = ModelConfig {
        d_model: cfg.d_model,
        trunk_layers: cfg.trunk_layers,
        attention_heads: cfg.attention_heads,
        max_len: cfg.seq_len,
        factored_head: true,
        init_std: cfg.init_std,
        ..ModelConfig::default()
    };
    let model = toy_model(config, cfg.vocab_size, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6772_6164);
    let schema = model.schema();
    let batch: Vec<Example> = (0..cfg.batch_size)
        .map(|_| Example {
            inputs: (0..cfg.seq_len)
                .map(|_| {
                    model
                        .vocab()
                        .input_for_id(rng.random_range(RESERVED.len()..cfg.vocab_size))
                })
                .collect(),
            intent: rng.random_range(0..schema.n_intents()),
            slots: (0..cfg.seq_len)
                .map(|_| rng.random_range(0..schema.n_slots()))
                .collect(),
        })
        .collect();
    let opts = LossOptions {
        alpha: cfg.alpha,
        action_loss: ActionLossMode::Bce,
        reduction: Reduction::Mean,
        lm_weight: cfg.lm_weight,
        gold_intent: true,
    };
    let coords = match cfg.per_param {
        Some(per_param) => CoordSample::PerParam {
            per_param,
            seed: cfg.seed,
        },
        None => CoordSample::All,
    };
    grad_check(model.params(), cfg.eps, coords, |tape| {
        Ok(batch_loss(tape, &model, &batch, &opts)?.total)
    })
}
