use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionLossMode {
    /// Binary cross-entropy over every class against the one-hot gold.
    #[default]
    Bce,
    /// `−log p_c` for the gold class only.
    GoldNll,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

/// Optimization settings. Defaults are the reference schedule (lr 0.002,
/// batch 64, 9 epochs, α 0.125).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub alpha: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Fraction of epochs that feed the gold intent embedding to the slot
    /// head; afterwards the predicted intent is used.
    pub gold_intent_warmup_fraction: f64,
    pub seed: u64,
    pub action_loss: ActionLossMode,
    pub reduction: Reduction,
    /// Weight of an extra next-token LM loss; 0 leaves the LM head untrained.
    pub lm_weight: f64,
    pub freeze_action_head: bool,
    /// Probability of replacing a word id by `<unk>` during training, so the
    /// character path learns to carry unseen words.
    pub unk_dropout: f64,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// Few-shot fine-tuning budget and learning-rate multiplier.
    pub adapt_steps: usize,
    pub adapt_lr_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            batch_size: 64,
            epochs: 9,
            alpha: 0.125,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            gold_intent_warmup_fraction: 1.0 / 3.0,
            seed: 0,
            action_loss: ActionLossMode::Bce,
            reduction: Reduction::Mean,
            lm_weight: 0.0,
            freeze_action_head: false,
            unk_dropout: 0.0,
            max_steps: None,
            adapt_steps: 50,
            adapt_lr_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be > 0");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return fail("batch_size and epochs must be >= 1");
        }
        if !nonneg(self.alpha) {
            return fail("alpha must be >= 0");
        }
        if !nonneg(self.weight_decay) || !nonneg(self.lm_weight) {
            return fail("weight_decay and lm_weight must be >= 0");
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.adam_eps.is_nan()
            || self.adam_eps <= 0.0
        {
            return fail("betas must lie in [0, 1) and adam_eps must be > 0");
        }
        if !(0.0..=1.0).contains(&self.gold_intent_warmup_fraction) {
            return fail("gold_intent_warmup_fraction must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.unk_dropout) {
            return fail("unk_dropout must lie in [0, 1)");
        }
        if !(self.adapt_lr_scale.is_finite() && self.adapt_lr_scale > 0.0) {
            return fail("adapt_lr_scale must be > 0");
        }
        if self.max_steps == Some(0) {
            return fail("max_steps must be >= 1 when set");
        }
        Ok(())
    }

    /// Number of leading epochs that use the gold intent.
    pub fn warmup_epochs(&self) -> usize {
        (self.epochs as f64 * self.gold_intent_warmup_fraction).round() as usize
    }
}
