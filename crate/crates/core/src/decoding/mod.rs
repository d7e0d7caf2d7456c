//! Action-guided generation and fused slot tagging.
//!
//! A fused step scores each next-token candidate `v` by
//! `log P_LM(v) + α·log P_action(c | prefix, v)` and renormalizes over the
//! candidate set. With `α = 0` the step is the LM distribution itself.

mod fused;
mod search;
mod slu;

use serde::{Deserialize, Serialize};

pub use fused::{fused_next_distribution, FusedStep};
pub use search::{beam_decode, greedy_decode, BeamOutput};
pub use slu::{format_predictions_jsonl, predict_slu, SluPrediction};

use crate::model::{ActionTarget, ScoringMode};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Greedy,
    Beam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub alpha: f64,
    pub strategy: Strategy,
    pub beam_width: usize,
    /// Number of tokens to generate after the prompt, at most.
    pub max_length: usize,
    pub target: ActionTarget,
    /// LM candidates considered per step; defaults to twice the beam width.
    pub candidate_k: Option<usize>,
    /// Fuse over the whole vocabulary instead of the top candidates.
    pub full_vocab: bool,
    pub mode: ScoringMode,
    /// Stop a hypothesis when it emits `<end>`.
    pub stop_at_end: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            alpha: 0.125,
            strategy: Strategy::Greedy,
            beam_width: 4,
            max_length: 16,
            target: ActionTarget::Slot(1),
            candidate_k: None,
            full_vocab: false,
            mode: ScoringMode::Rescoring,
            stop_at_end: true,
        }
    }
}

impl DecodeConfig {
    pub fn candidate_k(&self) -> usize {
        self.candidate_k.unwrap_or(2 * self.beam_width)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.beam_width == 0 {
            return Err(Error::Config("beam_width must be >= 1".into()));
        }
        if self.candidate_k() < self.beam_width {
            return Err(Error::Config(format!(
                "candidate_k {} must be >= beam_width {}",
                self.candidate_k(),
                self.beam_width
            )));
        }
        if self.max_length == 0 {
            return Err(Error::Config("max_length must be >= 1".into()));
        }
        Ok(())
    }
}

/// A partial or finished decode. Scores are sums over generated tokens.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub lm_log: f64,
    pub action_log: f64,
    /// Accumulated per-step log normalizers of the fused distribution.
    pub log_norm: f64,
    pub alpha: f64,
    pub finished: bool,
}

impl Hypothesis {
    pub fn new(alpha: f64) -> Self {
        Self {
            tokens: Vec::new(),
            lm_log: 0.0,
            action_log: 0.0,
            log_norm: 0.0,
            alpha,
            finished: false,
        }
    }

    /// `log P_LM + α·log P_action` less the normalizers: the log-probability
    /// of the tokens under the per-step fused distributions.
    pub fn fused_score(&self) -> f64 {
        self.lm_log + self.alpha * self.action_log - self.log_norm
    }

    /// Fused score divided by the number of generated tokens.
    pub fn normalized_score(&self) -> f64 {
        self.fused_score() / self.tokens.len().max(1) as f64
    }

    fn push(&self, step: &FusedStep, i: usize) -> Self {
        let mut h = self.clone();
        h.tokens.push(step.candidates[i]);
        h.lm_log += step.lm_log[i];
        h.action_log += step.action_log[i];
        h.log_norm += step.log_norm;
        h
    }
}
