//! Generation throughput with and without action guidance.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{TokenInput, RESERVED};
use crate::decoding::{greedy_decode, DecodeConfig, Strategy};
use crate::hash::stable_hash;
use crate::model::{toy_model, ActionTarget, Model, ModelConfig, ScoringMode};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub model: ModelConfig,
    pub vocab_size: usize,
    pub prompts: usize,
    pub prompt_len: usize,
    pub max_length: usize,
    pub alpha: f64,
    pub candidate_k: usize,
    /// Slot class scored in rescoring mode.
    pub slot_class: usize,
    pub repeats: usize,
    /// Minimum measured time per setting, split evenly over the repeats.
    pub min_seconds: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                factored_head: true,
                ..ModelConfig::default()
            },
            vocab_size: 512,
            prompts: 16,
            prompt_len: 4,
            max_length: 16,
            alpha: 0.125,
            candidate_k: 8,
            slot_class: 1,
            repeats: 25,
            min_seconds: 10.0,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prompts == 0 || self.prompt_len == 0 || self.repeats == 0 {
            return Err(Error::Config(
                "prompts, prompt_len and repeats must be >= 1".into(),
            ));
        }
        if self.prompt_len + self.max_length > self.model.max_len {
            return Err(Error::Config(format!(
                "prompt_len + max_length = {} exceeds model max_len {}",
                self.prompt_len + self.max_length,
                self.model.max_len
            )));
        }
        if !(self.min_seconds.is_finite() && self.min_seconds >= 0.0) {
            return Err(Error::Config("min_seconds must be >= 0".into()));
        }
        if !self.model.action_head || !self.model.factored_head {
            return Err(Error::Config(
                "bench needs both the action head and the factored head".into(),
            ));
        }
        Ok(())
    }

    /// The three measured settings: plain LM, slot-class rescoring and
    /// factored binary scoring.
    pub fn settings(&self) -> Vec<(String, DecodeConfig)> {
        let base = DecodeConfig {
            alpha: 0.0,
            strategy: Strategy::Greedy,
            beam_width: 1,
            max_length: self.max_length,
            target: ActionTarget::Slot(self.slot_class),
            candidate_k: Some(self.candidate_k),
            full_vocab: false,
            mode: ScoringMode::Rescoring,
            stop_at_end: false,
        };
        vec![
            ("lm".into(), base.clone()),
            (
                "rescoring".into(),
                DecodeConfig {
                    alpha: self.alpha,
                    ..base.clone()
                },
            ),
            (
                "factored".into(),
                DecodeConfig {
                    alpha: self.alpha,
                    target: ActionTarget::Binary { desired: true },
                    mode: ScoringMode::Factored,
                    ..base
                },
            ),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub setting: String,
    pub alpha: f64,
    pub mode: ScoringMode,
    pub candidate_k: usize,
    pub tokens_per_pass: usize,
    /// Hash of every generated sequence; equal across reruns.
    pub checksum: u64,
    /// Tokens per second, one per round.
    pub samples: Vec<f64>,
}

impl BenchRow {
    pub fn median(&self) -> f64 {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, setting: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.setting == setting)
    }

    /// Median over rounds of the throughput of `setting` relative to the
    /// plain LM in the same round. Pairing by round cancels most of the
    /// drift in machine load.
    pub fn ratio(&self, setting: &str) -> Option<f64> {
        let (s, lm) = (self.row(setting)?, self.row("lm")?);
        let mut r: Vec<f64> = s
            .samples
            .iter()
            .zip(&lm.samples)
            .map(|(a, b)| a / b)
            .collect();
        if r.is_empty() {
            return None;
        }
        r.sort_by(f64::total_cmp);
        let n = r.len();
        Some(if n % 2 == 1 {
            r[n / 2]
        } else {
            0.5 * (r[n / 2 - 1] + r[n / 2])
        })
    }

    /// Deterministic description of what was decoded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,alpha,mode,candidate_k,tokens_per_pass,checksum\n");
        for r in &self.rows {
            let mode = match r.mode {
                _ if r.alpha == 0.0 => "none",
                ScoringMode::Rescoring => "rescoring",
                ScoringMode::Factored => "factored",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:016x}",
                r.setting, r.alpha, mode, r.candidate_k, r.tokens_per_pass, r.checksum
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| setting | alpha | k | median tokens/s | vs lm |\n|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let ratio = self.ratio(&r.setting).unwrap_or(f64::NAN);
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.1} | {:.3} |",
                r.setting,
                r.alpha,
                r.candidate_k,
                r.median(),
                ratio
            );
        }
        out
    }
}

fn prompts(model: &Model, cfg: &BenchConfig) -> Vec<Vec<TokenInput>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0062_656e_6368);
    let v = model.config().vocab_size;
    (0..cfg.prompts)
        .map(|_| {
            (0..cfg.prompt_len)
                .map(|_| {
                    model
                        .vocab()
                        .input_for_id(rng.random_range(RESERVED.len()..v))
                })
                .collect()
        })
        .collect()
}

fn pass(model: &Model, prompts: &[Vec<TokenInput>], dc: &DecodeConfig) -> Result<(usize, u64)> {
    let mut tokens = 0;
    let mut h = 0u64;
    for p in prompts {
        let hyp = greedy_decode(model, p, dc)?;
        tokens += hyp.tokens.len();
        let ids: Vec<String> = hyp.tokens.iter().map(|t| t.to_string()).collect();
        h = stable_hash(h, &ids.join(" "));
    }
    Ok((tokens, h))
}

/// Greedy decoding throughput for each setting: one warm-up pass, then
/// `repeats` timed rounds. Every round times each setting once, starting
/// from a rotating offset, and runs whole passes until its time share is
/// used.
pub fn bench_inference(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let model = toy_model(cfg.model.clone(), cfg.vocab_size, cfg.seed)?;
    let prompts = prompts(&model, cfg);
    let settings = cfg.settings();
    let mut rows = Vec::new();
    for (name, dc) in &settings {
        let (tokens, checksum) = pass(&model, &prompts, dc)?;
        rows.push(BenchRow {
            setting: name.clone(),
            alpha: dc.alpha,
            mode: dc.mode,
            candidate_k: dc.candidate_k(),
            tokens_per_pass: tokens,
            checksum,
            samples: Vec::new(),
        });
    }
    let share = cfg.min_seconds / cfg.repeats as f64;
    for round in 0..cfg.repeats {
        for j in 0..settings.len() {
            let i = (round + j) % settings.len();
            let (dc, row) = (&settings[i].1, &mut rows[i]);
            let started = Instant::now();
            let mut tokens = 0;
            loop {
                tokens += pass(&model, &prompts, dc)?.0;
                if started.elapsed().as_secs_f64() >= share {
                    break;
                }
            }
            row.samples
                .push(tokens as f64 / started.elapsed().as_secs_f64());
        }
    }
    Ok(BenchReport { rows })
}
