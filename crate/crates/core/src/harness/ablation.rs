//! Trains each variant on every seed and scores it on every split.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsMode, MetricsReport};
use crate::data::{generate_synthetic_pair, Corpus, SyntheticLanguageSpec};
use crate::model::{LabelSchema, Model, ModelConfig};
use crate::training::{fit, History, TrainConfig};
use crate::{Error, Result};

/// A named training and decoding weight for the action layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub alpha: f64,
}

impl Variant {
    pub fn new(name: impl Into<String>, alpha: f64) -> Self {
        Self {
            name: name.into(),
            alpha,
        }
    }
}

/// Source training data plus held-out source and target splits drawn from
/// the synthetic grammar. Training uses `target.seed`; the held-out draw
/// uses `target.seed + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBenchmark {
    pub train_size: usize,
    pub test_size: usize,
    pub target: SyntheticLanguageSpec,
}

impl Default for SyntheticBenchmark {
    fn default() -> Self {
        Self {
            train_size: 2000,
            test_size: 500,
            target: SyntheticLanguageSpec::reversal_affix(1),
        }
    }
}

/// Training corpus and named evaluation splits.
#[derive(Clone, Debug)]
pub struct BenchmarkSplits {
    pub train: Corpus,
    pub splits: Vec<(String, Corpus)>,
}

impl SyntheticBenchmark {
    pub fn build(&self, schema: &LabelSchema) -> Result<BenchmarkSplits> {
        let train = generate_synthetic_pair(schema, self.train_size, &self.target)?;
        let mut held = self.target.clone();
        held.seed = held.seed.wrapping_add(1);
        let test = generate_synthetic_pair(schema, self.test_size, &held)?;
        Ok(BenchmarkSplits {
            train: train.source,
            splits: vec![
                ("source".into(), test.source),
                ("target".into(), test.target),
            ],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub data: SyntheticBenchmark,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub metrics: MetricsMode,
    /// Also time tagging per split. Timings vary run to run, so the column
    /// stays empty unless this is set.
    pub throughput: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            variants: vec![Variant::new("LaDA", 0.125), Variant::new("w/o LaDA", 0.0)],
            seeds: (0..5).collect(),
            data: SyntheticBenchmark::default(),
            model: desk_model_config(),
            train: desk_train_config(),
            metrics: MetricsMode::Standard,
            throughput: false,
        }
    }
}

/// Model size used for the synthetic benchmark on a single core.
pub fn desk_model_config() -> ModelConfig {
    ModelConfig {
        d_model: 32,
        trunk_layers: 2,
        attention_heads: 4,
        ..ModelConfig::default()
    }
}

/// Reference schedule plus word dropout so the character path learns to
/// carry unseen target-side word forms.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        unk_dropout: 0.1,
        ..TrainConfig::default()
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "ablation needs at least one variant and one seed".into(),
            ));
        }
        for v in &self.variants {
            if !(v.alpha.is_finite() && v.alpha >= 0.0) {
                return Err(Error::Config(format!(
                    "variant {:?}: alpha must be >= 0",
                    v.name
                )));
            }
            if v.name.contains([',', '\n', '"']) {
                return Err(Error::Config(format!(
                    "variant name {:?} must not contain , \" or newlines",
                    v.name
                )));
            }
        }
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("variant names must be unique".into()));
        }
        self.model.validate_architecture()?;
        self.train.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    pub split: String,
    pub intent_acc: f64,
    pub token_f1: f64,
    pub span_f1: f64,
    /// Utterances tagged per second, when measured.
    pub throughput: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

const METRIC_COLUMNS: [&str; 4] = ["intent_acc", "token_f1", "span_f1", "throughput"];

impl AblationTable {
    pub const CSV_HEADER: &'static str =
        "variant,seed,split,intent_acc,token_f1,span_f1,throughput";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let tp = r.throughput.map(|t| format!("{t:.3}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{}",
                r.variant, r.seed, r.split, r.intent_acc, r.token_f1, r.span_f1, tp
            );
        }
        out
    }

    /// Variants and splits in first-seen order.
    fn keys(&self) -> (Vec<String>, Vec<String>) {
        let mut variants: Vec<String> = Vec::new();
        let mut splits: Vec<String> = Vec::new();
        for r in &self.rows {
            if !variants.contains(&r.variant) {
                variants.push(r.variant.clone());
            }
            if !splits.contains(&r.split) {
                splits.push(r.split.clone());
            }
        }
        (variants, splits)
    }

    /// Per-seed values of `metric` for one variant and split, in seed order.
    pub fn values(&self, variant: &str, split: &str, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.variant == variant && r.split == split)
            .filter_map(|r| match metric {
                "intent_acc" => Some(r.intent_acc),
                "token_f1" => Some(r.token_f1),
                "span_f1" => Some(r.span_f1),
                "throughput" => r.throughput,
                _ => None,
            })
            .collect()
    }

    /// One row per variant with mean ± sd per (split, metric); the best mean
    /// in each column is bold.
    pub fn to_markdown(&self) -> String {
        let (variants, splits) = self.keys();
        let mut columns: Vec<(String, &str)> = Vec::new();
        for s in &splits {
            for m in METRIC_COLUMNS {
                if variants.iter().any(|v| !self.values(v, s, m).is_empty()) {
                    columns.push((s.clone(), m));
                }
            }
        }
        let mut out = String::from("| variant |");
        for (s, m) in &columns {
            let _ = write!(out, " {s} {m} |");
        }
        out.push_str("\n|---|");
        for _ in &columns {
            out.push_str("---|");
        }
        out.push('\n');
        let stats: Vec<Vec<(f64, f64)>> = variants
            .iter()
            .map(|v| {
                columns
                    .iter()
                    .map(|(s, m)| mean_sd(&self.values(v, s, m)))
                    .collect()
            })
            .collect();
        let best: Vec<f64> = (0..columns.len())
            .map(|c| {
                stats
                    .iter()
                    .map(|row| row[c].0)
                    .filter(|x| x.is_finite())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        for (v, row) in variants.iter().zip(&stats) {
            let _ = write!(out, "| {v} |");
            for (c, &(mean, sd)) in row.iter().enumerate() {
                if !mean.is_finite() {
                    out.push_str(" |");
                    continue;
                }
                let cell = format!("{mean:.4} ± {sd:.4}");
                if mean == best[c] {
                    let _ = write!(out, " **{cell}** |");
                } else {
                    let _ = write!(out, " {cell} |");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Trained model and history for one (variant, seed).
#[derive(Clone, Debug)]
pub struct AblationRun {
    pub variant: String,
    pub seed: u64,
    pub history: History,
    pub model: Model,
    pub reports: Vec<(String, MetricsReport)>,
}

#[derive(Clone, Debug)]
pub struct AblationOutcome {
    pub table: AblationTable,
    pub runs: Vec<AblationRun>,
}

impl AblationOutcome {
    /// Loss histories prefixed by variant and seed.
    pub fn history_csv(&self) -> String {
        let mut out = format!("variant,seed,{}\n", History::CSV_HEADER);
        for r in &self.runs {
            for e in &r.history.epochs {
                let _ = writeln!(out, "{},{},{}", r.variant, r.seed, e.csv_fields());
            }
        }
        out
    }
}

/// Trains every variant with its own `α` for both loss and decoding on every
/// seed, then evaluates on each split. Variants share a seed's
/// initialization and batch order.
pub fn run_ablation(
    cfg: &AblationConfig,
    schema: &LabelSchema,
    data: &BenchmarkSplits,
) -> Result<AblationOutcome> {
    cfg.validate()?;
    let mut table = AblationTable::default();
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        for v in &cfg.variants {
            let train_cfg = TrainConfig {
                alpha: v.alpha,
                seed,
                ..cfg.train.clone()
            };
            let outcome = fit(&data.train, schema, &cfg.model, &train_cfg)?;
            let mut reports = Vec::new();
            for (name, split) in &data.splits {
                let started = Instant::now();
                let report = evaluate(&outcome.model, split, v.alpha, cfg.metrics)?;
                let secs = started.elapsed().as_secs_f64();
                table.rows.push(AblationRow {
                    variant: v.name.clone(),
                    seed,
                    split: name.clone(),
                    intent_acc: report.intent_accuracy,
                    token_f1: report.token.f1,
                    span_f1: report.span.f1,
                    throughput: cfg.throughput.then(|| split.len() as f64 / secs.max(1e-9)),
                });
                reports.push((name.clone(), report));
            }
            runs.push(AblationRun {
                variant: v.name.clone(),
                seed,
                history: outcome.history,
                model: outcome.model,
                reports,
            });
        }
    }
    Ok(AblationOutcome { table, runs })
}
