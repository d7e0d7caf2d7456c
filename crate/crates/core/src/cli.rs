//! Command-line driver. Every subcommand reads one TOML config plus flag
//! overrides and writes `config.resolved`, `history.csv`, `report.csv`,
//! `report.md` and `checkpoints/` under its run directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{
    format_conll, format_jsonl, kshot_sample, load_conll, load_jsonl, write_text, Corpus, Grammar,
    WordOrder,
};
use crate::decoding::{
    beam_decode, format_predictions_jsonl, greedy_decode, predict_slu, DecodeConfig, Strategy,
};
use crate::harness::{
    bench_inference, evaluate, gradcheck_model, metrics_csv, metrics_markdown, run_ablation,
    AblationConfig, BenchConfig, BenchmarkSplits, GradCheckConfig, MetricsMode, SyntheticBenchmark,
    Variant,
};
use crate::model::{
    load_checkpoint, save_checkpoint, ActionTarget, LabelSchema, Model, ModelConfig, ScoringMode,
};
use crate::numerics::ZERO_GRADIENT;
use crate::training::{adapt, fit, History, TrainConfig};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Ablation variants and seeds; model, training and data come from the
/// shared sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub throughput: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        let d = AblationConfig::default();
        Self {
            variants: d.variants,
            seeds: d.seeds,
            throughput: d.throughput,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSection {
    /// Support examples per class; 0 is zero-shot.
    pub k: usize,
    /// Number of classes sampled.
    pub n: usize,
}

impl Default for AdaptSection {
    fn default() -> Self {
        Self { k: 5, n: 8 }
    }
}

/// Everything a run can be configured with. A top-level `seed` overrides
/// the per-section seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub metrics: MetricsMode,
    pub data: SyntheticBenchmark,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub ablation: AblationSection,
    pub adapt: AdaptSection,
    pub bench: BenchConfig,
    pub gradcheck: GradCheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let a = AblationConfig::default();
        Self {
            seed: None,
            metrics: MetricsMode::Standard,
            data: a.data,
            model: a.model,
            train: a.train,
            decode: DecodeConfig::default(),
            ablation: AblationSection::default(),
            adapt: AdaptSection::default(),
            bench: BenchConfig::default(),
            gradcheck: GradCheckConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Pushes the top-level seed into every section.
    fn resolve(&mut self) {
        if let Some(s) = self.seed {
            self.train.seed = s;
            self.bench.seed = s;
            self.gradcheck.seed = s;
        }
    }

    pub fn ablation_config(&self) -> AblationConfig {
        AblationConfig {
            variants: self.ablation.variants.clone(),
            seeds: self.ablation.seeds.clone(),
            data: self.data.clone(),
            model: self.model.clone(),
            train: self.train.clone(),
            metrics: self.metrics,
            throughput: self.ablation.throughput,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lada",
    version,
    about = "Joint intent detection and slot filling with a latent action layer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to runs/<subcommand>.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DataFormat {
    Jsonl,
    Conll,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricsArg {
    Standard,
    PaperLiteral,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrderArg {
    Identity,
    Reversal,
    SovSwap,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Greedy,
    Beam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Rescoring,
    Factored,
}

#[derive(Args, Debug, Clone)]
struct ModelFlags {
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Action-loss weight during training.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic source/target corpora.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
        #[arg(long)]
        data_seed: Option<u64>,
        #[arg(long, value_enum)]
        word_order: Option<OrderArg>,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: DataFormat,
    },
    /// Train a model and score it on the evaluation splits.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
        /// Training corpus (.jsonl or .conll); synthetic source data otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus to score; the synthetic splits otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Decoding weight of the action layer.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum)]
        metrics: Option<MetricsArg>,
    },
    /// Tag utterances, or generate from a prompt with action guidance.
    Decode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Utterance to tag; repeatable.
        #[arg(long)]
        text: Vec<String>,
        /// File with one utterance per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Generate a continuation of this prompt instead of tagging.
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long)]
        beam_width: Option<usize>,
        #[arg(long)]
        max_length: Option<usize>,
        /// Slot label steered toward in rescoring mode, e.g. B-city.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Rewrite stray I- labels to B-.
        #[arg(long)]
        repair: bool,
    },
    /// Few-shot adaptation on a target corpus, then scoring on the query set.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target corpus; the synthetic target split otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train and score each variant over the seeds.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Also time tagging; the throughput column then varies run to run.
        #[arg(long)]
        throughput: bool,
        #[arg(long)]
        save_checkpoints: bool,
    },
    /// Generation throughput with and without action guidance.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        min_seconds: Option<f64>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        candidate_k: Option<usize>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        d_model: Option<usize>,
    },
    /// Finite-difference check of the full loss.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d_model: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        per_param: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData { .. } => "gen-data",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Decode { .. } => "decode",
            Command::Adapt { .. } => "adapt",
            Command::Ablate { .. } => "ablate",
            Command::Bench { .. } => "bench",
            Command::Gradcheck { .. } => "gradcheck",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::GenData { common, .. }
            | Command::Train { common, .. }
            | Command::Eval { common, .. }
            | Command::Decode { common, .. }
            | Command::Adapt { common, .. }
            | Command::Ablate { common, .. }
            | Command::Bench { common, .. }
            | Command::Gradcheck { common, .. } => common,
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ModelFlags {
    fn apply(&self, m: &mut ModelConfig) {
        set(&mut m.d_model, self.d_model);
        set(&mut m.trunk_layers, self.layers);
        set(&mut m.attention_heads, self.heads);
    }
}

impl TrainFlags {
    fn apply(&self, t: &mut TrainConfig) {
        set(&mut t.epochs, self.epochs);
        set(&mut t.learning_rate, self.lr);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.alpha, self.alpha);
        if self.max_steps.is_some() {
            t.max_steps = self.max_steps;
        }
    }
}

struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(root.join("checkpoints")).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        write_text(&self.root.join(name), text)
    }

    fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }
}

/// Paths ending in `.conll` load as CoNLL, everything else as JSONL.
fn load_corpus(path: &Path) -> Result<Corpus> {
    if path.extension().is_some_and(|e| e == "conll") {
        load_conll(path)
    } else {
        load_jsonl(path)
    }
}

fn synthetic(cfg: &RunConfig) -> Result<(LabelSchema, BenchmarkSplits)> {
    let schema = Grammar::standard().schema();
    let splits = cfg.data.build(&schema)?;
    Ok((schema, splits))
}

fn checkpoint_name(variant: &str, seed: u64) -> String {
    let slug: String = variant
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    format!("{slug}-seed{seed}")
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code: 0 on success, 1 on validation errors, 2 on runtime failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    let common = command.common().clone();
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    let run_dir = common
        .run_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(command.name()));
    match command {
        Command::GenData {
            train_size,
            test_size,
            data_seed,
            word_order,
            format,
            ..
        } => {
            set(&mut cfg.data.train_size, train_size);
            set(&mut cfg.data.test_size, test_size);
            set(&mut cfg.data.target.seed, data_seed);
            set(
                &mut cfg.data.target.word_order,
                word_order.map(|o| match o {
                    OrderArg::Identity => WordOrder::Identity,
                    OrderArg::Reversal => WordOrder::Reversal,
                    OrderArg::SovSwap => WordOrder::SovSwap,
                }),
            );
            let dir = begin(&mut cfg, run_dir)?;
            gen_data(&cfg, &dir, format)
        }
        Command::Train {
            model, train, data, ..
        } => {
            model.apply(&mut cfg.model);
            train.apply(&mut cfg.train);
            let dir = begin(&mut cfg, run_dir)?;
            train_cmd(&cfg, &dir, data.as_deref())
        }
        Command::Eval {
            checkpoint,
            data,
            alpha,
            metrics,
            ..
        } => {
            set(&mut cfg.decode.alpha, alpha);
            set(&mut cfg.metrics, metrics.map(metrics_mode));
            let dir = begin(&mut cfg, run_dir)?;
            eval_cmd(&cfg, &dir, &checkpoint, data.as_deref())
        }
        Command::Decode {
            checkpoint,
            text,
            input,
            prompt,
            alpha,
            strategy,
            beam_width,
            max_length,
            target,
            mode,
            repair,
            ..
        } => {
            set(&mut cfg.decode.alpha, alpha);
            set(
                &mut cfg.decode.strategy,
                strategy.map(|s| match s {
                    StrategyArg::Greedy => Strategy::Greedy,
                    StrategyArg::Beam => Strategy::Beam,
                }),
            );
            set(&mut cfg.decode.beam_width, beam_width);
            set(&mut cfg.decode.max_length, max_length);
            if let Some(m) = mode {
                cfg.decode.mode = match m {
                    ModeArg::Rescoring => ScoringMode::Rescoring,
                    ModeArg::Factored => ScoringMode::Factored,
                };
                if cfg.decode.mode == ScoringMode::Factored {
                    cfg.decode.target = ActionTarget::Binary { desired: true };
                }
            }
            let model = load_checkpoint(&checkpoint)?;
            if let Some(label) = target {
                let c = model
                    .schema()
                    .slot_index(&label)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown slot label {label:?}")))?;
                cfg.decode.target = ActionTarget::Slot(c);
            }
            let dir = begin(&mut cfg, run_dir)?;
            let mut lines = text;
            if let Some(p) = input {
                let body = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                lines.extend(
                    body.lines()
                        .filter(|l| !l.trim().is_empty())
                        .map(String::from),
                );
            }
            decode_cmd(&cfg, &dir, &model, &lines, prompt.as_deref(), repair)
        }
        Command::Adapt {
            checkpoint,
            data,
            k,
            n,
            ..
        } => {
            set(&mut cfg.adapt.k, k);
            set(&mut cfg.adapt.n, n);
            let dir = begin(&mut cfg, run_dir)?;
            adapt_cmd(&cfg, &dir, &checkpoint, data.as_deref())
        }
        Command::Ablate {
            model,
            train,
            seeds,
            throughput,
            save_checkpoints,
            ..
        } => {
            model.apply(&mut cfg.model);
            train.apply(&mut cfg.train);
            set(&mut cfg.ablation.seeds, seeds);
            cfg.ablation.throughput |= throughput;
            let dir = begin(&mut cfg, run_dir)?;
            ablate_cmd(&cfg, &dir, save_checkpoints)
        }
        Command::Bench {
            min_seconds,
            repeats,
            candidate_k,
            vocab_size,
            d_model,
            ..
        } => {
            set(&mut cfg.bench.min_seconds, min_seconds);
            set(&mut cfg.bench.repeats, repeats);
            set(&mut cfg.bench.candidate_k, candidate_k);
            set(&mut cfg.bench.vocab_size, vocab_size);
            set(&mut cfg.bench.model.d_model, d_model);
            let dir = begin(&mut cfg, run_dir)?;
            bench_cmd(&cfg, &dir)
        }
        Command::Gradcheck {
            d_model,
            eps,
            tolerance,
            per_param,
            ..
        } => {
            set(&mut cfg.gradcheck.d_model, d_model);
            set(&mut cfg.gradcheck.eps, eps);
            set(&mut cfg.gradcheck.tolerance, tolerance);
            if per_param.is_some() {
                cfg.gradcheck.per_param = per_param;
            }
            let dir = begin(&mut cfg, run_dir)?;
            gradcheck_cmd(&cfg, &dir)
        }
    }
}

fn metrics_mode(m: MetricsArg) -> MetricsMode {
    match m {
        MetricsArg::Standard => MetricsMode::Standard,
        MetricsArg::PaperLiteral => MetricsMode::PaperLiteral,
    }
}

/// Resolves seeds, creates the run directory and records the config. The
/// history file starts header-only; training subcommands overwrite it.
fn begin(cfg: &mut RunConfig, root: PathBuf) -> Result<RunDir> {
    cfg.resolve();
    let dir = RunDir::create(root)?;
    dir.write("config.resolved", &cfg.to_toml()?)?;
    dir.write("history.csv", &format!("{}\n", History::CSV_HEADER))?;
    Ok(dir)
}

fn gen_data(cfg: &RunConfig, dir: &RunDir, format: DataFormat) -> Result<i32> {
    let (_, data) = synthetic(cfg)?;
    let mut splits = vec![("train".to_string(), data.train)];
    splits.extend(
        data.splits
            .into_iter()
            .map(|(n, c)| (format!("{n}_test"), c)),
    );
    let mut csv = String::from("split,utterances,tokens,spans,intents\n");
    let mut md =
        String::from("| split | utterances | tokens | spans | intents |\n|---|---|---|---|---|\n");
    for (name, corpus) in &splits {
        let (file, body) = match format {
            DataFormat::Jsonl => (format!("{name}.jsonl"), format_jsonl(corpus)),
            DataFormat::Conll => (format!("{name}.conll"), format_conll(corpus)),
        };
        dir.write(&file, &body)?;
        let spans: usize = corpus
            .iter()
            .map(|r| crate::harness::extract_spans(&r.slots).len())
            .sum();
        let mut intents: Vec<&str> = corpus.iter().map(|r| r.intent.as_str()).collect();
        intents.sort_unstable();
        intents.dedup();
        let row = format!(
            "{name},{},{},{spans},{}",
            corpus.len(),
            corpus.token_count(),
            intents.len()
        );
        csv.push_str(&row);
        csv.push('\n');
        md.push_str(&format!("| {} |\n", row.replace(',', " | ")));
        println!("{name}: {} utterances", corpus.len());
    }
    dir.write("report.csv", &csv)?;
    dir.write("report.md", &md)?;
    Ok(EXIT_OK)
}

fn train_cmd(cfg: &RunConfig, dir: &RunDir, data: Option<&Path>) -> Result<i32> {
    let (schema, train, splits) = match data {
        Some(p) => {
            let corpus = load_corpus(p)?;
            let schema = LabelSchema::from_corpus(&corpus)?;
            (schema, corpus.clone(), vec![("train".to_string(), corpus)])
        }
        None => {
            let (schema, d) = synthetic(cfg)?;
            (schema, d.train, d.splits)
        }
    };
    let out = fit(&train, &schema, &cfg.model, &cfg.train)?;
    dir.write("history.csv", &out.history.to_csv())?;
    dir.write("timing.json", &timing_json(&out.history))?;
    save_checkpoint(&out.model, dir.checkpoint("final"))?;
    let rows = score_splits(&out.model, &splits, cfg.train.alpha, cfg.metrics)?;
    write_metrics(dir, &rows)?;
    Ok(EXIT_OK)
}

fn timing_json(h: &History) -> String {
    let secs: Vec<f64> = h.epochs.iter().map(|e| e.wall_seconds).collect();
    serde_json::json!({ "epoch_wall_seconds": secs }).to_string()
}

fn score_splits(
    model: &Model,
    splits: &[(String, Corpus)],
    alpha: f64,
    mode: MetricsMode,
) -> Result<Vec<(String, f64, crate::harness::MetricsReport)>> {
    splits
        .iter()
        .map(|(n, c)| Ok((n.clone(), alpha, evaluate(model, c, alpha, mode)?)))
        .collect()
}

fn write_metrics(
    dir: &RunDir,
    rows: &[(String, f64, crate::harness::MetricsReport)],
) -> Result<()> {
    for (split, _, r) in rows {
        println!(
            "{split}: intent_acc {:.4} token_f1 {:.4} span_f1 {:.4}",
            r.intent_accuracy, r.token.f1, r.span.f1
        );
    }
    dir.write("report.csv", &metrics_csv(rows))?;
    dir.write("report.md", &metrics_markdown(rows))
}

fn eval_cmd(cfg: &RunConfig, dir: &RunDir, checkpoint: &Path, data: Option<&Path>) -> Result<i32> {
    let model = load_checkpoint(checkpoint)?;
    let splits = match data {
        Some(p) => vec![("data".to_string(), load_corpus(p)?)],
        None => synthetic(cfg)?.1.splits,
    };
    let rows = score_splits(&model, &splits, cfg.decode.alpha, cfg.metrics)?;
    write_metrics(dir, &rows)?;
    Ok(EXIT_OK)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn decode_cmd(
    cfg: &RunConfig,
    dir: &RunDir,
    model: &Model,
    lines: &[String],
    prompt: Option<&str>,
    repair: bool,
) -> Result<i32> {
    if let Some(prompt) = prompt {
        let tokens: Vec<String> = prompt.split_whitespace().map(String::from).collect();
        let inputs = model.vocab().encode(&tokens);
        let hyps = match cfg.decode.strategy {
            Strategy::Greedy => vec![greedy_decode(model, &inputs, &cfg.decode)?],
            Strategy::Beam => beam_decode(model, &inputs, &cfg.decode)?.hypotheses,
        };
        let mut csv = String::from("rank,tokens,fused_score,lm_log,action_log,finished\n");
        let mut md = String::from("| rank | tokens | fused score |\n|---|---|---|\n");
        for (i, h) in hyps.iter().enumerate() {
            let words: Vec<&str> = h
                .tokens
                .iter()
                .map(|&t| model.vocab().token(t).unwrap_or("?"))
                .collect();
            let text = words.join(" ");
            csv.push_str(&format!(
                "{i},{},{:.10},{:.10},{:.10},{}\n",
                csv_field(&text),
                h.fused_score(),
                h.lm_log,
                h.action_log,
                h.finished
            ));
            md.push_str(&format!("| {i} | {text} | {:.4} |\n", h.fused_score()));
            println!("{i}: {text}");
        }
        dir.write("report.csv", &csv)?;
        dir.write("report.md", &md)?;
        return Ok(EXIT_OK);
    }
    if lines.is_empty() {
        return Err(Error::InvalidInput(
            "decode needs --text, --input or --prompt".into(),
        ));
    }
    let preds = lines
        .iter()
        .map(|l| {
            let tokens: Vec<String> = l.split_whitespace().map(String::from).collect();
            predict_slu(model, &tokens, cfg.decode.alpha, repair)
        })
        .collect::<Result<Vec<_>>>()?;
    dir.write("predictions.jsonl", &format_predictions_jsonl(&preds))?;
    let mut csv = String::from("index,intent,tokens,slots\n");
    let mut md = String::from("| # | intent | tokens | slots |\n|---|---|---|---|\n");
    for (i, p) in preds.iter().enumerate() {
        let (t, s) = (p.tokens.join(" "), p.slots.join(" "));
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            csv_field(&p.intent),
            csv_field(&t),
            csv_field(&s)
        ));
        md.push_str(&format!("| {i} | {} | {t} | {s} |\n", p.intent));
        println!("{}\t{}", p.intent, s);
    }
    dir.write("report.csv", &csv)?;
    dir.write("report.md", &md)?;
    Ok(EXIT_OK)
}

fn adapt_cmd(cfg: &RunConfig, dir: &RunDir, checkpoint: &Path, data: Option<&Path>) -> Result<i32> {
    let model = load_checkpoint(checkpoint)?;
    let corpus = match data {
        Some(p) => load_corpus(p)?,
        None => {
            let (_, d) = synthetic(cfg)?;
            d.splits
                .into_iter()
                .find(|(n, _)| n == "target")
                .map(|(_, c)| c)
                .expect("synthetic splits include target")
        }
    };
    let task = kshot_sample(&corpus, cfg.adapt.k, cfg.adapt.n, cfg.train.seed)?;
    let out = adapt(&model, &task, &cfg.train)?;
    save_checkpoint(&out.model, dir.checkpoint("adapted"))?;
    dir.write(
        "predictions.jsonl",
        &format_predictions_jsonl(&out.predictions),
    )?;
    let query = Corpus::new(task.query.clone());
    let rows = vec![(
        format!("query_k{}", task.k),
        cfg.train.alpha,
        evaluate(&out.model, &query, cfg.train.alpha, cfg.metrics)?,
    )];
    println!(
        "adapted with {} steps on {} support examples",
        out.steps,
        task.support.len()
    );
    write_metrics(dir, &rows)?;
    Ok(EXIT_OK)
}

fn ablate_cmd(cfg: &RunConfig, dir: &RunDir, save: bool) -> Result<i32> {
    let acfg = cfg.ablation_config();
    acfg.validate()?;
    let (schema, data) = synthetic(cfg)?;
    let out = run_ablation(&acfg, &schema, &data)?;
    if save {
        for r in &out.runs {
            save_checkpoint(
                &r.model,
                dir.checkpoint(&checkpoint_name(&r.variant, r.seed)),
            )?;
        }
    }
    dir.write("history.csv", &out.history_csv())?;
    dir.write("report.csv", &out.table.to_csv())?;
    let md = out.table.to_markdown();
    dir.write("report.md", &md)?;
    print!("{md}");
    Ok(EXIT_OK)
}

fn bench_cmd(cfg: &RunConfig, dir: &RunDir) -> Result<i32> {
    let report = bench_inference(&cfg.bench)?;
    dir.write("report.csv", &report.to_csv())?;
    let md = report.to_markdown();
    dir.write("report.md", &md)?;
    let timing: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|r| serde_json::json!({ "setting": r.setting, "tokens_per_second": r.samples, "median": r.median() }))
        .collect();
    dir.write("timing.json", &serde_json::Value::Array(timing).to_string())?;
    print!("{md}");
    Ok(EXIT_OK)
}

fn gradcheck_cmd(cfg: &RunConfig, dir: &RunDir) -> Result<i32> {
    let g = &cfg.gradcheck;
    let r = gradcheck_model(g)?;
    let passed = r.max_rel_error < g.tolerance && r.max_abs_error_zero < ZERO_GRADIENT;
    let csv = format!(
        "d_model,coords_checked,zero_coords,max_rel_error,max_abs_error_zero,worst_param,worst_index,passed\n\
         {},{},{},{:e},{:e},{},{},{}\n",
        g.d_model,
        r.coords_checked,
        r.zero_coords,
        r.max_rel_error,
        r.max_abs_error_zero,
        r.worst_param,
        r.worst_index,
        passed
    );
    dir.write("report.csv", &csv)?;
    dir.write(
        "report.md",
        &format!(
            "max relative error {:e} over {} coordinates ({} with zero gradient); {}\n",
            r.max_rel_error,
            r.coords_checked,
            r.zero_coords,
            if passed { "pass" } else { "fail" }
        ),
    )?;
    println!("max relative error {:e}", r.max_rel_error);
    Ok(if passed { EXIT_OK } else { EXIT_RUNTIME })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml("nope = 1"),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_toml("[train]\nlr = 1").is_err());
    }

    #[test]
    fn top_level_seed_reaches_sections() {
        let mut c = RunConfig::from_toml("seed = 11\n[train]\nseed = 3").unwrap();
        c.resolve();
        assert_eq!((c.train.seed, c.bench.seed, c.gradcheck.seed), (11, 11, 11));
    }

    #[test]
    fn parse_errors_map_to_validation_exit() {
        assert_eq!(run(["lada", "train", "--bogus"]), EXIT_VALIDATION);
        assert_eq!(run(["lada"]), EXIT_VALIDATION);
        assert_eq!(run(["lada", "--help"]), EXIT_OK);
    }

    #[test]
    fn checkpoint_names_are_path_safe() {
        assert_eq!(checkpoint_name("w/o LaDA", 3), "w-o-lada-seed3");
    }
}
