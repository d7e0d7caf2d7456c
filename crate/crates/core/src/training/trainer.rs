use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adamw::{AdamW, AdamWConfig};
use super::loss::{batch_loss, LossOptions};
use super::TrainConfig;
use crate::data::{build_vocab, Corpus, FewShotTask, UNK};
use crate::decoding::{predict_slu, SluPrediction};
use crate::model::{Example, LabelSchema, Model, ModelConfig};
use crate::numerics::Tape;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub slu_loss: f64,
    pub action_loss: Option<f64>,
    pub total_loss: f64,
    pub wall_seconds: f64,
}

impl EpochRecord {
    pub(crate) fn csv_fields(&self) -> String {
        let action = self
            .action_loss
            .map(|a| format!("{a:.10}"))
            .unwrap_or_default();
        format!(
            "{},{},{:.10},{},{:.10}",
            self.epoch, self.steps, self.slu_loss, action, self.total_loss
        )
    }
}

/// Per-epoch mean batch losses.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,steps,slu_loss,action_loss,total_loss";

    /// Loss history; deterministic for a fixed seed.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for e in &self.epochs {
            let _ = writeln!(out, "{}", e.csv_fields());
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: History,
    pub steps: usize,
}

struct Loop<'a> {
    cfg: &'a TrainConfig,
    opt: AdamW,
    frozen: Vec<bool>,
    rng: ChaCha8Rng,
}

impl Loop<'_> {
    fn step(
        &mut self,
        model: &mut Model,
        batch: &[Example],
        gold_intent: bool,
    ) -> Result<(f64, Option<f64>, f64)> {
        let batch: Vec<Example> = if self.cfg.unk_dropout > 0.0 {
            batch
                .iter()
                .map(|ex| {
                    let mut ex = ex.clone();
                    for inp in ex.inputs.iter_mut() {
                        if self.rng.random::<f64>() < self.cfg.unk_dropout {
                            inp.word = UNK;
                        }
                    }
                    ex
                })
                .collect()
        } else {
            batch.to_vec()
        };
        let opts = LossOptions {
            alpha: self.cfg.alpha,
            action_loss: self.cfg.action_loss,
            reduction: self.cfg.reduction,
            lm_weight: self.cfg.lm_weight,
            gold_intent,
        };
        let (grads, loss) = {
            let mut tape = Tape::new(model.params());
            let loss = batch_loss(&mut tape, model, &batch, &opts)?;
            (tape.backward(loss.total)?, loss)
        };
        self.opt.step(model.params_mut(), &grads, &self.frozen)?;
        Ok((loss.slu, loss.action, loss.total_value))
    }
}

fn new_loop<'a>(model: &Model, cfg: &'a TrainConfig, lr: f64, salt: u64) -> Loop<'a> {
    let frozen_names = if cfg.freeze_action_head {
        model.action_param_names()
    } else {
        Vec::new()
    };
    let frozen = model
        .params()
        .iter()
        .map(|(_, name, _)| frozen_names.contains(&name))
        .collect();
    let opt = AdamW::new(
        model.params(),
        AdamWConfig {
            lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
        },
    );
    Loop {
        cfg,
        opt,
        frozen,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ salt),
    }
}

/// Trains `model` on `corpus`: shuffled mini-batches each epoch, AdamW
/// updates on the composite loss, gold intents for the warmup epochs.
pub fn train(mut model: Model, corpus: &Corpus, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidInput("training corpus is empty".into()));
    }
    let examples: Vec<Example> = corpus
        .iter()
        .map(|r| model.example(r))
        .collect::<Result<_>>()?;
    let mut lp = new_loop(&model, cfg, cfg.learning_rate, 0x0074_7261_696e);
    let warm = cfg.warmup_epochs();
    let mut history = History::default();
    let mut steps = 0;
    let started = Instant::now();
    'epochs: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut lp.rng);
        let (mut slu, mut action, mut total, mut n) = (0.0, None::<f64>, 0.0, 0usize);
        let mut stop = false;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (s, a, t) = lp.step(&mut model, &batch, epoch < warm)?;
            slu += s;
            total += t;
            if let Some(a) = a {
                *action.get_or_insert(0.0) += a;
            }
            n += 1;
            steps += 1;
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                stop = true;
                break;
            }
        }
        let nf = n as f64;
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            steps,
            slu_loss: slu / nf,
            action_loss: action.map(|a| a / nf),
            total_loss: total / nf,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if stop {
            break 'epochs;
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        steps,
    })
}

/// Builds the vocabulary from `corpus`, initializes a model from
/// `model_config` with `cfg.seed`, and trains it.
pub fn fit(
    corpus: &Corpus,
    schema: &LabelSchema,
    model_config: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("training corpus is empty".into()));
    }
    let vocab = build_vocab(corpus, 1);
    let config = model_config.clone().with_vocab(&vocab);
    let model = Model::new(config, schema.clone(), vocab, cfg.seed)?;
    train(model, corpus, cfg)
}

#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub model: Model,
    pub predictions: Vec<SluPrediction>,
    pub steps: usize,
}

/// Zero-shot (`K = 0`) keeps `model` as is; otherwise fine-tunes on the
/// support set for `cfg.adapt_steps` steps at `cfg.adapt_lr_scale ×` the
/// learning rate. Then predicts every query utterance at `cfg.alpha`.
pub fn adapt(model: &Model, task: &FewShotTask, cfg: &TrainConfig) -> Result<AdaptOutcome> {
    cfg.validate()?;
    let mut model = model.clone();
    let mut steps = 0;
    if task.k > 0 && !task.support.is_empty() {
        let support: Vec<Example> = task
            .support
            .iter()
            .map(|r| model.example(r))
            .collect::<Result<_>>()?;
        let mut lp = new_loop(
            &model,
            cfg,
            cfg.learning_rate * cfg.adapt_lr_scale,
            0x0061_6461_7074,
        );
        let mut order: Vec<usize> = Vec::new();
        while steps < cfg.adapt_steps {
            if order.is_empty() {
                order = (0..support.len()).collect();
                order.shuffle(&mut lp.rng);
            }
            let take = order.len().min(cfg.batch_size);
            let batch: Vec<Example> = order.drain(..take).map(|i| support[i].clone()).collect();
            lp.step(&mut model, &batch, true)?;
            steps += 1;
        }
    }
    let predictions = task
        .query
        .iter()
        .map(|r| predict_slu(&model, &r.tokens, cfg.alpha, false))
        .collect::<Result<_>>()?;
    Ok(AdaptOutcome {
        model,
        predictions,
        steps,
    })
}
