use super::{ActionLossMode, Reduction};
use crate::data::{TokenInput, UtteranceRecord, END};
use crate::model::{Example, Model};
use crate::numerics::{Tape, Var};
use crate::{Error, Result};

/// Loss weights and modes for one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOptions {
    pub alpha: f64,
    pub action_loss: ActionLossMode,
    pub reduction: Reduction,
    pub lm_weight: f64,
    /// Feed the gold intent embedding to the slot head instead of the
    /// predicted one.
    pub gold_intent: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            alpha: 0.125,
            action_loss: ActionLossMode::Bce,
            reduction: Reduction::Mean,
            lm_weight: 0.0,
            gold_intent: true,
        }
    }
}

/// Recorded batch loss. `action` is `None` for models without an action
/// layer; it is still recorded (but not differentiated) when `α = 0`.
#[derive(Clone, Copy, Debug)]
pub struct BatchLoss {
    pub total: Var,
    pub total_value: f64,
    pub slu: f64,
    pub action: Option<f64>,
    pub lm: Option<f64>,
}

/// Builds `L_SLU + α·L_action (+ w·L_LM)` for `batch` on `tape`.
pub fn batch_loss(
    tape: &mut Tape,
    model: &Model,
    batch: &[Example],
    opts: &LossOptions,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::InvalidBatch("empty batch".into()));
    }
    if !(opts.alpha.is_finite() && opts.alpha >= 0.0) {
        return Err(Error::InvalidInput("alpha must be >= 0".into()));
    }
    for ex in batch {
        if ex.inputs.is_empty() || ex.slots.len() != ex.inputs.len() {
            return Err(Error::InvalidBatch(
                "every token needs a gold slot label".into(),
            ));
        }
    }
    let seqs: Vec<&[TokenInput]> = batch.iter().map(|e| e.inputs.as_slice()).collect();
    let scale = match opts.reduction {
        Reduction::Mean => 1.0 / batch.len() as f64,
        Reduction::Sum => 1.0,
    };
    let fwd = model.trunk_on_tape(tape, &seqs)?;
    let sentence = model.sentence_on_tape(tape, &fwd)?;
    let intent_logits = model.intent_logits_on_tape(tape, sentence)?;
    let gold_intents: Vec<usize> = batch.iter().map(|e| e.intent).collect();
    let used_intents: Vec<usize> = if opts.gold_intent {
        gold_intents.clone()
    } else {
        let n = model.schema().n_intents();
        let z = tape.value(intent_logits);
        (0..batch.len())
            .map(|i| crate::numerics::ops::argmax(&z[i * n..(i + 1) * n]))
            .collect()
    };
    let gold_slots: Vec<usize> = batch.iter().flat_map(|e| e.slots.iter().copied()).collect();

    let ce_i = tape.softmax_cross_entropy(intent_logits, gold_intents)?;
    let slot_logits = model.slot_logits_on_tape(tape, &fwd, &used_intents)?;
    let ce_s = tape.softmax_cross_entropy(slot_logits, gold_slots.clone())?;
    let slu_sum = tape.add(ce_i, ce_s)?;
    let slu = tape.scale(slu_sum, scale);
    let mut total = slu;

    let cfg = model.config();
    let mut action_parts = Vec::new();
    if cfg.action_head {
        let logits = model.action_logits_on_tape(tape, &fwd)?;
        let part = match opts.action_loss {
            ActionLossMode::Bce => {
                let n = model.schema().n_slots();
                let mut targets = vec![0.0; gold_slots.len() * n];
                for (r, &c) in gold_slots.iter().enumerate() {
                    targets[r * n + c] = 1.0;
                }
                tape.bce_with_logits(logits, targets)?
            }
            ActionLossMode::GoldNll => tape.sigmoid_nll(logits, gold_slots.clone())?,
        };
        action_parts.push(part);
    }
    if cfg.factored_head {
        let logits = model.factored_logits_on_tape(tape, &fwd, &seqs)?;
        let outside = model.schema().outside_index();
        let mut targets = Vec::with_capacity(gold_slots.len());
        for ex in batch {
            for t in 0..ex.slots.len() {
                let desired = ex.slots.get(t + 1).is_some_and(|&s| s != outside);
                targets.push(if desired { 1.0 } else { 0.0 });
            }
        }
        action_parts.push(tape.bce_with_logits(logits, targets)?);
    }
    let mut action_value = None;
    if let Some((&first, rest)) = action_parts.split_first() {
        let mut sum = first;
        for &p in rest {
            sum = tape.add(sum, p)?;
        }
        let action = tape.scale(sum, scale);
        action_value = Some(tape.scalar(action));
        if opts.alpha > 0.0 {
            let weighted = tape.scale(action, opts.alpha);
            total = tape.add(total, weighted)?;
        }
    }
    let mut lm_value = None;
    if opts.lm_weight > 0.0 {
        let logits = model.lm_logits_on_tape(tape, &fwd)?;
        let next: Vec<usize> = batch
            .iter()
            .flat_map(|e| {
                (0..e.inputs.len()).map(move |t| e.inputs.get(t + 1).map_or(END, |x| x.word))
            })
            .collect();
        let ce = tape.softmax_cross_entropy(logits, next)?;
        let lm = tape.scale(ce, scale);
        lm_value = Some(tape.scalar(lm));
        let weighted = tape.scale(lm, opts.lm_weight);
        total = tape.add(total, weighted)?;
    }
    Ok(BatchLoss {
        total,
        total_value: tape.scalar(total),
        slu: tape.scalar(slu),
        action: action_value,
        lm: lm_value,
    })
}

fn examples(model: &Model, records: &[UtteranceRecord]) -> Result<Vec<Example>> {
    records.iter().map(|r| model.example(r)).collect()
}

fn evaluate(model: &Model, records: &[UtteranceRecord], opts: &LossOptions) -> Result<BatchLoss> {
    let batch = examples(model, records)?;
    let mut tape = Tape::new(model.params());
    batch_loss(&mut tape, model, &batch, opts)
}

/// Intent plus per-token slot cross-entropy, mean over the batch, with the
/// gold intent feeding the slot head.
pub fn slu_loss(model: &Model, records: &[UtteranceRecord]) -> Result<f64> {
    Ok(evaluate(model, records, &LossOptions::default())?.slu)
}

/// Action-layer loss, mean over the batch.
pub fn action_loss(
    model: &Model,
    records: &[UtteranceRecord],
    mode: ActionLossMode,
) -> Result<f64> {
    let opts = LossOptions {
        action_loss: mode,
        ..LossOptions::default()
    };
    evaluate(model, records, &opts)?
        .action
        .ok_or_else(|| Error::Mode("model has no action layer".into()))
}

/// `L_SLU + α·L_action`.
pub fn total_loss(model: &Model, records: &[UtteranceRecord], alpha: f64) -> Result<f64> {
    let opts = LossOptions {
        alpha,
        ..LossOptions::default()
    };
    Ok(evaluate(model, records, &opts)?.total_value)
}
