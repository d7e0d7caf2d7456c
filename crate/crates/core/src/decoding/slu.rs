use serde::Serialize;

use crate::data::repair_bio;
use crate::model::Model;
use crate::numerics::ops::{argmax, log_sigmoid_scalar, log_softmax_in_place};
use crate::{Error, Result};

/// Intent and per-token slot decisions for one utterance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SluPrediction {
    pub tokens: Vec<String>,
    pub intent: String,
    pub slots: Vec<String>,
    /// Fused score of the chosen label at each token.
    pub scores: Vec<f64>,
    pub alpha: f64,
}

/// Intent by argmax of the intent head; each slot label by argmax of
/// `log softmax(slot) + α·log sigmoid(action)`. Out-of-vocabulary tokens use
/// the character fallback. `repair` rewrites stray `I-X` labels to `B-X`.
pub fn predict_slu(
    model: &Model,
    tokens: &[String],
    alpha: f64,
    repair: bool,
) -> Result<SluPrediction> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let enc = model.encode_tokens(tokens)?;
    let intent = argmax(&model.intent_logits(enc.sentence())?);
    let hi = model.intent_embedding(intent)?;
    let schema = model.schema();
    let mut slots = Vec::with_capacity(tokens.len());
    let mut scores = Vec::with_capacity(tokens.len());
    for t in 0..enc.len() {
        let e = enc.state(t);
        let mut s = model.slot_logits(e, hi)?;
        log_softmax_in_place(&mut s);
        if alpha > 0.0 {
            for (v, z) in s.iter_mut().zip(model.action_logits(e)?) {
                *v += alpha * log_sigmoid_scalar(z);
            }
        }
        let k = argmax(&s);
        slots.push(schema.slot_name(k).to_string());
        scores.push(s[k]);
    }
    if repair {
        repair_bio(&mut slots);
    }
    Ok(SluPrediction {
        tokens: tokens.to_vec(),
        intent: schema.intent_name(intent).to_string(),
        slots,
        scores,
        alpha,
    })
}

/// One JSON object per line with keys tokens, intent, slots, scores, alpha.
pub fn format_predictions_jsonl(preds: &[SluPrediction]) -> String {
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p).expect("plain data serializes"));
        out.push('\n');
    }
    out
}
