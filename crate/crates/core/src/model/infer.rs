//! Incremental inference with a per-layer key/value cache. Row arithmetic
//! mirrors `forward.rs`, so states agree bit-for-bit with the tape.

use super::layout::Linear;
use super::{ActionTarget, Model, ScoringMode};
use crate::data::TokenInput;
use crate::numerics::ops::{self, attention_row, layer_norm_row, log_sigmoid_scalar};
use crate::numerics::Tensor;
use crate::{Error, Result};

/// Cached `[q | k | v]` rows for every layer plus the newest state.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeState {
    qkv: Vec<Vec<f64>>,
    last: Vec<f64>,
    len: usize,
}

impl DecodeState {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// State of the newest position; empty before the first token.
    pub fn last_state(&self) -> &[f64] {
        &self.last
    }
}

/// One-token extensions of a shared prefix, computed together.
#[derive(Clone, Debug)]
pub struct Extension {
    states: Vec<f64>,
    qkv: Vec<Vec<f64>>,
    d: usize,
}

impl Extension {
    pub fn len(&self) -> usize {
        self.states.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.d..(i + 1) * self.d]
    }
}

/// Per-position states and sentence representation of a sequence.
#[derive(Clone, Debug)]
pub struct EncodedSequence {
    states: Vec<f64>,
    sentence: Vec<f64>,
    d: usize,
    cache: DecodeState,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.states.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.d..(t + 1) * self.d]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Mean of the states.
    pub fn sentence(&self) -> &[f64] {
        &self.sentence
    }

    pub fn decode_state(&self) -> &DecodeState {
        &self.cache
    }

    pub fn into_decode_state(self) -> DecodeState {
        self.cache
    }
}

/// Action log-probabilities for a candidate set. Rescoring keeps the trunk
/// extensions so the chosen candidate's state can be committed without
/// recomputation.
#[derive(Clone, Debug)]
pub struct CandidateScores {
    pub candidates: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub extension: Option<Extension>,
}

fn linear_rows(x: &[f64], w: &Tensor, b: &Tensor, m: usize, out: &mut Vec<f64>) {
    let (k, n) = (w.rows(), w.cols());
    out.clear();
    out.resize(m * n, 0.0);
    ops::matmul(x, w.values(), m, k, n, out);
    for row in out.chunks_mut(n) {
        for (o, &bb) in row.iter_mut().zip(b.values()) {
            *o += bb;
        }
    }
}

fn layer_norm_rows(x: &[f64], g: &Tensor, b: &Tensor, d: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(x.len(), 0.0);
    let mut xhat = vec![0.0; d];
    for (xr, or) in x.chunks(d).zip(out.chunks_mut(d)) {
        layer_norm_row(xr, g.values(), b.values(), &mut xhat, or);
    }
}

impl Model {
    pub fn start_state(&self) -> DecodeState {
        DecodeState {
            qkv: vec![Vec::new(); self.config.trunk_layers],
            last: Vec::new(),
            len: 0,
        }
    }

    fn check_input(&self, inp: &TokenInput) -> Result<()> {
        if inp.word >= self.config.vocab_size {
            return Err(Error::Index {
                index: inp.word,
                len: self.config.vocab_size,
            });
        }
        if let Some(&c) = inp
            .chars
            .iter()
            .find(|&&c| c >= self.config.char_vocab_size)
        {
            return Err(Error::Index {
                index: c,
                len: self.config.char_vocab_size,
            });
        }
        Ok(())
    }

    /// Runs every input as the next token after `state`, independently.
    pub fn extend_candidates(
        &self,
        state: &DecodeState,
        inputs: &[TokenInput],
    ) -> Result<Extension> {
        let p = state.len;
        if p + 1 > self.config.max_len {
            return Err(Error::Capacity {
                len: p + 1,
                max: self.config.max_len,
            });
        }
        if inputs.is_empty() {
            return Err(Error::InvalidInput("no candidate inputs".into()));
        }
        for inp in inputs {
            self.check_input(inp)?;
        }
        let d = self.config.d_model;
        let m = inputs.len();
        let l = &self.layout;
        let pr = &self.params;
        let (tok, chr, pos) = (pr.get(l.tok_emb), pr.get(l.char_emb), pr.get(l.pos_emb));
        let mut x = vec![0.0; m * d];
        let mut cm = vec![0.0; d];
        for (i, inp) in inputs.iter().enumerate() {
            cm.fill(0.0);
            for &c in &inp.chars {
                for (a, &v) in cm.iter_mut().zip(chr.row(c)) {
                    *a += v;
                }
            }
            if !inp.chars.is_empty() {
                let inv = 1.0 / inp.chars.len() as f64;
                for a in cm.iter_mut() {
                    *a *= inv;
                }
            }
            let (tr, pe) = (tok.row(inp.word), pos.row(p));
            for j in 0..d {
                x[i * d + j] = (tr[j] + cm[j]) + pe[j];
            }
        }

        let heads = self.config.attention_heads;
        let (mut h, mut qkv, mut att, mut o, mut f, mut f2) = (
            Vec::new(),
            Vec::new(),
            vec![0.0; m * d],
            Vec::new(),
            Vec::new(),
            Vec::new(),
        );
        let mut probs = vec![0.0; heads * (p + 1)];
        let mut new_qkv = Vec::with_capacity(l.layers.len());
        for (li, ly) in l.layers.iter().enumerate() {
            layer_norm_rows(&x, pr.get(ly.ln1_g), pr.get(ly.ln1_b), d, &mut h);
            linear_rows(&h, pr.get(ly.w_qkv), pr.get(ly.b_qkv), m, &mut qkv);
            let mut scratch = Vec::with_capacity((p + 1) * 3 * d);
            scratch.extend_from_slice(&state.qkv[li]);
            scratch.resize((p + 1) * 3 * d, 0.0);
            for i in 0..m {
                let row = &qkv[i * 3 * d..(i + 1) * 3 * d];
                scratch[p * 3 * d..].copy_from_slice(row);
                attention_row(
                    &row[..d],
                    &scratch,
                    p + 1,
                    heads,
                    &mut att[i * d..(i + 1) * d],
                    &mut probs,
                );
            }
            linear_rows(&att, pr.get(ly.w_o), pr.get(ly.b_o), m, &mut o);
            for (a, &b) in x.iter_mut().zip(&o) {
                *a += b;
            }
            layer_norm_rows(&x, pr.get(ly.ln2_g), pr.get(ly.ln2_b), d, &mut h);
            linear_rows(&h, pr.get(ly.w_ff1), pr.get(ly.b_ff1), m, &mut f);
            for v in f.iter_mut() {
                *v = ops::gelu(*v);
            }
            linear_rows(&f, pr.get(ly.w_ff2), pr.get(ly.b_ff2), m, &mut f2);
            for (a, &b) in x.iter_mut().zip(&f2) {
                *a += b;
            }
            new_qkv.push(std::mem::take(&mut qkv));
        }
        let mut states = Vec::new();
        layer_norm_rows(&x, pr.get(l.lnf_g), pr.get(l.lnf_b), d, &mut states);
        Ok(Extension {
            states,
            qkv: new_qkv,
            d,
        })
    }

    /// Appends candidate `i` of `ext` to `state`.
    pub fn commit(&self, state: &mut DecodeState, ext: &Extension, i: usize) {
        let w = 3 * ext.d;
        for (cache, rows) in state.qkv.iter_mut().zip(&ext.qkv) {
            cache.extend_from_slice(&rows[i * w..(i + 1) * w]);
        }
        state.last = ext.state(i).to_vec();
        state.len += 1;
    }

    pub fn extend(&self, state: &mut DecodeState, input: &TokenInput) -> Result<()> {
        let ext = self.extend_candidates(state, std::slice::from_ref(input))?;
        self.commit(state, &ext, 0);
        Ok(())
    }

    pub fn encode(&self, inputs: &[TokenInput]) -> Result<EncodedSequence> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput(
                "cannot encode an empty sequence".into(),
            ));
        }
        if inputs.len() > self.config.max_len {
            return Err(Error::Capacity {
                len: inputs.len(),
                max: self.config.max_len,
            });
        }
        let d = self.config.d_model;
        let mut state = self.start_state();
        let mut states = Vec::with_capacity(inputs.len() * d);
        for inp in inputs {
            self.extend(&mut state, inp)?;
            states.extend_from_slice(&state.last);
        }
        let mut sentence = vec![0.0; d];
        for row in states.chunks(d) {
            for (a, &b) in sentence.iter_mut().zip(row) {
                *a += b;
            }
        }
        let inv = 1.0 / inputs.len() as f64;
        for a in sentence.iter_mut() {
            *a *= inv;
        }
        Ok(EncodedSequence {
            states,
            sentence,
            d,
            cache: state,
        })
    }

    pub fn encode_tokens(&self, tokens: &[String]) -> Result<EncodedSequence> {
        self.encode(&self.vocab.encode(tokens))
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.d_model {
            return Err(Error::Shape(format!(
                "state of length {} for d_model {}",
                x.len(),
                self.config.d_model
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite state".into()));
        }
        Ok(())
    }

    fn apply(
        &self,
        x: &[f64],
        w: crate::numerics::ParamId,
        b: crate::numerics::ParamId,
    ) -> Vec<f64> {
        let mut out = Vec::new();
        linear_rows(x, self.params.get(w), self.params.get(b), 1, &mut out);
        out
    }

    pub fn lm_logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        Ok(self.apply(state, self.layout.lm.w, self.layout.lm.b))
    }

    pub fn lm_log_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.lm_logits(state)?;
        ops::log_softmax_in_place(&mut z);
        Ok(z)
    }

    /// `(log_probs, probs)` from a single logit evaluation; `probs` is
    /// bit-identical to [`Model::lm_head`].
    pub fn lm_distribution(&self, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut log_probs = self.lm_logits(state)?;
        let mut probs = log_probs.clone();
        ops::softmax_in_place(&mut probs);
        ops::log_softmax_in_place(&mut log_probs);
        Ok((log_probs, probs))
    }

    /// Next-token distribution after the position holding `state`.
    pub fn lm_head(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.lm_logits(state)?;
        ops::softmax_in_place(&mut z);
        Ok(z)
    }

    pub fn intent_logits(&self, sentence: &[f64]) -> Result<Vec<f64>> {
        self.check_state(sentence)?;
        let s = self.slu_ids()?;
        Ok(self.apply(sentence, s.intent_w, s.intent_b))
    }

    pub fn intent_head(&self, sentence: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.intent_logits(sentence)?;
        ops::softmax_in_place(&mut z);
        Ok(z)
    }

    pub fn intent_embedding(&self, intent: usize) -> Result<&[f64]> {
        let s = self.slu_ids()?;
        let t = self.params.get(s.intent_emb);
        if intent >= t.rows() {
            return Err(Error::Index {
                index: intent,
                len: t.rows(),
            });
        }
        Ok(t.row(intent))
    }

    /// Slot logits from `0.5·(e_j + h^I)`.
    pub fn slot_logits(&self, state: &[f64], intent_embedding: &[f64]) -> Result<Vec<f64>> {
        if intent_embedding.len() != state.len() {
            return Err(Error::Shape(format!(
                "intent embedding of length {} vs state of length {}",
                intent_embedding.len(),
                state.len()
            )));
        }
        self.check_state(state)?;
        let s = self.slu_ids()?;
        let hs: Vec<f64> = state
            .iter()
            .zip(intent_embedding)
            .map(|(a, b)| (a + b) * 0.5)
            .collect();
        Ok(self.apply(&hs, s.slot_w, s.slot_b))
    }

    pub fn slot_head(&self, state: &[f64], intent_embedding: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.slot_logits(state, intent_embedding)?;
        ops::softmax_in_place(&mut z);
        Ok(z)
    }

    pub fn action_logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let a = self
            .layout
            .action
            .ok_or_else(|| Error::Mode("model has no action head".into()))?;
        Ok(self.apply(state, a.w, a.b))
    }

    /// Independent per-class probabilities; they need not sum to 1.
    pub fn action_head(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .action_logits(state)?
            .into_iter()
            .map(ops::sigmoid_scalar)
            .collect())
    }

    fn action_column_logit(&self, state: &[f64], c: usize) -> f64 {
        let a = self.layout.action.expect("checked by caller");
        let w = self.params.get(a.w);
        let n = w.cols();
        let mut s = 0.0;
        for (p, &e) in state.iter().enumerate() {
            s += e * w.values()[p * n + c];
        }
        s + self.params.get(a.b).values()[c]
    }

    /// Factored-layer logit for `token` following the position holding
    /// `state`.
    pub fn factored_logit(&self, state: &[f64], token: usize) -> Result<f64> {
        self.check_state(state)?;
        let f = self.factored_ids()?;
        self.check_token(token)?;
        Ok(self.factored_dot(f, state, token))
    }

    fn factored_ids(&self) -> Result<Linear> {
        self.layout
            .factored
            .ok_or_else(|| Error::Mode("model has no factored action layer".into()))
    }

    fn check_token(&self, token: usize) -> Result<()> {
        if token >= self.config.vocab_size {
            return Err(Error::Index {
                index: token,
                len: self.config.vocab_size,
            });
        }
        Ok(())
    }

    fn factored_dot(&self, f: Linear, state: &[f64], token: usize) -> f64 {
        let w = self.params.get(f.w).row(token);
        let mut s = 0.0;
        for (&e, &wv) in state.iter().zip(w) {
            s += e * wv;
        }
        s + self.params.get(f.b).values()[token]
    }

    /// `log P_action(target | prefix, v)` for each candidate `v` after `state`.
    pub fn action_score_candidates(
        &self,
        state: &DecodeState,
        candidates: &[usize],
        target: ActionTarget,
        mode: ScoringMode,
    ) -> Result<CandidateScores> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput("candidate set is empty".into()));
        }
        match (mode, target) {
            (ScoringMode::Rescoring, ActionTarget::Slot(c)) => {
                if self.layout.action.is_none() {
                    return Err(Error::Mode("rescoring needs an action head".into()));
                }
                if c >= self.schema.n_slots() {
                    return Err(Error::Index {
                        index: c,
                        len: self.schema.n_slots(),
                    });
                }
                let inputs: Vec<TokenInput> = candidates
                    .iter()
                    .map(|&v| self.vocab.input_for_id(v))
                    .collect();
                let ext = self.extend_candidates(state, &inputs)?;
                let log_probs = (0..ext.len())
                    .map(|i| log_sigmoid_scalar(self.action_column_logit(ext.state(i), c)))
                    .collect();
                Ok(CandidateScores {
                    candidates: candidates.to_vec(),
                    log_probs,
                    extension: Some(ext),
                })
            }
            (ScoringMode::Factored, ActionTarget::Binary { desired }) => {
                if state.is_empty() {
                    return Err(Error::State(
                        "factored scoring needs a non-empty prefix".into(),
                    ));
                }
                self.check_state(&state.last)?;
                let f = self.factored_ids()?;
                let log_probs = candidates
                    .iter()
                    .map(|&v| {
                        self.check_token(v)?;
                        let z = self.factored_dot(f, &state.last, v);
                        Ok(log_sigmoid_scalar(if desired { z } else { -z }))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CandidateScores {
                    candidates: candidates.to_vec(),
                    log_probs,
                    extension: None,
                })
            }
            (ScoringMode::Factored, ActionTarget::Slot(_)) => Err(Error::Mode(
                "factored scoring needs a binary desired/undesired target".into(),
            )),
            (ScoringMode::Rescoring, ActionTarget::Binary { .. }) => {
                Err(Error::Mode("rescoring needs a slot-class target".into()))
            }
        }
    }
}
