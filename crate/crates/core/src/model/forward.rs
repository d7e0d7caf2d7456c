//! Batched forward pass on the tape. Each sequence is one [`Segment`] of
//! rows; row arithmetic matches the incremental path in `infer.rs` exactly.

use super::layout::Linear;
use super::Model;
use crate::data::{TokenInput, END};
use crate::numerics::{ParamId, Segment, Tape, Tensor, Var};
use crate::{Error, Result};

/// Trunk output for a batch: `[rows × d]` states and per-sequence segments.
#[derive(Clone, Debug)]
pub struct TapeForward {
    pub states: Var,
    pub segments: Vec<Segment>,
}

impl TapeForward {
    pub fn rows(&self) -> usize {
        self.segments.last().map_or(0, |s| s.start + s.len)
    }
}

fn linear(tape: &mut Tape, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
    let (w, b) = (tape.param(w), tape.param(b));
    let y = tape.matmul(x, w)?;
    tape.add_bias(y, b)
}

impl Model {
    fn head(&self, tape: &mut Tape, x: Var, lin: Linear) -> Result<Var> {
        linear(tape, x, lin.w, lin.b)
    }

    pub fn trunk_on_tape(&self, tape: &mut Tape, seqs: &[&[TokenInput]]) -> Result<TapeForward> {
        if seqs.is_empty() {
            return Err(Error::InvalidBatch("empty batch".into()));
        }
        let mut words = Vec::new();
        let mut chars = Vec::new();
        let mut positions = Vec::new();
        let mut segments = Vec::with_capacity(seqs.len());
        for seq in seqs {
            if seq.is_empty() {
                return Err(Error::InvalidBatch("empty sequence".into()));
            }
            if seq.len() > self.config.max_len {
                return Err(Error::Capacity {
                    len: seq.len(),
                    max: self.config.max_len,
                });
            }
            segments.push(Segment {
                start: words.len(),
                len: seq.len(),
            });
            for (t, inp) in seq.iter().enumerate() {
                words.push(inp.word);
                chars.push(inp.chars.clone());
                positions.push(t);
            }
        }
        let l = &self.layout;
        let tok = tape.gather(l.tok_emb, words)?;
        let ch = tape.gather_mean(l.char_emb, chars)?;
        let pos = tape.gather(l.pos_emb, positions)?;
        let x = tape.add(tok, ch)?;
        let mut x = tape.add(x, pos)?;
        for ly in &l.layers {
            let (g, b) = (tape.param(ly.ln1_g), tape.param(ly.ln1_b));
            let h = tape.layer_norm(x, g, b)?;
            let qkv = linear(tape, h, ly.w_qkv, ly.b_qkv)?;
            let a = tape.causal_attention(qkv, self.config.attention_heads, segments.clone())?;
            let o = linear(tape, a, ly.w_o, ly.b_o)?;
            x = tape.add(x, o)?;
            let (g, b) = (tape.param(ly.ln2_g), tape.param(ly.ln2_b));
            let h = tape.layer_norm(x, g, b)?;
            let f = linear(tape, h, ly.w_ff1, ly.b_ff1)?;
            let f = tape.gelu(f);
            let f = linear(tape, f, ly.w_ff2, ly.b_ff2)?;
            x = tape.add(x, f)?;
        }
        let (g, b) = (tape.param(l.lnf_g), tape.param(l.lnf_b));
        let states = tape.layer_norm(x, g, b)?;
        Ok(TapeForward { states, segments })
    }

    pub(super) fn slu_ids(&self) -> Result<super::layout::SluIds> {
        self.layout
            .slu
            .ok_or_else(|| Error::Mode("model has no intent/slot heads".into()))
    }

    /// Sentence representations `[batch × d]` (mean of states).
    pub fn sentence_on_tape(&self, tape: &mut Tape, fwd: &TapeForward) -> Result<Var> {
        tape.segment_mean(fwd.states, fwd.segments.clone())
    }

    /// Intent logits `[batch × n_intents]`.
    pub fn intent_logits_on_tape(&self, tape: &mut Tape, sentence: Var) -> Result<Var> {
        let s = self.slu_ids()?;
        linear(tape, sentence, s.intent_w, s.intent_b)
    }

    /// Slot logits `[rows × n_slots]` from `0.5·(e_j + h^I)`, with `intents[i]`
    /// selecting the intent embedding for sequence `i`.
    pub fn slot_logits_on_tape(
        &self,
        tape: &mut Tape,
        fwd: &TapeForward,
        intents: &[usize],
    ) -> Result<Var> {
        let s = self.slu_ids()?;
        if intents.len() != fwd.segments.len() {
            return Err(Error::Shape(format!(
                "{} intents for {} sequences",
                intents.len(),
                fwd.segments.len()
            )));
        }
        let rows: Vec<usize> = fwd
            .segments
            .iter()
            .zip(intents)
            .flat_map(|(seg, &i)| std::iter::repeat_n(i, seg.len))
            .collect();
        let hi = tape.gather(s.intent_emb, rows)?;
        let sum = tape.add(fwd.states, hi)?;
        let hs = tape.scale(sum, 0.5);
        linear(tape, hs, s.slot_w, s.slot_b)
    }

    /// Action logits `[rows × n_slots]`.
    pub fn action_logits_on_tape(&self, tape: &mut Tape, fwd: &TapeForward) -> Result<Var> {
        let a = self
            .layout
            .action
            .ok_or_else(|| Error::Mode("model has no action head".into()))?;
        self.head(tape, fwd.states, a)
    }

    /// LM logits `[rows × vocab]`; row `t` scores token `t + 1`.
    pub fn lm_logits_on_tape(&self, tape: &mut Tape, fwd: &TapeForward) -> Result<Var> {
        self.head(tape, fwd.states, self.layout.lm)
    }

    /// Factored action logits `[rows × 1]`: row `t` scores the token that
    /// follows it (`<end>` after the last), using that token's row vector.
    pub fn factored_logits_on_tape(
        &self,
        tape: &mut Tape,
        fwd: &TapeForward,
        seqs: &[&[TokenInput]],
    ) -> Result<Var> {
        let f = self
            .layout
            .factored
            .ok_or_else(|| Error::Mode("model has no factored action layer".into()))?;
        let next = next_tokens(seqs);
        let w = tape.gather(f.w, next.clone())?;
        let prod = tape.mul(fwd.states, w)?;
        let ones = tape.constant(&Tensor::new(
            vec![self.config.d_model, 1],
            vec![1.0; self.config.d_model],
        )?);
        let dot = tape.matmul(prod, ones)?;
        let b = tape.gather(f.b, next)?;
        tape.add(dot, b)
    }
}

/// Word id following each row: the next token, or `<end>` after the last.
pub(crate) fn next_tokens(seqs: &[&[TokenInput]]) -> Vec<usize> {
    let mut out = Vec::new();
    for seq in seqs {
        for t in 0..seq.len() {
            out.push(seq.get(t + 1).map_or(END, |x| x.word));
        }
    }
    out
}
