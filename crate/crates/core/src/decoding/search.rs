use super::{fused_next_distribution, DecodeConfig, FusedStep, Hypothesis};
use crate::data::{TokenInput, END};
use crate::model::{DecodeState, Model};
use crate::{Error, Result};

fn prime(model: &Model, prompt: &[TokenInput], cfg: &DecodeConfig) -> Result<DecodeState> {
    cfg.validate()?;
    if prompt.is_empty() {
        return Err(Error::InvalidInput(
            "prompt must hold at least one token".into(),
        ));
    }
    Ok(model.encode(prompt)?.into_decode_state())
}

fn advance(model: &Model, state: &mut DecodeState, step: &FusedStep, i: usize) -> Result<()> {
    match &step.extension {
        Some(ext) => {
            model.commit(state, ext, i);
            Ok(())
        }
        None => model.extend(state, &model.vocab().input_for_id(step.candidates[i])),
    }
}

/// Left-to-right argmax decoding over the fused distribution.
pub fn greedy_decode(
    model: &Model,
    prompt: &[TokenInput],
    cfg: &DecodeConfig,
) -> Result<Hypothesis> {
    let mut state = prime(model, prompt, cfg)?;
    let mut hyp = Hypothesis::new(cfg.alpha);
    for n in 0..cfg.max_length {
        let step = fused_next_distribution(model, &state, cfg)?;
        let i = step.best();
        hyp = hyp.push(&step, i);
        let token = step.candidates[i];
        if cfg.stop_at_end && token == END {
            hyp.finished = true;
            break;
        }
        if n + 1 == cfg.max_length {
            hyp.finished = !cfg.stop_at_end;
            break;
        }
        if state.len() == model.config().max_len {
            break;
        }
        advance(model, &mut state, &step, i)?;
    }
    Ok(hyp)
}

/// Ranked hypotheses from beam search. When nothing finished, `hypotheses`
/// holds the best unfinished one and `finished` is false.
#[derive(Clone, Debug)]
pub struct BeamOutput {
    pub hypotheses: Vec<Hypothesis>,
    pub finished: bool,
}

impl BeamOutput {
    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

fn rank(hyps: &mut [Hypothesis]) {
    hyps.sort_by(|a, b| {
        b.normalized_score()
            .total_cmp(&a.normalized_score())
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
}

/// Length-normalized beam search over fused scores. A hypothesis finishes
/// on `<end>` (when `stop_at_end`) or, without `stop_at_end`, on reaching
/// `max_length`.
pub fn beam_decode(model: &Model, prompt: &[TokenInput], cfg: &DecodeConfig) -> Result<BeamOutput> {
    let start = prime(model, prompt, cfg)?;
    let width = cfg.beam_width;
    let mut beams = vec![(Hypothesis::new(cfg.alpha), start)];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut unfinished: Vec<Hypothesis> = Vec::new();
    for n in 0..cfg.max_length {
        let last_step = n + 1 == cfg.max_length;
        let mut steps = Vec::with_capacity(beams.len());
        // (score, token, beam, candidate index)
        let mut expansions: Vec<(f64, usize, usize, usize)> = Vec::new();
        for (b, (hyp, state)) in beams.iter().enumerate() {
            let step = fused_next_distribution(model, state, cfg)?;
            for (i, &lp) in step.log_probs.iter().enumerate() {
                if lp.is_finite() {
                    let h = hyp.fused_score() + lp;
                    expansions.push((h, step.candidates[i], b, i));
                }
            }
            steps.push(step);
        }
        expansions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next = Vec::with_capacity(width);
        for &(_, token, b, i) in expansions.iter().take(width) {
            let mut hyp = beams[b].0.push(&steps[b], i);
            if cfg.stop_at_end && token == END {
                hyp.finished = true;
                finished.push(hyp);
                continue;
            }
            if last_step {
                hyp.finished = !cfg.stop_at_end;
                if hyp.finished {
                    finished.push(hyp);
                } else {
                    unfinished.push(hyp);
                }
                continue;
            }
            let mut state = beams[b].1.clone();
            if state.len() == model.config().max_len {
                unfinished.push(hyp);
                continue;
            }
            advance(model, &mut state, &steps[b], i)?;
            next.push((hyp, state));
        }
        beams = next;
        if beams.is_empty() || finished.len() >= width {
            break;
        }
    }
    if finished.is_empty() {
        unfinished.extend(beams.into_iter().map(|(h, _)| h));
        rank(&mut unfinished);
        unfinished.truncate(1);
        return Ok(BeamOutput {
            hypotheses: unfinished,
            finished: false,
        });
    }
    rank(&mut finished);
    finished.truncate(width);
    Ok(BeamOutput {
        hypotheses: finished,
        finished: true,
    })
}
