use super::DecodeConfig;
use crate::model::{DecodeState, Extension, Model};
use crate::numerics::ops::argmax;
use crate::{Error, Result};

/// One fused decoding step over a candidate set (ascending token ids).
#[derive(Clone, Debug)]
pub struct FusedStep {
    pub candidates: Vec<usize>,
    pub lm_log: Vec<f64>,
    pub action_log: Vec<f64>,
    /// `log Σ exp(lm + α·action)` over the candidates; 0 when `α = 0`.
    pub log_norm: f64,
    /// Normalized fused log-probabilities, `−∞` for excluded candidates.
    pub log_probs: Vec<f64>,
    /// Normalized fused probabilities.
    pub probs: Vec<f64>,
    pub(crate) extension: Option<Extension>,
}

impl FusedStep {
    /// Probabilities over the whole vocabulary, zero outside the candidates.
    pub fn distribution(&self, vocab_size: usize) -> Vec<f64> {
        let mut out = vec![0.0; vocab_size];
        for (&v, &p) in self.candidates.iter().zip(&self.probs) {
            out[v] = p;
        }
        out
    }

    /// Index of the best candidate; the lowest token id wins ties.
    pub fn best(&self) -> usize {
        argmax(&self.log_probs)
    }
}

/// Top `k` ids by LM log-probability (lowest id on ties), returned in
/// ascending id order. A single pass keeps the best `k` seen so far; ids
/// arrive in ascending order, so only a strictly larger value displaces an
/// equal one.
fn top_k(lm_log: &[f64], k: usize) -> Vec<usize> {
    if k >= lm_log.len() {
        return (0..lm_log.len()).collect();
    }
    if k == 0 {
        return Vec::new();
    }
    // (value, id), best first.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (id, &v) in lm_log.iter().enumerate() {
        if best.len() == k && v.total_cmp(&best[k - 1].0).is_le() {
            continue;
        }
        let at = best.partition_point(|&(b, _)| b.total_cmp(&v).is_ge());
        best.insert(at, (v, id));
        best.truncate(k);
    }
    let mut ids: Vec<usize> = best.into_iter().map(|(_, id)| id).collect();
    ids.sort_unstable();
    ids
}

/// `log P_LM + α·log P_action` renormalized over the candidates; returns the
/// log normalizer and the normalized log-probabilities.
pub(crate) fn fuse(lm_log: &[f64], action_log: &[f64], alpha: f64) -> Result<(f64, Vec<f64>)> {
    let raw: Vec<f64> = lm_log
        .iter()
        .zip(action_log)
        .map(|(&l, &a)| {
            if a == f64::NEG_INFINITY {
                a
            } else {
                l + alpha * a
            }
        })
        .collect();
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(
            "every candidate has zero action probability".into(),
        ));
    }
    let sum: f64 = raw.iter().map(|&r| (r - max).exp()).sum();
    let log_norm = max + sum.ln();
    Ok((log_norm, raw.iter().map(|&r| r - log_norm).collect()))
}

/// Fused next-token distribution after `state`.
pub fn fused_next_distribution(
    model: &Model,
    state: &DecodeState,
    cfg: &DecodeConfig,
) -> Result<FusedStep> {
    cfg.validate()?;
    if state.is_empty() {
        return Err(Error::State(
            "fused decoding needs a non-empty prefix".into(),
        ));
    }
    let e = state.last_state();
    if cfg.alpha == 0.0 {
        let (lm_all, probs) = model.lm_distribution(e)?;
        let n = lm_all.len();
        return Ok(FusedStep {
            candidates: (0..n).collect(),
            probs,
            action_log: vec![0.0; n],
            log_norm: 0.0,
            log_probs: lm_all.clone(),
            lm_log: lm_all,
            extension: None,
        });
    }
    let lm_all = model.lm_log_probs(e)?;
    let candidates = if cfg.full_vocab {
        (0..lm_all.len()).collect()
    } else {
        top_k(&lm_all, cfg.candidate_k())
    };
    let scores = model.action_score_candidates(state, &candidates, cfg.target, cfg.mode)?;
    let lm_log: Vec<f64> = candidates.iter().map(|&v| lm_all[v]).collect();
    let (log_norm, log_probs) = fuse(&lm_log, &scores.log_probs, cfg.alpha)?;
    let probs = log_probs.iter().map(|&l| l.exp()).collect();
    Ok(FusedStep {
        candidates,
        lm_log,
        action_log: scores.log_probs,
        log_norm,
        log_probs,
        probs,
        extension: scores.extension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case_flips_the_lm_choice() {
        let lm = [0.6f64.ln(), 0.4f64.ln()];
        let act = [0.1f64.ln(), 0.9f64.ln()];
        let (_, lp) = fuse(&lm, &act, 2.0).unwrap();
        let z = 0.6 * 0.01 + 0.4 * 0.81;
        assert!((lp[0].exp() - 0.006 / z).abs() < 1e-14);
        assert!((lp[1].exp() - 0.324 / z).abs() < 1e-14);
        let (norm, same) = fuse(&lm, &act, 0.0).unwrap();
        assert!(norm.abs() < 1e-15);
        assert!((same[0] - lm[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_action_probability_excludes_candidate() {
        let (_, lp) = fuse(&[-1.0, -2.0], &[f64::NEG_INFINITY, -0.5], 1.0).unwrap();
        assert_eq!(lp[0], f64::NEG_INFINITY);
        assert_eq!(lp[1], 0.0);
        assert!(fuse(&[-1.0], &[f64::NEG_INFINITY], 1.0).is_err());
    }

    #[test]
    fn top_k_matches_a_full_sort() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            // Few distinct values, so ties are common.
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let k = rng.random_range(0..n + 2);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]).then(a.cmp(&b)));
            idx.truncate(k);
            idx.sort_unstable();
            assert_eq!(top_k(&xs, k), idx);
        }
    }

    #[test]
    fn top_k_ties_prefer_low_ids() {
        assert_eq!(top_k(&[0.1, 0.5, 0.5, 0.2], 2), vec![1, 2]);
        assert_eq!(top_k(&[0.3, 0.3, 0.3], 2), vec![0, 1]);
        assert_eq!(top_k(&[1.0, 2.0], 5), vec![0, 1]);
    }
}
