//! Property tests for metrics, span handling and fused decoding.

use lada_core::data::{repair_bio, validate_bio};
use lada_core::decoding::{fused_next_distribution, DecodeConfig};
use lada_core::harness::{extract_spans, prf1, span_f1, ConfusionCounts, MetricsMode};
use lada_core::model::{toy_model, ActionTarget, ModelConfig, ScoringMode};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["O", "B-a", "I-a", "B-b", "I-b"]).prop_map(String::from)
}

fn labels() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(label(), 1..12)
}

proptest! {
    #[test]
    fn standard_metrics_lie_in_the_unit_interval(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..50) {
        let m = prf1(&ConfusionCounts::new(tp, fp, fn_, tn), MetricsMode::Standard);
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(!m.exceeds_unit);
        if m.precision + m.recall > 0.0 {
            let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((h - m.f1).abs() < 1e-12);
        }
    }

    #[test]
    fn spans_are_ordered_disjoint_and_in_bounds(l in labels()) {
        let spans = extract_spans(&l);
        let mut end = 0;
        for (s, e, t) in &spans {
            prop_assert!(*s >= end && s < e && *e <= l.len());
            prop_assert!(l[*s].ends_with(t.as_str()));
            end = *e;
        }
        let tagged = l.iter().filter(|x| x.as_str() != "O").count();
        let covered: usize = spans.iter().map(|(s, e, _)| e - s).sum();
        prop_assert_eq!(tagged, covered);
    }

    #[test]
    fn repair_yields_valid_bio_with_the_same_spans(l in labels()) {
        let mut fixed = l.clone();
        repair_bio(&mut fixed);
        prop_assert!(validate_bio(&fixed).is_ok());
        prop_assert_eq!(extract_spans(&fixed), extract_spans(&l));
    }

    #[test]
    fn span_scores_are_symmetric_and_perfect_on_identity(g in labels(), seed in any::<u64>()) {
        let mut p = g.clone();
        if !p.is_empty() {
            let i = (seed as usize) % p.len();
            p[i] = "O".into();
        }
        let (g, p) = (vec![g], vec![p]);
        let ab = span_f1(&g, &p).unwrap();
        let ba = span_f1(&p, &g).unwrap();
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.f1, ba.f1);
        let same = span_f1(&g, &g).unwrap();
        prop_assert_eq!(same.fp + same.fn_, 0);
        if same.tp > 0 {
            prop_assert_eq!(same.f1, 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fused_step_is_a_distribution(
        seed in 0u64..1000,
        prefix in prop::collection::vec(3usize..30, 1..8),
        alpha in 0.0f64..4.0,
        k in 1usize..30,
        factored in any::<bool>(),
    ) {
        let config = ModelConfig { d_model: 8, trunk_layers: 1, attention_heads: 2, factored_head: true, init_std: 0.5, ..ModelConfig::default() };
        let model = toy_model(config, 30, seed).unwrap();
        let inputs: Vec<_> = prefix.iter().map(|&t| model.vocab().input_for_id(t)).collect();
        let state = model.encode(&inputs).unwrap().into_decode_state();
        let (target, mode) = if factored {
            (ActionTarget::Binary { desired: true }, ScoringMode::Factored)
        } else {
            (ActionTarget::Slot(1), ScoringMode::Rescoring)
        };
        let cfg = DecodeConfig { alpha, target, mode, beam_width: 1, candidate_k: Some(k), ..DecodeConfig::default() };
        let step = fused_next_distribution(&model, &state, &cfg).unwrap();
        let total: f64 = step.probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(step.probs.iter().all(|p| (0.0..=1.0).contains(p)));
        if alpha == 0.0 {
            prop_assert_eq!(step.probs, model.lm_head(state.last_state()).unwrap());
        } else {
            prop_assert_eq!(step.candidates.len(), k);
            prop_assert!(step.candidates.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
