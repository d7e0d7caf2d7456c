use super::*;
use crate::data::TokenInput;
use crate::numerics::Tape;

fn cfg(d: usize) -> ModelConfig {
    ModelConfig {
        d_model: d,
        trunk_layers: 2,
        attention_heads: 2,
        max_len: 12,
        init_std: 0.3,
        ..ModelConfig::default()
    }
}

fn model(d: usize, seed: u64) -> Model {
    toy_model(cfg(d), 20, seed).unwrap()
}

fn inputs(m: &Model, ids: &[usize]) -> Vec<TokenInput> {
    ids.iter().map(|&i| m.vocab().input_for_id(i)).collect()
}

fn zero(m: &mut Model, name: &str) {
    let id = m.params().find(name).unwrap();
    m.params_mut().get_mut(id).values_mut().fill(0.0);
}

#[test]
fn encode_shape_contract() {
    let m = model(16, 1);
    let enc = m.encode(&inputs(&m, &[3, 4, 5, 6, 7])).unwrap();
    assert_eq!(enc.len(), 5);
    assert_eq!(enc.state(4).len(), 16);
    assert_eq!(enc.sentence().len(), 16);
}

#[test]
fn encode_rejects_overlong_and_bad_ids() {
    let m = model(8, 1);
    let long = inputs(&m, &[3; 13]);
    assert!(matches!(
        m.encode(&long),
        Err(Error::Capacity { len: 13, max: 12 })
    ));
    let bad = vec![TokenInput {
        word: 99,
        chars: vec![],
    }];
    assert!(matches!(m.encode(&bad), Err(Error::Index { .. })));
    assert!(m.encode(&[]).is_err());
}

#[test]
fn causality_is_bit_exact() {
    let m = model(16, 2);
    let a = m.encode(&inputs(&m, &[3, 4, 5, 6, 7])).unwrap();
    let b = m.encode(&inputs(&m, &[3, 4, 5, 6, 19])).unwrap();
    for t in 0..4 {
        assert_eq!(a.state(t), b.state(t));
    }
    assert_ne!(a.state(4), b.state(4));
}

#[test]
fn incremental_matches_full_and_tape() {
    let m = model(16, 3);
    let ids = [3, 9, 4, 12, 5, 5];
    let full = m.encode(&inputs(&m, &ids)).unwrap();
    let mut st = m
        .encode(&inputs(&m, &ids[..5]))
        .unwrap()
        .into_decode_state();
    m.extend(&mut st, &m.vocab().input_for_id(ids[5])).unwrap();
    assert_eq!(st.last_state(), full.state(5));

    let seqs = [inputs(&m, &ids), inputs(&m, &[7, 8])];
    let refs: Vec<&[TokenInput]> = seqs.iter().map(Vec::as_slice).collect();
    let mut tape = Tape::new(m.params());
    let fwd = m.trunk_on_tape(&mut tape, &refs).unwrap();
    for t in 0..ids.len() {
        assert_eq!(tape.row(fwd.states, t), full.state(t));
    }
    let short = m.encode(&seqs[1]).unwrap();
    assert_eq!(tape.row(fwd.states, 7), short.state(1));
    let sent = m.sentence_on_tape(&mut tape, &fwd).unwrap();
    assert_eq!(tape.row(sent, 0), full.sentence());
}

#[test]
fn batched_candidates_match_single_extensions() {
    let m = model(16, 4);
    let st = m.encode(&inputs(&m, &[3, 4])).unwrap().into_decode_state();
    let cands = inputs(&m, &[5, 6, 7, 8]);
    let ext = m.extend_candidates(&st, &cands).unwrap();
    for (i, c) in cands.iter().enumerate() {
        let mut s = st.clone();
        m.extend(&mut s, c).unwrap();
        assert_eq!(s.last_state(), ext.state(i));
    }
}

#[test]
fn zero_heads_give_uniform_and_half() {
    let mut m = model(8, 5);
    for n in [
        "intent_w", "intent_b", "lm_w", "lm_b", "action_w", "action_b",
    ] {
        zero(&mut m, n);
    }
    let enc = m.encode(&inputs(&m, &[3, 4, 5])).unwrap();
    let yi = m.intent_head(enc.sentence()).unwrap();
    assert!(yi.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    let lm = m.lm_head(enc.state(2)).unwrap();
    assert!(lm.iter().all(|&p| (p - 1.0 / 20.0).abs() < 1e-15));
    assert!(m
        .action_head(enc.state(1))
        .unwrap()
        .iter()
        .all(|&p| p == 0.5));
}

#[test]
fn intent_bias_shift_leaves_distribution() {
    let mut m = model(8, 6);
    let enc = m.encode(&inputs(&m, &[3, 4])).unwrap();
    let before = m.intent_head(enc.sentence()).unwrap();
    let id = m.params().find("intent_b").unwrap();
    for v in m.params_mut().get_mut(id).values_mut() {
        *v += 3.0;
    }
    let after = m.intent_head(enc.sentence()).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn slot_head_average() {
    let m = model(8, 7);
    let v: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 - 0.3).collect();
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    let bias = m
        .params()
        .get(m.params().find("slot_b").unwrap())
        .values()
        .to_vec();
    // e = v, h^I = -v: the combined representation is zero.
    assert_eq!(m.slot_logits(&v, &neg).unwrap(), bias);
    // e == h^I: the combined representation is e itself.
    let w = m.params().get(m.params().find("slot_w").unwrap());
    let mut manual = vec![0.0; 5];
    crate::numerics::ops::matmul(&v, w.values(), 1, 8, 5, &mut manual);
    for (a, b) in manual.iter_mut().zip(&bias) {
        *a += b;
    }
    assert_eq!(m.slot_logits(&v, &v).unwrap(), manual);
    let p = m.slot_head(&v, m.intent_embedding(1).unwrap()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(matches!(m.slot_logits(&v, &v[..4]), Err(Error::Shape(_))));
}

#[test]
fn action_entries_are_independent() {
    let mut m = model(8, 8);
    let enc = m.encode(&inputs(&m, &[3, 4])).unwrap();
    let before = m.action_head(enc.state(1)).unwrap();
    let id = m.params().find("action_w").unwrap();
    // Class k is column k of the [d × n_slots] matrix.
    let n = m.schema().n_slots();
    for p in 0..8 {
        m.params_mut().get_mut(id).values_mut()[p * n + 2] += 0.5;
    }
    let after = m.action_head(enc.state(1)).unwrap();
    for k in 0..n {
        assert_eq!(before[k] == after[k], k != 2, "class {k}");
    }
}

#[test]
fn rescoring_matches_brute_force_over_full_vocab() {
    let m = toy_model(cfg(16), 50, 9).unwrap();
    let st = m
        .encode(&inputs(&m, &[3, 17, 4]))
        .unwrap()
        .into_decode_state();
    let all: Vec<usize> = (0..50).collect();
    let scores = m
        .action_score_candidates(&st, &all, ActionTarget::Slot(3), ScoringMode::Rescoring)
        .unwrap();
    for &v in &all {
        let mut s = st.clone();
        m.extend(&mut s, &m.vocab().input_for_id(v)).unwrap();
        let p = m.action_head(s.last_state()).unwrap()[3];
        assert!((scores.log_probs[v].exp() - p).abs() < 1e-14, "token {v}");
    }
}

#[test]
fn scoring_mode_errors() {
    let c = ModelConfig {
        factored_head: true,
        ..cfg(8)
    };
    let m = toy_model(c, 20, 1).unwrap();
    let st = m.encode(&inputs(&m, &[3])).unwrap().into_decode_state();
    assert!(matches!(
        m.action_score_candidates(&st, &[4], ActionTarget::Slot(1), ScoringMode::Factored),
        Err(Error::Mode(_))
    ));
    assert!(matches!(
        m.action_score_candidates(
            &st,
            &[4],
            ActionTarget::Binary { desired: true },
            ScoringMode::Rescoring
        ),
        Err(Error::Mode(_))
    ));
    assert!(m
        .action_score_candidates(&st, &[], ActionTarget::Slot(1), ScoringMode::Rescoring)
        .is_err());
    let s = m
        .action_score_candidates(
            &st,
            &[4, 5],
            ActionTarget::Binary { desired: true },
            ScoringMode::Factored,
        )
        .unwrap();
    let u = m
        .action_score_candidates(
            &st,
            &[4, 5],
            ActionTarget::Binary { desired: false },
            ScoringMode::Factored,
        )
        .unwrap();
    for i in 0..2 {
        assert!((s.log_probs[i].exp() + u.log_probs[i].exp() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn heads_add_documented_parameter_count() {
    let plain = ModelConfig {
        slu_heads: false,
        action_head: false,
        ..cfg(16)
    }
    .with_vocab(&toy_vocab(30));
    let full = ModelConfig { ..cfg(16) }.with_vocab(&toy_vocab(30));
    let schema = toy_schema();
    let (ni, ns, d) = (schema.n_intents(), schema.n_slots(), 16);
    let diff = Model::expected_parameter_count(&full, &schema)
        - Model::expected_parameter_count(&plain, &schema);
    // Three heads plus the intent embedding table.
    assert_eq!(diff, (ni + 2 * ns) * (d + 1) + ni * d);
    let m = Model::new(full, schema, toy_vocab(30), 0).unwrap();
    assert_eq!(
        m.parameter_count(),
        Model::expected_parameter_count(m.config(), m.schema())
    );
}

#[test]
fn trunk_init_independent_of_heads() {
    let a = toy_model(cfg(8), 20, 11).unwrap();
    let b = toy_model(
        ModelConfig {
            action_head: false,
            factored_head: true,
            ..cfg(8)
        },
        20,
        11,
    )
    .unwrap();
    for (_, name, t) in a.params().iter() {
        if let Some(id) = b.params().find(name) {
            assert_eq!(b.params().get(id).values(), t.values(), "{name}");
        }
    }
    let ia = a.encode(&inputs(&a, &[3, 4])).unwrap();
    let ib = b.encode(&inputs(&b, &[3, 4])).unwrap();
    assert_eq!(ia.states(), ib.states());
}

#[test]
fn config_validation() {
    let v = toy_vocab(10);
    let bad = [
        ModelConfig {
            attention_heads: 3,
            ..cfg(8)
        },
        ModelConfig {
            intent_embedding_dim: Some(4),
            ..cfg(8)
        },
        ModelConfig {
            init_std: 0.0,
            ..cfg(8)
        },
    ];
    for c in bad {
        assert!(matches!(
            Model::new(c.with_vocab(&v), toy_schema(), v.clone(), 0),
            Err(Error::Config(_))
        ));
    }
    assert!(Model::new(cfg(8), toy_schema(), v, 0).is_err());
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let m = model(8, 12);
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&m, dir.path()).unwrap();
    let back = load_checkpoint(dir.path()).unwrap();
    assert_eq!(write_tensors(back.params()), write_tensors(m.params()));
    assert_eq!(back.config(), m.config());
    assert_eq!(back.vocab(), m.vocab());

    let bytes = write_tensors(m.params());
    assert!(read_tensors(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(read_tensors(&bad), Err(Error::Checkpoint(_))));
    let mut v2 = bytes.clone();
    v2[8] = 2;
    assert!(read_tensors(&v2).is_err());
    let mut extra = bytes;
    extra.push(0);
    assert!(read_tensors(&extra).is_err());
}

#[test]
fn example_rejects_unknown_labels() {
    let m = model(8, 0);
    let r =
        crate::data::UtteranceRecord::new(vec!["w3".into()], "ask", vec!["B-nope".into()], "src");
    assert!(matches!(m.example(&r), Err(Error::InvalidBatch(_))));
    let r = crate::data::UtteranceRecord::new(
        vec!["w3".into(), "zz".into()],
        "order",
        vec!["O".into(), "B-item".into()],
        "src",
    );
    let ex = m.example(&r).unwrap();
    assert_eq!(ex.intent, 1);
    assert_eq!(ex.slots, vec![0, 1]);
    assert_eq!(ex.inputs[1].word, crate::data::UNK);
}
