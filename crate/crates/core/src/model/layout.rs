//! Parameter naming, shapes and initialization.
//!
//! Weight matrices are stored `[in, out]` so a linear map is `y = x·W + b`.
//! Each tensor draws from its own generator keyed by `(seed, name)`, which
//! makes the trunk initialization independent of which heads exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{LabelSchema, ModelConfig};
use crate::hash::stable_hash;
use crate::numerics::{ParamId, ParamSet, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerIds {
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub w_qkv: ParamId,
    pub b_qkv: ParamId,
    pub w_o: ParamId,
    pub b_o: ParamId,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
    pub w_ff1: ParamId,
    pub b_ff1: ParamId,
    pub w_ff2: ParamId,
    pub b_ff2: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct SluIds {
    pub intent_w: ParamId,
    pub intent_b: ParamId,
    pub slot_w: ParamId,
    pub slot_b: ParamId,
    pub intent_emb: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub tok_emb: ParamId,
    pub char_emb: ParamId,
    pub pos_emb: ParamId,
    pub layers: Vec<LayerIds>,
    pub lnf_g: ParamId,
    pub lnf_b: ParamId,
    pub lm: Linear,
    pub slu: Option<SluIds>,
    pub action: Option<Linear>,
    /// `w` is `[vocab, d]`: one row per candidate token; `b` is `[vocab, 1]`.
    pub factored: Option<Linear>,
}

#[derive(Clone, Copy)]
enum Init {
    Normal,
    Zeros,
    Ones,
    Constant(f64),
}

fn spec(config: &ModelConfig, schema: &LabelSchema) -> Vec<(String, Vec<usize>, Init)> {
    let d = config.d_model;
    let (v, ni, ns) = (config.vocab_size, schema.n_intents(), schema.n_slots());
    let mut out = vec![
        ("tok_emb".to_string(), vec![v, d], Init::Normal),
        (
            "char_emb".to_string(),
            vec![config.char_vocab_size, d],
            Init::Normal,
        ),
        ("pos_emb".to_string(), vec![config.max_len, d], Init::Normal),
    ];
    for l in 0..config.trunk_layers {
        let p = |n: &str| format!("layer{l}.{n}");
        out.extend([
            (p("ln1_g"), vec![d], Init::Ones),
            (p("ln1_b"), vec![d], Init::Zeros),
            (p("w_qkv"), vec![d, 3 * d], Init::Normal),
            (p("b_qkv"), vec![3 * d], Init::Zeros),
            (p("w_o"), vec![d, d], Init::Normal),
            (p("b_o"), vec![d], Init::Zeros),
            (p("ln2_g"), vec![d], Init::Ones),
            (p("ln2_b"), vec![d], Init::Zeros),
            (p("w_ff1"), vec![d, 4 * d], Init::Normal),
            (p("b_ff1"), vec![4 * d], Init::Zeros),
            (p("w_ff2"), vec![4 * d, d], Init::Normal),
            (p("b_ff2"), vec![d], Init::Zeros),
        ]);
    }
    out.extend([
        ("lnf_g".to_string(), vec![d], Init::Ones),
        ("lnf_b".to_string(), vec![d], Init::Zeros),
        ("lm_w".to_string(), vec![d, v], Init::Normal),
        ("lm_b".to_string(), vec![v], Init::Zeros),
    ]);
    if config.slu_heads {
        out.extend([
            ("intent_w".to_string(), vec![d, ni], Init::Normal),
            ("intent_b".to_string(), vec![ni], Init::Zeros),
            ("slot_w".to_string(), vec![d, ns], Init::Normal),
            ("slot_b".to_string(), vec![ns], Init::Zeros),
            (
                "intent_emb".to_string(),
                vec![ni, config.intent_dim()],
                Init::Normal,
            ),
        ]);
    }
    if config.action_head {
        out.extend([
            ("action_w".to_string(), vec![d, ns], Init::Normal),
            // Exactly one class is on per token, so start each sigmoid at the
            // 1/ns prior instead of 0.5.
            (
                "action_b".to_string(),
                vec![ns],
                Init::Constant(-((ns as f64 - 1.0).max(1.0)).ln()),
            ),
        ]);
    }
    if config.factored_head {
        out.extend([
            ("factored_w".to_string(), vec![v, d], Init::Normal),
            ("factored_b".to_string(), vec![v, 1], Init::Zeros),
        ]);
    }
    out
}

pub(crate) fn init_params(config: &ModelConfig, schema: &LabelSchema, seed: u64) -> ParamSet {
    let normal = Normal::new(0.0, config.init_std).expect("validated std");
    let mut params = ParamSet::new();
    for (name, shape, init) in spec(config, schema) {
        let n: usize = shape.iter().product();
        let values = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Constant(c) => vec![c; n],
            Init::Normal => {
                let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(seed, &name));
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
        };
        params.push(name, Tensor::new(shape, values).expect("consistent shape"));
    }
    params
}

/// Number of scalars `config` allocates.
pub(crate) fn expected_numel(config: &ModelConfig, schema: &LabelSchema) -> usize {
    spec(config, schema)
        .iter()
        .map(|(_, s, _)| s.iter().product::<usize>())
        .sum()
}

impl Layout {
    /// Looks up every expected tensor by name and checks its shape.
    pub fn resolve(params: &ParamSet, config: &ModelConfig, schema: &LabelSchema) -> Result<Self> {
        let expected = spec(config, schema);
        if params.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, shape, _) in &expected {
            let id = params
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            let got = params.get(id).shape();
            if got != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {got:?}, expected {shape:?}"
                )));
            }
        }
        let id = |n: &str| params.find(n).expect("checked above");
        let layers = (0..config.trunk_layers)
            .map(|l| {
                let p = |n: &str| id(&format!("layer{l}.{n}"));
                LayerIds {
                    ln1_g: p("ln1_g"),
                    ln1_b: p("ln1_b"),
                    w_qkv: p("w_qkv"),
                    b_qkv: p("b_qkv"),
                    w_o: p("w_o"),
                    b_o: p("b_o"),
                    ln2_g: p("ln2_g"),
                    ln2_b: p("ln2_b"),
                    w_ff1: p("w_ff1"),
                    b_ff1: p("b_ff1"),
                    w_ff2: p("w_ff2"),
                    b_ff2: p("b_ff2"),
                }
            })
            .collect();
        Ok(Self {
            tok_emb: id("tok_emb"),
            char_emb: id("char_emb"),
            pos_emb: id("pos_emb"),
            layers,
            lnf_g: id("lnf_g"),
            lnf_b: id("lnf_b"),
            lm: Linear {
                w: id("lm_w"),
                b: id("lm_b"),
            },
            slu: config.slu_heads.then(|| SluIds {
                intent_w: id("intent_w"),
                intent_b: id("intent_b"),
                slot_w: id("slot_w"),
                slot_b: id("slot_b"),
                intent_emb: id("intent_emb"),
            }),
            action: config.action_head.then(|| Linear {
                w: id("action_w"),
                b: id("action_b"),
            }),
            factored: config.factored_head.then(|| Linear {
                w: id("factored_w"),
                b: id("factored_b"),
            }),
        })
    }
}
