//! Python bindings: the `lada` extension module.
//!
//! Utterances cross the boundary as `(tokens, intent, slots)` tuples.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lada_core::data::{
    generate_synthetic_pair, Corpus, Grammar, SyntheticLanguageSpec, UtteranceRecord,
};
use lada_core::decoding::{
    beam_decode, fused_next_distribution, greedy_decode, predict_slu, DecodeConfig, Strategy,
};
use lada_core::harness::{
    gradcheck_model, prf1, score, span_f1 as core_span_f1, ConfusionCounts, GradCheckConfig,
    MetricsMode,
};
use lada_core::model::{
    load_checkpoint, save_checkpoint, toy_model, ActionTarget, ModelConfig, ScoringMode,
};
use lada_core::training::{fit, TrainConfig};
use lada_core::Error;

type Record = (Vec<String>, String, Vec<String>);

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_corpus(records: Vec<Record>) -> PyResult<Corpus> {
    let records: Vec<UtteranceRecord> = records
        .into_iter()
        .map(|(tokens, intent, slots)| UtteranceRecord::new(tokens, intent, slots, "src"))
        .collect();
    for r in &records {
        r.validate().map_err(py_err)?;
    }
    Ok(Corpus::new(records))
}

fn from_corpus(corpus: &Corpus) -> Vec<Record> {
    corpus
        .iter()
        .map(|r| (r.tokens.clone(), r.intent.clone(), r.slots.clone()))
        .collect()
}

fn metrics_mode(mode: &str) -> PyResult<MetricsMode> {
    match mode {
        "standard" => Ok(MetricsMode::Standard),
        "paper-literal" => Ok(MetricsMode::PaperLiteral),
        _ => Err(PyValueError::new_err(format!(
            "mode must be standard or paper-literal, got {mode:?}"
        ))),
    }
}

/// A trained or randomly initialized joint SLU model.
#[pyclass(name = "Model", module = "lada", frozen)]
struct PyModel {
    inner: lada_core::model::Model,
}

#[pymethods]
impl PyModel {
    /// Random model over a toy vocabulary of `vocab_size` ids.
    #[staticmethod]
    #[pyo3(signature = (vocab_size=50, d_model=16, layers=2, heads=2, seed=0, factored=true))]
    fn toy(
        vocab_size: usize,
        d_model: usize,
        layers: usize,
        heads: usize,
        seed: u64,
        factored: bool,
    ) -> PyResult<Self> {
        let config = ModelConfig {
            d_model,
            trunk_layers: layers,
            attention_heads: heads,
            factored_head: factored,
            ..ModelConfig::default()
        };
        let inner = toy_model(config, vocab_size, seed).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = load_checkpoint(path).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_checkpoint(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.config().vocab_size
    }

    #[getter]
    fn intents(&self) -> Vec<String> {
        self.inner.schema().intents().to_vec()
    }

    #[getter]
    fn slots(&self) -> Vec<String> {
        self.inner.schema().slots().to_vec()
    }

    /// Intent and BIO slot labels for `tokens`.
    #[pyo3(signature = (tokens, alpha=0.125, repair=false))]
    fn predict(
        &self,
        tokens: Vec<String>,
        alpha: f64,
        repair: bool,
    ) -> PyResult<(String, Vec<String>)> {
        let p = predict_slu(&self.inner, &tokens, alpha, repair).map_err(py_err)?;
        Ok((p.intent, p.slots))
    }

    /// Next-token distribution over the whole vocabulary after `prefix`,
    /// steered toward slot label `target` (or the binary in-span action in
    /// factored mode).
    #[pyo3(signature = (prefix, alpha=0.125, target="B-item", factored=false, full_vocab=true))]
    fn next_distribution(
        &self,
        prefix: Vec<String>,
        alpha: f64,
        target: &str,
        factored: bool,
        full_vocab: bool,
    ) -> PyResult<Vec<f64>> {
        let cfg =
            self.decode_config(alpha, target, factored, full_vocab, Strategy::Greedy, 1, 1)?;
        let inputs = self.inner.encode_inputs(&prefix);
        let state = self
            .inner
            .encode(&inputs)
            .map_err(py_err)?
            .into_decode_state();
        let step = fused_next_distribution(&self.inner, &state, &cfg).map_err(py_err)?;
        Ok(step.distribution(self.inner.config().vocab_size))
    }

    /// Continues `prompt`; returns the generated tokens and their fused score.
    #[pyo3(signature = (prompt, alpha=0.125, target="B-item", factored=false, beam_width=1, max_length=8))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        &self,
        prompt: Vec<String>,
        alpha: f64,
        target: &str,
        factored: bool,
        beam_width: usize,
        max_length: usize,
    ) -> PyResult<(Vec<String>, f64)> {
        let strategy = if beam_width > 1 {
            Strategy::Beam
        } else {
            Strategy::Greedy
        };
        let cfg = self.decode_config(
            alpha, target, factored, false, strategy, beam_width, max_length,
        )?;
        let inputs = self.inner.encode_inputs(&prompt);
        let hyp = match strategy {
            Strategy::Greedy => greedy_decode(&self.inner, &inputs, &cfg).map_err(py_err)?,
            Strategy::Beam => beam_decode(&self.inner, &inputs, &cfg)
                .map_err(py_err)?
                .best()
                .clone(),
        };
        let vocab = self.inner.vocab();
        let tokens = hyp
            .tokens
            .iter()
            .map(|&t| vocab.token(t).unwrap_or("<unk>").to_string())
            .collect();
        Ok((tokens, hyp.fused_score()))
    }

    /// Scores the model on `records`; returns a dict of metrics.
    #[pyo3(signature = (records, alpha=0.125, mode="standard"))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        records: Vec<Record>,
        alpha: f64,
        mode: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mode = metrics_mode(mode)?;
        let corpus = to_corpus(records)?;
        let mut intents = Vec::with_capacity(corpus.len());
        let mut slots = Vec::with_capacity(corpus.len());
        for r in corpus.iter() {
            let p = predict_slu(&self.inner, &r.tokens, alpha, false).map_err(py_err)?;
            intents.push(p.intent);
            slots.push(p.slots);
        }
        let report = score(&corpus.records, &intents, &slots, mode).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("intent_acc", report.intent_accuracy)?;
        d.set_item("token_acc", report.token.accuracy)?;
        d.set_item("token_f1", report.token.f1)?;
        d.set_item("span_precision", report.span.precision)?;
        d.set_item("span_recall", report.span.recall)?;
        d.set_item("span_f1", report.span.f1)?;
        Ok(d)
    }
}

impl PyModel {
    #[allow(clippy::too_many_arguments)]
    fn decode_config(
        &self,
        alpha: f64,
        target: &str,
        factored: bool,
        full_vocab: bool,
        strategy: Strategy,
        beam_width: usize,
        max_length: usize,
    ) -> PyResult<DecodeConfig> {
        let (target, mode) = if factored {
            (
                ActionTarget::Binary { desired: true },
                ScoringMode::Factored,
            )
        } else {
            let c =
                self.inner.schema().slot_index(target).ok_or_else(|| {
                    PyValueError::new_err(format!("unknown slot label {target:?}"))
                })?;
            (ActionTarget::Slot(c), ScoringMode::Rescoring)
        };
        let cfg = DecodeConfig {
            alpha,
            strategy,
            beam_width,
            max_length,
            target,
            mode,
            full_vocab,
            stop_at_end: true,
            candidate_k: None,
        };
        cfg.validate().map_err(py_err)?;
        Ok(cfg)
    }
}

/// Synthetic source training data plus source and target test splits.
#[pyfunction]
#[pyo3(signature = (train_size=2000, test_size=500, seed=1))]
fn synthetic_data(
    train_size: usize,
    test_size: usize,
    seed: u64,
) -> PyResult<(Vec<Record>, Vec<Record>, Vec<Record>)> {
    let schema = Grammar::standard().schema();
    let train = generate_synthetic_pair(
        &schema,
        train_size,
        &SyntheticLanguageSpec::reversal_affix(seed),
    )
    .map_err(py_err)?;
    let test = generate_synthetic_pair(
        &schema,
        test_size,
        &SyntheticLanguageSpec::reversal_affix(seed + 1),
    )
    .map_err(py_err)?;
    Ok((
        from_corpus(&train.source),
        from_corpus(&test.source),
        from_corpus(&test.target),
    ))
}

/// Trains a model on `records` with the composite loss at weight `alpha`.
/// Returns the model and the per-epoch total loss.
#[pyfunction]
#[pyo3(signature = (records, alpha=0.125, epochs=9, d_model=32, layers=2, heads=4, lr=0.002, seed=0))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    records: Vec<Record>,
    alpha: f64,
    epochs: usize,
    d_model: usize,
    layers: usize,
    heads: usize,
    lr: f64,
    seed: u64,
) -> PyResult<(PyModel, Vec<f64>)> {
    let corpus = to_corpus(records)?;
    let schema = lada_core::model::LabelSchema::from_corpus(&corpus).map_err(py_err)?;
    let model_config = ModelConfig {
        d_model,
        trunk_layers: layers,
        attention_heads: heads,
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        alpha,
        epochs,
        learning_rate: lr,
        seed,
        ..TrainConfig::default()
    };
    let out = py
        .detach(|| fit(&corpus, &schema, &model_config, &cfg))
        .map_err(py_err)?;
    let losses = out.history.epochs.iter().map(|e| e.total_loss).collect();
    Ok((PyModel { inner: out.model }, losses))
}

/// Accuracy, precision, recall and F1 from confusion counts.
#[pyfunction]
#[pyo3(signature = (tp, fp, fn_, tn, mode="standard"))]
fn metrics(tp: u64, fp: u64, fn_: u64, tn: u64, mode: &str) -> PyResult<(f64, f64, f64, f64)> {
    let m = prf1(&ConfusionCounts::new(tp, fp, fn_, tn), metrics_mode(mode)?);
    Ok((m.accuracy, m.precision, m.recall, m.f1))
}

/// Micro span precision, recall and F1 over BIO sequences.
#[pyfunction]
fn span_f1(gold: Vec<Vec<String>>, pred: Vec<Vec<String>>) -> PyResult<(f64, f64, f64)> {
    let s = core_span_f1(&gold, &pred).map_err(py_err)?;
    Ok((s.precision, s.recall, s.f1))
}

/// Finite-difference check of the full loss; returns the worst relative
/// error.
#[pyfunction]
#[pyo3(signature = (per_param=None, seed=7))]
fn gradcheck(py: Python<'_>, per_param: Option<usize>, seed: u64) -> PyResult<f64> {
    let cfg = GradCheckConfig {
        per_param,
        seed,
        ..GradCheckConfig::default()
    };
    let r = py.detach(|| gradcheck_model(&cfg)).map_err(py_err)?;
    Ok(r.max_rel_error)
}

/// Runs the command-line driver with `args` (without the program name) and
/// returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("lada".to_string()).chain(args).collect();
    py.detach(|| lada_core::cli::run(argv))
}

#[pymodule]
fn lada(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synthetic_data, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(span_f1, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
