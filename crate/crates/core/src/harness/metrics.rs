//! Intent accuracy, token-level one-vs-rest P/R/F1 and CoNLL-style span F1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{Corpus, UtteranceRecord};
use crate::decoding::predict_slu;
use crate::model::{Model, OUTSIDE};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricsMode {
    #[default]
    Standard,
    /// `Acc = (TP+TN)/(TP+FP+FN)` and `R = TN/(TN+FN)`, as sometimes printed.
    /// Values can exceed 1.
    PaperLiteral,
}

impl MetricsMode {
    pub fn label(self) -> &'static str {
        match self {
            MetricsMode::Standard => "standard",
            MetricsMode::PaperLiteral => "paper-literal",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, o: &ConfusionCounts) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prf1 {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some denominator was zero and the value was reported as 0.
    pub zero_denominator: bool,
    /// Some value exceeds 1 (possible only in paper-literal mode).
    pub exceeds_unit: bool,
    pub mode: MetricsMode,
}

fn ratio(num: u64, den: u64, zero: &mut bool) -> f64 {
    if den == 0 {
        *zero = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn prf1(c: &ConfusionCounts, mode: MetricsMode) -> Prf1 {
    let mut zero = false;
    let (accuracy, recall) = match mode {
        MetricsMode::Standard => (
            ratio(c.tp + c.tn, c.total(), &mut zero),
            ratio(c.tp, c.tp + c.fn_, &mut zero),
        ),
        MetricsMode::PaperLiteral => (
            ratio(c.tp + c.tn, c.tp + c.fp + c.fn_, &mut zero),
            ratio(c.tn, c.tn + c.fn_, &mut zero),
        ),
    };
    let precision = ratio(c.tp, c.tp + c.fp, &mut zero);
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, &mut zero);
    Prf1 {
        accuracy,
        precision,
        recall,
        f1,
        zero_denominator: zero,
        exceeds_unit: [accuracy, precision, recall, f1].iter().any(|&v| v > 1.0),
        mode,
    }
}

/// One-vs-rest counts per class over aligned token labels; every token
/// contributes one decision per class, so pooled TN counts (token, class)
/// pairs where neither side is that class.
pub fn token_confusion(
    gold: &[Vec<String>],
    pred: &[Vec<String>],
    classes: &[String],
) -> Result<BTreeMap<String, ConfusionCounts>> {
    check_aligned(gold, pred)?;
    let mut out: BTreeMap<String, ConfusionCounts> = classes
        .iter()
        .map(|c| (c.clone(), Default::default()))
        .collect();
    for (g, p) in gold.iter().zip(pred) {
        for (gt, pt) in g.iter().zip(p) {
            for (c, cc) in out.iter_mut() {
                match (gt == c, pt == c) {
                    (true, true) => cc.tp += 1,
                    (false, true) => cc.fp += 1,
                    (true, false) => cc.fn_ += 1,
                    (false, false) => cc.tn += 1,
                }
            }
        }
    }
    Ok(out)
}

fn check_aligned(gold: &[Vec<String>], pred: &[Vec<String>]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} gold sequences vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::InvalidInput(format!(
                "sequence {i}: {} gold labels vs {} predicted",
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

fn split(label: &str) -> (&str, &str) {
    match label.split_once('-') {
        Some((p, t)) if p == "B" || p == "I" => (p, t),
        _ => (OUTSIDE, ""),
    }
}

/// Typed spans `(start, end_exclusive, type)`. A span opens at `B-X`, or at
/// `I-X` not continuing an `X` span, and extends over following `I-X`.
pub fn extract_spans(labels: &[String]) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, l) in labels.iter().enumerate() {
        let (p, t) = split(l);
        let continues = p == "I" && open.is_some_and(|(_, ot)| ot == t);
        if !continues {
            if let Some((s, ot)) = open.take() {
                out.push((s, i, ot.to_string()));
            }
            if p != OUTSIDE {
                open = Some((i, t));
            }
        }
    }
    if let Some((s, ot)) = open {
        out.push((s, labels.len(), ot.to_string()));
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SpanScore {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro span F1: a predicted span is correct only on exact boundaries and
/// type.
pub fn span_f1(gold: &[Vec<String>], pred: &[Vec<String>]) -> Result<SpanScore> {
    check_aligned(gold, pred)?;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (g, p) in gold.iter().zip(pred) {
        let gs: BTreeSet<_> = extract_spans(g).into_iter().collect();
        let ps: BTreeSet<_> = extract_spans(p).into_iter().collect();
        let hit = gs.intersection(&ps).count() as u64;
        tp += hit;
        fp += ps.len() as u64 - hit;
        fn_ += gs.len() as u64 - hit;
    }
    let mut zero = false;
    Ok(SpanScore {
        tp,
        fp,
        fn_,
        precision: ratio(tp, tp + fp, &mut zero),
        recall: ratio(tp, tp + fn_, &mut zero),
        f1: ratio(2 * tp, 2 * tp + fp + fn_, &mut zero),
    })
}

/// Anything that maps an utterance to an intent and slot labels.
pub trait SluPredictor {
    fn predict(&self, tokens: &[String], alpha: f64) -> Result<(String, Vec<String>)>;
}

impl SluPredictor for Model {
    fn predict(&self, tokens: &[String], alpha: f64) -> Result<(String, Vec<String>)> {
        let p = predict_slu(self, tokens, alpha, false)?;
        Ok((p.intent, p.slots))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mode: MetricsMode,
    pub utterances: usize,
    pub intent_accuracy: f64,
    pub token_counts: ConfusionCounts,
    pub token: Prf1,
    pub span: SpanScore,
    pub per_class: BTreeMap<String, Prf1>,
}

/// Scores labeled predictions. Token-level classes are the non-`O` labels
/// seen in gold or predictions.
pub fn score(
    records: &[UtteranceRecord],
    intents: &[String],
    slots: &[Vec<String>],
    mode: MetricsMode,
) -> Result<MetricsReport> {
    if intents.len() != records.len() {
        return Err(Error::InvalidInput(
            "one intent prediction per record required".into(),
        ));
    }
    let gold: Vec<Vec<String>> = records.iter().map(|r| r.slots.clone()).collect();
    let classes: Vec<String> = gold
        .iter()
        .chain(slots)
        .flatten()
        .filter(|l| l.as_str() != OUTSIDE)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let per = token_confusion(&gold, slots, &classes)?;
    let mut pooled = ConfusionCounts::default();
    for c in per.values() {
        pooled.add(c);
    }
    let correct = records
        .iter()
        .zip(intents)
        .filter(|(r, i)| &r.intent == *i)
        .count();
    Ok(MetricsReport {
        mode,
        utterances: records.len(),
        intent_accuracy: if records.is_empty() {
            0.0
        } else {
            correct as f64 / records.len() as f64
        },
        token_counts: pooled,
        token: prf1(&pooled, mode),
        span: span_f1(&gold, slots)?,
        per_class: per
            .iter()
            .map(|(k, c)| (k.clone(), prf1(c, mode)))
            .collect(),
    })
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "split,alpha,mode,utterances,intent_acc,token_acc,token_precision,\
token_recall,token_f1,span_precision,span_recall,span_f1,tp,fp,fn,tn";

    pub fn csv_row(&self, split: &str, alpha: f64) -> String {
        let (t, s, c) = (&self.token, &self.span, &self.token_counts);
        format!(
            "{split},{alpha},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            self.mode.label(),
            self.utterances,
            self.intent_accuracy,
            t.accuracy,
            t.precision,
            t.recall,
            t.f1,
            s.precision,
            s.recall,
            s.f1,
            c.tp,
            c.fp,
            c.fn_,
            c.tn
        )
    }
}

/// CSV with one row per `(split, alpha, report)`.
pub fn metrics_csv(rows: &[(String, f64, MetricsReport)]) -> String {
    let mut out = format!("{}\n", MetricsReport::CSV_HEADER);
    for (split, alpha, r) in rows {
        out.push_str(&r.csv_row(split, *alpha));
        out.push('\n');
    }
    out
}

/// Markdown summary of [`metrics_csv`] rows.
pub fn metrics_markdown(rows: &[(String, f64, MetricsReport)]) -> String {
    let mut out = String::from(
        "| split | alpha | intent acc | token F1 | span F1 |\n|---|---|---|---|---|\n",
    );
    for (split, alpha, r) in rows {
        out.push_str(&format!(
            "| {split} | {alpha} | {:.4} | {:.4} | {:.4} |\n",
            r.intent_accuracy, r.token.f1, r.span.f1
        ));
    }
    out
}

/// Runs `predictor` over `corpus` at `alpha` and scores the result.
pub fn evaluate<P: SluPredictor + ?Sized>(
    predictor: &P,
    corpus: &Corpus,
    alpha: f64,
    mode: MetricsMode,
) -> Result<MetricsReport> {
    let mut intents = Vec::with_capacity(corpus.len());
    let mut slots = Vec::with_capacity(corpus.len());
    for r in corpus.iter() {
        let (i, s) = predictor.predict(&r.tokens, alpha)?;
        if s.len() != r.tokens.len() {
            return Err(Error::InvalidInput(format!(
                "predictor returned {} labels for {} tokens",
                s.len(),
                r.tokens.len()
            )));
        }
        intents.push(i);
        slots.push(s);
    }
    score(&corpus.records, &intents, &slots, mode)
}
