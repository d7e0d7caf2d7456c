use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One labeled utterance: whitespace tokens with one BIO slot label each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub tokens: Vec<String>,
    pub intent: String,
    pub slots: Vec<String>,
    pub locale: String,
}

impl UtteranceRecord {
    pub fn new(
        tokens: Vec<String>,
        intent: impl Into<String>,
        slots: Vec<String>,
        locale: impl Into<String>,
    ) -> Self {
        Self {
            tokens,
            intent: intent.into(),
            slots,
            locale: locale.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks token/slot alignment and gold BIO well-formedness.
    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidInput("utterance has no tokens".into()));
        }
        if self.tokens.len() != self.slots.len() {
            return Err(Error::InvalidInput(format!(
                "{} tokens but {} slot labels",
                self.tokens.len(),
                self.slots.len()
            )));
        }
        if self.intent.is_empty() {
            return Err(Error::InvalidInput("empty intent".into()));
        }
        if let Some(t) = self
            .tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::InvalidInput(format!(
                "token {t:?} is empty or contains whitespace"
            )));
        }
        validate_bio(&self.slots)
    }
}

/// Parsed form of a BIO label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bio<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

pub fn parse_bio(label: &str) -> Result<Bio<'_>> {
    if label == "O" {
        return Ok(Bio::Outside);
    }
    match label.split_once('-') {
        Some(("B", t)) if !t.is_empty() => Ok(Bio::Begin(t)),
        Some(("I", t)) if !t.is_empty() => Ok(Bio::Inside(t)),
        _ => Err(Error::InvalidInput(format!(
            "label {label:?} is not O, B-X or I-X"
        ))),
    }
}

/// Every `I-X` must follow `B-X` or `I-X`.
pub fn validate_bio(labels: &[String]) -> Result<()> {
    let mut prev: Option<&str> = None;
    for (i, l) in labels.iter().enumerate() {
        match parse_bio(l)? {
            Bio::Outside => prev = None,
            Bio::Begin(t) => prev = Some(t),
            Bio::Inside(t) => {
                if prev != Some(t) {
                    return Err(Error::InvalidInput(format!(
                        "label {l:?} at position {i} does not continue a {t} span"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Rewrites `I-X` that does not continue an `X` span into `B-X`.
pub fn repair_bio(labels: &mut [String]) {
    let mut prev: Option<String> = None;
    for l in labels.iter_mut() {
        let next = match parse_bio(l) {
            Ok(Bio::Outside) | Err(_) => None,
            Ok(Bio::Begin(t)) => Some(t.to_string()),
            Ok(Bio::Inside(t)) => {
                let t = t.to_string();
                if prev.as_deref() != Some(t.as_str()) {
                    *l = format!("B-{t}");
                }
                Some(t)
            }
        };
        prev = next;
    }
}

/// An ordered list of utterances.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<UtteranceRecord>,
}

impl Corpus {
    pub fn new(records: Vec<UtteranceRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, UtteranceRecord> {
        self.records.iter()
    }

    pub fn token_count(&self) -> usize {
        self.records.iter().map(UtteranceRecord::len).sum()
    }

    /// Splits off the first `n` records.
    pub fn split_at(&self, n: usize) -> (Corpus, Corpus) {
        let n = n.min(self.records.len());
        (
            Corpus::new(self.records[..n].to_vec()),
            Corpus::new(self.records[n..].to_vec()),
        )
    }
}

impl FromIterator<UtteranceRecord> for Corpus {
    fn from_iter<I: IntoIterator<Item = UtteranceRecord>>(iter: I) -> Self {
        Corpus::new(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn bio_rules() {
        assert!(validate_bio(&s(&["O", "B-X", "I-X", "I-X", "O"])).is_ok());
        assert!(validate_bio(&s(&["I-Y"])).is_err());
        assert!(validate_bio(&s(&["B-X", "I-Y"])).is_err());
        assert!(validate_bio(&s(&["O", "I-X"])).is_err());
        assert!(validate_bio(&s(&["X"])).is_err());
    }

    #[test]
    fn repair_turns_orphan_inside_into_begin() {
        let mut l = s(&["O", "I-X", "I-X", "B-Y", "I-X"]);
        repair_bio(&mut l);
        assert_eq!(l, s(&["O", "B-X", "I-X", "B-Y", "B-X"]));
    }

    #[test]
    fn record_validation() {
        let r = UtteranceRecord::new(s(&["a", "b"]), "X", s(&["O"]), "src");
        assert!(r.validate().is_err());
        let r = UtteranceRecord::new(s(&["a b"]), "X", s(&["O"]), "src");
        assert!(r.validate().is_err());
        let r = UtteranceRecord::new(s(&["a"]), "X", s(&["B-T"]), "src");
        assert!(r.validate().is_ok());
    }
}
