use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{parse_bio, Bio, Corpus};
use crate::{Error, Result};

pub const OUTSIDE: &str = "O";

/// Intent inventory and BIO slot inventory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    intents: Vec<String>,
    slots: Vec<String>,
}

impl LabelSchema {
    pub fn new(intents: Vec<String>, slots: Vec<String>) -> Result<Self> {
        if intents.len() < 2 || slots.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 intents and 2 slot labels, got {} and {}",
                intents.len(),
                slots.len()
            )));
        }
        let unique = |v: &[String]| v.iter().collect::<HashSet<_>>().len() == v.len();
        if !unique(&intents) || !unique(&slots) {
            return Err(Error::InvalidInput("label names must be unique".into()));
        }
        if slots.iter().filter(|s| *s == OUTSIDE).count() != 1 {
            return Err(Error::InvalidInput(
                "slot labels must contain \"O\" exactly once".into(),
            ));
        }
        for s in &slots {
            parse_bio(s)?;
        }
        Ok(Self { intents, slots })
    }

    /// `O` followed by `B-t`, `I-t` for each slot type in order.
    pub fn from_slot_types(intents: Vec<String>, types: &[String]) -> Result<Self> {
        let mut slots = vec![OUTSIDE.to_string()];
        for t in types {
            slots.push(format!("B-{t}"));
            slots.push(format!("I-{t}"));
        }
        Self::new(intents, slots)
    }

    /// Sorted intents and slot types observed in `corpus`.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let mut intents = BTreeSet::new();
        let mut types = BTreeSet::new();
        for r in &corpus.records {
            intents.insert(r.intent.clone());
            for s in &r.slots {
                match parse_bio(s)? {
                    Bio::Begin(t) | Bio::Inside(t) => {
                        types.insert(t.to_string());
                    }
                    Bio::Outside => {}
                }
            }
        }
        let types: Vec<String> = types.into_iter().collect();
        Self::from_slot_types(intents.into_iter().collect(), &types)
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn n_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn intent_index(&self, name: &str) -> Option<usize> {
        self.intents.iter().position(|i| i == name)
    }

    pub fn slot_index(&self, label: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == label)
    }

    pub fn outside_index(&self) -> usize {
        self.slot_index(OUTSIDE).expect("validated")
    }

    pub fn intent_name(&self, i: usize) -> &str {
        &self.intents[i]
    }

    pub fn slot_name(&self, i: usize) -> &str {
        &self.slots[i]
    }

    /// Slot types (without BIO prefixes) in first-appearance order.
    pub fn slot_types(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.slots {
            if let Ok(Bio::Begin(t) | Bio::Inside(t)) = parse_bio(s) {
                if !out.iter().any(|o| o == t) {
                    out.push(t.to_string());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn invariants() {
        assert!(LabelSchema::new(s(&["a"]), s(&["O", "B-x"])).is_err());
        assert!(LabelSchema::new(s(&["a", "a"]), s(&["O", "B-x"])).is_err());
        assert!(LabelSchema::new(s(&["a", "b"]), s(&["B-x", "I-x"])).is_err());
        assert!(LabelSchema::new(s(&["a", "b"]), s(&["O", "O", "B-x"])).is_err());
        let sch = LabelSchema::from_slot_types(s(&["a", "b"]), &s(&["city", "date"])).unwrap();
        assert_eq!(
            sch.slots(),
            &s(&["O", "B-city", "I-city", "B-date", "I-date"])[..]
        );
        assert_eq!(sch.outside_index(), 0);
        assert_eq!(sch.slot_types(), s(&["city", "date"]));
    }
}
