use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::Corpus;

pub const PAD: usize = 0;
pub const END: usize = 1;
pub const UNK: usize = 2;
pub const RESERVED: [&str; 3] = ["<pad>", "<end>", "<unk>"];
/// Character id for characters outside the inventory.
pub const UNK_CHAR: usize = 0;

/// Word and character ids for one input token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenInput {
    pub word: usize,
    pub chars: Vec<usize>,
}

/// Whitespace-token vocabulary with a character inventory for
/// out-of-vocabulary fallback.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    chars: Vec<char>,
    token_ids: HashMap<String, usize>,
    char_ids: HashMap<char, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    chars: Vec<char>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        Self::from_parts(r.tokens, r.chars)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            tokens: v.tokens,
            chars: v.chars,
        }
    }
}

impl Vocabulary {
    /// `tokens` must start with the reserved entries; `chars` excludes the
    /// unknown-character slot.
    pub fn from_parts(tokens: Vec<String>, chars: Vec<char>) -> Self {
        let token_ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let char_ids = chars.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
        Self {
            tokens,
            chars,
            token_ids,
            char_ids,
        }
    }

    /// Number of word ids, reserved ones included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= RESERVED.len()
    }

    /// Number of character ids, the unknown-character slot included.
    pub fn char_len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_ids.get(token).copied()
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn char_ids(&self, token: &str) -> Vec<usize> {
        token
            .chars()
            .map(|c| self.char_ids.get(&c).copied().unwrap_or(UNK_CHAR))
            .collect()
    }

    pub fn encode_token(&self, token: &str) -> TokenInput {
        TokenInput {
            word: self.token_id(token),
            chars: self.char_ids(token),
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<TokenInput> {
        tokens.iter().map(|t| self.encode_token(t)).collect()
    }

    /// Input for a word id (used when generating); reserved ids carry no
    /// characters.
    pub fn input_for_id(&self, id: usize) -> TokenInput {
        let chars = if id < RESERVED.len() {
            Vec::new()
        } else {
            self.tokens
                .get(id)
                .map(|t| self.char_ids(t))
                .unwrap_or_default()
        };
        TokenInput { word: id, chars }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Builds a vocabulary from `corpus`. Word ids follow the reserved entries in
/// (count descending, token ascending) order; tokens seen fewer than
/// `min_count` times fall back to `<unk>` plus their characters. Every
/// character in the corpus enters the character inventory.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocabulary {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut chars = BTreeSet::new();
    for r in &corpus.records {
        for t in &r.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
            chars.extend(t.chars());
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count.max(1) && !RESERVED.contains(&t))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
        .collect();
    Vocabulary::from_parts(tokens, chars.into_iter().collect())
}
