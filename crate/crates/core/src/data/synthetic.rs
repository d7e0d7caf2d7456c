//! Template-grammar corpus generator and a family of invertible "distant
//! language" transformations used as a desk-scale stand-in for cross-lingual
//! transfer.
//!
//! A source utterance is a sequence of chunks: every slot span is one chunk
//! and every carrier word is its own chunk. The target side reorders chunks,
//! attaches slot-type suffixes, rewrites a fraction of carrier words and
//! substitutes characters. Reordering is a permutation of whole chunks, so
//! the per-token alignment carries gold BIO labels over unchanged.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, UtteranceRecord};
use crate::hash::stable_hash;
use crate::model::LabelSchema;
use crate::{Error, Result};

pub const SOURCE_LOCALE: &str = "src";
pub const TARGET_LOCALE: &str = "tgt";

const FILLERS_PER_TYPE: usize = 30;
const LEXICON_SEED: u64 = 0x1ada;

const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "to", "for", "at", "in", "on", "by", "me", "my", "some", "please", "i", "is",
    "it", "of", "from", "that", "up", "with",
];

/// `^word` marks the clause verb; `{type}` is a slot.
const TEMPLATES: &[(&str, &[&str])] = &[
    (
        "play_music",
        &[
            "^play {song} by {artist}",
            "^put on some {genre} music",
            "i ^want to hear {artist}",
            "^play {genre} songs by {artist} please",
            "^play {song}",
        ],
    ),
    (
        "get_weather",
        &[
            "what is the weather in {city} {date}",
            "will it ^rain in {city}",
            "weather forecast for {date} in {city}",
            "^check weather in {city}",
        ],
    ),
    (
        "set_alarm",
        &[
            "^wake me up at {time}",
            "^set an alarm for {time} {date}",
            "alarm at {time} please",
            "^set alarm {date} at {time}",
        ],
    ),
    (
        "book_flight",
        &[
            "^book a flight to {city} on {airline}",
            "^find flights from {city} to {city} {date}",
            "i ^need a {airline} ticket to {city}",
            "^fly to {city} {date}",
        ],
    ),
    (
        "send_message",
        &[
            "^text {person} that i am late",
            "^send {person} a message",
            "^tell {person} i will call {date}",
            "^message {person} please",
        ],
    ),
    (
        "find_restaurant",
        &[
            "^find a {cuisine} restaurant in {city}",
            "where can i ^eat {cuisine} food",
            "^book a table for {cuisine} {date} at {time}",
            "{cuisine} places in {city}",
        ],
    ),
    (
        "call_contact",
        &[
            "^call {person}",
            "^phone {person} at {time}",
            "^give {person} a call {date}",
            "^ring {person} now",
        ],
    ),
    (
        "set_timer",
        &[
            "^set a timer for {duration}",
            "^start a {duration} timer",
            "^count down {duration}",
            "timer for {duration} please",
        ],
    ),
];

const SLOT_SYLLABLES: &[(&str, &[&str])] = &[
    (
        "artist",
        &["ka", "zo", "ri", "mel", "den", "tor", "vi", "san"],
    ),
    (
        "song",
        &["lu", "na", "ber", "sol", "mi", "fa", "rey", "dol"],
    ),
    (
        "genre",
        &["ro", "ja", "pop", "funk", "ska", "tek", "hou", "dub"],
    ),
    (
        "city",
        &["bur", "ton", "vil", "mar", "ash", "lin", "gro", "ford"],
    ),
    (
        "date",
        &["mon", "tue", "day", "nex", "wen", "fri", "sat", "morn"],
    ),
    (
        "time",
        &["sev", "ten", "oc", "noon", "half", "nin", "thr", "pm"],
    ),
    (
        "person",
        &["an", "bob", "cla", "ra", "lee", "jo", "sue", "tim"],
    ),
    (
        "cuisine",
        &["thai", "sus", "pas", "ta", "cur", "ry", "tap", "kim"],
    ),
    (
        "airline",
        &["air", "jet", "sky", "wing", "aer", "blu", "fly", "lux"],
    ),
    (
        "duration",
        &["min", "hour", "sec", "five", "two", "quar", "ter", "hal"],
    ),
];

const TARGET_SYLLABLES: &[&str] = &["qu", "xo", "ze", "yi", "wu", "ok", "ez", "ip", "uv", "ay"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Verb,
    Content,
    Function,
    Slot,
}

#[derive(Clone, Debug)]
enum Piece {
    Word(&'static str, Role),
    Slot(&'static str),
}

fn parse_template(t: &'static str) -> Vec<Piece> {
    t.split_whitespace()
        .map(|w| {
            if let Some(v) = w.strip_prefix('^') {
                Piece::Word(v, Role::Verb)
            } else if let Some(s) = w.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
                Piece::Slot(s)
            } else if FUNCTION_WORDS.contains(&w) {
                Piece::Word(w, Role::Function)
            } else {
                Piece::Word(w, Role::Content)
            }
        })
        .collect()
}

/// The default template grammar: intents, slot types and lexical fillers.
#[derive(Clone, Debug)]
pub struct Grammar {
    templates: BTreeMap<&'static str, Vec<Vec<Piece>>>,
    fillers: BTreeMap<&'static str, Vec<Vec<String>>>,
}

impl Grammar {
    pub fn standard() -> Self {
        let templates = TEMPLATES
            .iter()
            .map(|(intent, ts)| (*intent, ts.iter().map(|t| parse_template(t)).collect()))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(LEXICON_SEED);
        let mut fillers = BTreeMap::new();
        for (ty, syl) in SLOT_SYLLABLES {
            let mut seen = BTreeSet::new();
            let mut list = Vec::with_capacity(FILLERS_PER_TYPE);
            while list.len() < FILLERS_PER_TYPE {
                let words = if rng.random_range(0..3) == 0 { 2 } else { 1 };
                let filler: Vec<String> = (0..words)
                    .map(|_| {
                        let n = rng.random_range(2..=3);
                        (0..n)
                            .map(|_| *syl.choose(&mut rng).expect("non-empty"))
                            .collect::<String>()
                    })
                    .collect();
                if FUNCTION_WORDS.iter().any(|f| filler.iter().any(|w| w == f)) {
                    continue;
                }
                if seen.insert(filler.clone()) {
                    list.push(filler);
                }
            }
            fillers.insert(*ty, list);
        }
        Self { templates, fillers }
    }

    pub fn schema(&self) -> LabelSchema {
        let intents = self.templates.keys().map(|s| s.to_string()).collect();
        let types: Vec<String> = SLOT_SYLLABLES.iter().map(|(t, _)| t.to_string()).collect();
        LabelSchema::from_slot_types(intents, &types).expect("static grammar is valid")
    }

    pub fn fillers(&self, slot_type: &str) -> Option<&[Vec<String>]> {
        self.fillers.get(slot_type).map(Vec::as_slice)
    }

    /// Number of distinct utterances the grammar can produce.
    pub fn distinct_utterances(&self) -> usize {
        self.templates
            .values()
            .flatten()
            .map(|t| {
                t.iter()
                    .map(|p| match p {
                        Piece::Slot(s) => self.fillers[s].len(),
                        Piece::Word(..) => 1,
                    })
                    .product::<usize>()
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordOrder {
    Identity,
    /// Chunk order reversed; slot spans keep their internal order.
    Reversal,
    /// Verb chunks move to the end of the clause.
    SovSwap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLanguageSpec {
    pub word_order: WordOrder,
    /// Suffix attached to the last token of each span, by slot type.
    pub affix_rules: BTreeMap<String, String>,
    pub script_map: BTreeMap<char, char>,
    /// Fraction of carrier content words (verbs included) replaced by
    /// target-side forms.
    pub lexicon_swap_ratio: f64,
    pub seed: u64,
}

impl SyntheticLanguageSpec {
    pub fn identity(seed: u64) -> Self {
        Self {
            word_order: WordOrder::Identity,
            affix_rules: BTreeMap::new(),
            script_map: BTreeMap::new(),
            lexicon_swap_ratio: 0.0,
            seed,
        }
    }

    /// Reversed chunk order plus case-like suffixes on half of the slot types.
    pub fn reversal_affix(seed: u64) -> Self {
        let affix_rules = [
            ("city", "ni"),
            ("date", "ga"),
            ("person", "ke"),
            ("time", "de"),
            ("song", "wo"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        Self {
            word_order: WordOrder::Reversal,
            affix_rules,
            script_map: BTreeMap::new(),
            lexicon_swap_ratio: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lexicon_swap_ratio) {
            return Err(Error::InvalidInput(
                "lexicon_swap_ratio must lie in [0, 1]".into(),
            ));
        }
        let mut targets = BTreeSet::new();
        for &t in self.script_map.values() {
            if !targets.insert(t) {
                return Err(Error::InvalidInput(format!(
                    "script_map is not injective at {t:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Paired corpora with the token alignment: `alignments[r][t]` is the source
/// position of target token `t` in record `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPair {
    pub source: Corpus,
    pub target: Corpus,
    pub alignments: Vec<Vec<usize>>,
}

impl SyntheticPair {
    /// Source labels recovered from target labels through the alignment.
    pub fn transport_back(&self, record: usize) -> Vec<String> {
        let tgt = &self.target.records[record];
        let mut out = vec![String::new(); tgt.len()];
        for (t, &s) in self.alignments[record].iter().enumerate() {
            out[s] = tgt.slots[t].clone();
        }
        out
    }
}

fn target_form(seed: u64, word: &str) -> String {
    let h = stable_hash(seed ^ 0x5eed, word);
    let n = TARGET_SYLLABLES.len() as u64;
    let a = TARGET_SYLLABLES[(h % n) as usize];
    let b = TARGET_SYLLABLES[((h / n) % n) as usize];
    format!("{a}{word}{b}")
}

struct Chunk {
    tokens: Vec<(String, String, Role)>,
    slot_type: Option<&'static str>,
    source_start: usize,
}

/// Samples `size` source utterances from the standard grammar restricted to
/// `schema`, and derives the paired target utterances under `spec`.
pub fn generate_synthetic_pair(
    schema: &LabelSchema,
    size: usize,
    spec: &SyntheticLanguageSpec,
) -> Result<SyntheticPair> {
    if size == 0 {
        return Err(Error::InvalidInput("size must be >= 1".into()));
    }
    spec.validate()?;
    let grammar = Grammar::standard();
    let mut intents: Vec<&'static str> = Vec::new();
    for name in schema.intents() {
        let (&k, _) = grammar
            .templates
            .get_key_value(name.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("grammar has no intent {name:?}")))?;
        intents.push(k);
    }
    for ty in grammar.fillers.keys() {
        if schema.slot_index(&format!("B-{ty}")).is_none() {
            return Err(Error::InvalidInput(format!(
                "schema lacks slot type {ty:?}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut source = Vec::with_capacity(size);
    let mut target = Vec::with_capacity(size);
    let mut alignments = Vec::with_capacity(size);
    for _ in 0..size {
        let intent = *intents.choose(&mut rng).expect("schema has intents");
        let template = grammar.templates[intent]
            .choose(&mut rng)
            .expect("templates");
        let mut chunks = Vec::new();
        let mut pos = 0;
        for piece in template {
            match piece {
                Piece::Word(w, role) => {
                    chunks.push(Chunk {
                        tokens: vec![(w.to_string(), "O".to_string(), *role)],
                        slot_type: None,
                        source_start: pos,
                    });
                    pos += 1;
                }
                Piece::Slot(ty) => {
                    let filler = grammar.fillers[ty].choose(&mut rng).expect("fillers");
                    let tokens: Vec<_> = filler
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            let tag = if i == 0 { "B" } else { "I" };
                            (w.clone(), format!("{tag}-{ty}"), Role::Slot)
                        })
                        .collect();
                    let n = tokens.len();
                    chunks.push(Chunk {
                        tokens,
                        slot_type: Some(ty),
                        source_start: pos,
                    });
                    pos += n;
                }
            }
        }

        let src_tokens: Vec<String> = chunks
            .iter()
            .flat_map(|c| c.tokens.iter().map(|t| t.0.clone()))
            .collect();
        let src_slots: Vec<String> = chunks
            .iter()
            .flat_map(|c| c.tokens.iter().map(|t| t.1.clone()))
            .collect();
        source.push(UtteranceRecord::new(
            src_tokens,
            intent,
            src_slots,
            SOURCE_LOCALE,
        ));

        match spec.word_order {
            WordOrder::Identity => {}
            WordOrder::Reversal => chunks.reverse(),
            WordOrder::SovSwap => {
                let (verbs, rest): (Vec<Chunk>, Vec<Chunk>) = chunks
                    .into_iter()
                    .partition(|c| c.tokens[0].2 == Role::Verb);
                chunks = rest.into_iter().chain(verbs).collect();
            }
        }

        let mut tokens = Vec::with_capacity(pos);
        let mut slots = Vec::with_capacity(pos);
        let mut align = Vec::with_capacity(pos);
        for c in &chunks {
            let last = c.tokens.len() - 1;
            for (i, (w, label, role)) in c.tokens.iter().enumerate() {
                let mut form = w.clone();
                if let Some(ty) = c.slot_type {
                    if i == last {
                        if let Some(suffix) = spec.affix_rules.get(ty) {
                            form.push_str(suffix);
                        }
                    }
                } else if matches!(role, Role::Verb | Role::Content)
                    && spec.lexicon_swap_ratio > 0.0
                {
                    let u = stable_hash(spec.seed, w) as f64 / u64::MAX as f64;
                    if u < spec.lexicon_swap_ratio {
                        form = target_form(spec.seed, w);
                    }
                }
                if !spec.script_map.is_empty() {
                    form = form
                        .chars()
                        .map(|ch| *spec.script_map.get(&ch).unwrap_or(&ch))
                        .collect();
                }
                tokens.push(form);
                slots.push(label.clone());
                align.push(c.source_start + i);
            }
        }
        target.push(UtteranceRecord::new(tokens, intent, slots, TARGET_LOCALE));
        alignments.push(align);
    }
    Ok(SyntheticPair {
        source: Corpus::new(source),
        target: Corpus::new(target),
        alignments,
    })
}
