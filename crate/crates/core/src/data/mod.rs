//! Corpora, file formats, vocabulary, episode sampling and the synthetic
//! language-pair generator.

mod formats;
mod record;
mod sampling;
pub mod synthetic;
mod vocab;

pub(crate) use formats::write_text;
pub use formats::{
    format_conll, format_jsonl, load_conll, load_jsonl, load_mtop_flat, parse_conll, parse_jsonl,
    write_conll, write_jsonl, CONLL_HEADER, JSONL_HEADER,
};
pub use record::{parse_bio, repair_bio, validate_bio, Bio, Corpus, UtteranceRecord};
pub use sampling::{kshot_sample, FewShotTask};
pub use synthetic::{
    generate_synthetic_pair, Grammar, SyntheticLanguageSpec, SyntheticPair, WordOrder,
};
pub use vocab::{build_vocab, TokenInput, Vocabulary, END, PAD, RESERVED, UNK, UNK_CHAR};
