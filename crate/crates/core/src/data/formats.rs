//! File formats.
//!
//! JSONL (UTF-8), first line a version comment, then one object per line
//! with keys in the order `tokens`, `intent`, `slots`, `locale`:
//!
//! ```text
//! # lada-jsonl v1
//! {"tokens":["wake","me","up"],"intent":"set_alarm","slots":["O","O","O"],"locale":"src"}
//! ```
//!
//! CoNLL dialect: a version comment, then blank-line-separated blocks. Each
//! block starts with `# intent = <name>` and `# locale = <tag>` headers and
//! has one `token<TAB>slot` line per token. CRLF line endings are accepted.
//!
//! ```text
//! # lada-conll v1
//! # intent = set_alarm
//! # locale = src
//! wake	O
//! ```
//!
//! Readers accept input without the version line; other `#` lines outside
//! blocks are ignored.

#![allow(clippy::tabs_in_doc_comments)]

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Corpus, UtteranceRecord};
use crate::{Error, Result};

pub const JSONL_HEADER: &str = "# lada-jsonl v1";
pub const CONLL_HEADER: &str = "# lada-conll v1";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    parse_jsonl(&read(path)?, path)
}

pub fn parse_jsonl(text: &str, path: &Path) -> Result<Corpus> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: UtteranceRecord =
            serde_json::from_str(line).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        rec.validate()
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        records.push(rec);
    }
    Ok(Corpus::new(records))
}

pub fn format_jsonl(corpus: &Corpus) -> String {
    let mut out = String::with_capacity(64 * corpus.len() + 32);
    out.push_str(JSONL_HEADER);
    out.push('\n');
    for r in &corpus.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &format_jsonl(corpus))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_conll(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    parse_conll(&read(path)?, path)
}

pub fn parse_conll(text: &str, path: &Path) -> Result<Corpus> {
    struct Block {
        start: usize,
        intent: Option<String>,
        locale: Option<String>,
        tokens: Vec<String>,
        slots: Vec<String>,
    }
    let finish = |b: Block, records: &mut Vec<UtteranceRecord>| -> Result<()> {
        let intent = b
            .intent
            .ok_or_else(|| parse_err(path, b.start, "block has no `# intent = ...` header"))?;
        let rec = UtteranceRecord::new(b.tokens, intent, b.slots, b.locale.unwrap_or_default());
        rec.validate()
            .map_err(|e| parse_err(path, b.start, e.to_string()))?;
        records.push(rec);
        Ok(())
    };

    let mut records = Vec::new();
    let mut block: Option<Block> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = i + 1;
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                finish(b, &mut records)?;
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let header = rest.trim();
            let kv = header.split_once('=').map(|(k, v)| (k.trim(), v.trim()));
            match kv {
                Some(("intent", v)) | Some(("locale", v)) => {
                    let b = block.get_or_insert_with(|| Block {
                        start: lineno,
                        intent: None,
                        locale: None,
                        tokens: Vec::new(),
                        slots: Vec::new(),
                    });
                    if !b.tokens.is_empty() {
                        return Err(parse_err(path, lineno, "header after token lines"));
                    }
                    if header.starts_with("intent") {
                        b.intent = Some(v.to_string());
                    } else {
                        b.locale = Some(v.to_string());
                    }
                }
                _ => {}
            }
            continue;
        }
        let (tok, slot) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, lineno, "expected `token<TAB>slot`"))?;
        if slot.contains('\t') {
            return Err(parse_err(path, lineno, "more than two columns"));
        }
        let b = block.get_or_insert_with(|| Block {
            start: lineno,
            intent: None,
            locale: None,
            tokens: Vec::new(),
            slots: Vec::new(),
        });
        b.tokens.push(tok.to_string());
        b.slots.push(slot.to_string());
    }
    if let Some(b) = block.take() {
        finish(b, &mut records)?;
    }
    Ok(Corpus::new(records))
}

pub fn format_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    out.push_str(CONLL_HEADER);
    out.push('\n');
    for r in &corpus.records {
        out.push_str(&format!(
            "# intent = {}\n# locale = {}\n",
            r.intent, r.locale
        ));
        for (t, s) in r.tokens.iter().zip(&r.slots) {
            out.push_str(t);
            out.push('\t');
            out.push_str(s);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_conll(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    for r in &corpus.records {
        r.validate()?;
    }
    write_text(path.as_ref(), &format_conll(corpus))
}

/// Reads the flat (non-compositional) MTOP release.
///
/// Assumed layout, one example per line, tab-separated, at least 8 columns:
///
/// | col | content                                                        |
/// |-----|----------------------------------------------------------------|
/// | 0   | example id                                                     |
/// | 1   | intent, e.g. `IN:GET_WEATHER`                                  |
/// | 2   | comma-separated slot spans `start:end:SL:TYPE` (char offsets)  |
/// | 3   | raw utterance                                                  |
/// | 4   | domain                                                         |
/// | 5   | locale, e.g. `de_DE`                                           |
/// | 6   | decoupled logical form (ignored)                               |
/// | 7   | JSON `{"tokens": [...], "tokenSpans": [{"start":s,"length":l}]}` |
///
/// This column mapping is an assumption about the public release; every
/// line that does not fit it is rejected with its line number instead of
/// being guessed at.
pub fn load_mtop_flat(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 8 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected >= 8 tab-separated columns, found {}", cols.len()),
            ));
        }
        let intent = cols[1].strip_prefix("IN:").ok_or_else(|| {
            parse_err(
                path,
                lineno,
                format!("intent column {:?} lacks `IN:` prefix", cols[1]),
            )
        })?;
        #[derive(serde::Deserialize)]
        #[serde(rename_all = "camelCase")]
        struct Span {
            start: usize,
            length: usize,
        }
        #[derive(serde::Deserialize)]
        #[serde(rename_all = "camelCase")]
        struct Toks {
            tokens: Vec<String>,
            token_spans: Vec<Span>,
        }
        let toks: Toks = serde_json::from_str(cols[7])
            .map_err(|e| parse_err(path, lineno, format!("token column: {e}")))?;
        if toks.tokens.len() != toks.token_spans.len() {
            return Err(parse_err(
                path,
                lineno,
                "tokens and tokenSpans differ in length",
            ));
        }
        let mut slots = vec!["O".to_string(); toks.tokens.len()];
        for span in cols[2].split(',').filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = span.splitn(3, ':').collect();
            let bad = || {
                parse_err(
                    path,
                    lineno,
                    format!("slot span {span:?} is not start:end:SL:TYPE"),
                )
            };
            if parts.len() != 3 {
                return Err(bad());
            }
            let start: usize = parts[0].parse().map_err(|_| bad())?;
            let end: usize = parts[1].parse().map_err(|_| bad())?;
            let ty = parts[2].strip_prefix("SL:").ok_or_else(bad)?;
            let mut first = true;
            for (k, ts) in toks.token_spans.iter().enumerate() {
                if ts.start >= start && ts.start + ts.length <= end {
                    slots[k] = format!("{}-{ty}", if first { "B" } else { "I" });
                    first = false;
                }
            }
            if first {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("slot span {span:?} covers no token"),
                ));
            }
        }
        let rec = UtteranceRecord::new(toks.tokens, intent, slots, cols[5]);
        rec.validate()
            .map_err(|e| parse_err(path, lineno, e.to_string()))?;
        records.push(rec);
    }
    Ok(Corpus::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn jsonl_single_record() {
        let c = parse_jsonl(
            r#"{"tokens":["a"],"intent":"X","slots":["O"],"locale":"src"}"#,
            p(),
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.records[0].tokens, vec!["a"]);
    }

    #[test]
    fn jsonl_rejects_with_line_numbers() {
        let text = "# lada-jsonl v1\n{\"tokens\":[\"a\"],\"intent\":\"X\",\"slots\":[\"O\"],\"locale\":\"s\"}\n{\"tokens\":[\"a\"],\"intent\":\"X\",\"slots\":[\"I-Y\"],\"locale\":\"s\"}\n";
        match parse_jsonl(text, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "{\"tokens\":[\"a\",\"b\"],\"intent\":\"X\",\"slots\":[\"O\"],\"locale\":\"s\"}";
        assert!(matches!(
            parse_jsonl(text, p()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn conll_block_and_line_endings() {
        let lf = "# intent = X\n# locale = src\nfly\tO\nboston\tB-city\n\n";
        let crlf = lf.replace('\n', "\r\n");
        let a = parse_conll(lf, p()).unwrap();
        let b = parse_conll(&crlf, p()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records[0].len(), 2);
        assert_eq!(a.records[0].slots, vec!["O", "B-city"]);
    }

    #[test]
    fn conll_requires_intent() {
        let text = "# locale = src\nfly\tO\n";
        assert!(matches!(
            parse_conll(text, p()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn conll_and_jsonl_agree() {
        let j = parse_jsonl(
            r#"{"tokens":["fly","to","new","york"],"intent":"book","slots":["O","O","B-city","I-city"],"locale":"src"}"#,
            p(),
        )
        .unwrap();
        let c = parse_conll(&format_conll(&j), p()).unwrap();
        assert_eq!(j, c);
        assert_eq!(format_jsonl(&c), format_jsonl(&j));
    }

    #[test]
    fn mtop_adapter_maps_char_spans_to_bio() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("de.txt");
        let toks = r#"{"tokens":["wetter","in","new","york"],"tokenSpans":[{"start":0,"length":6},{"start":7,"length":2},{"start":10,"length":3},{"start":14,"length":4}]}"#;
        let line = format!("1\tIN:GET_WEATHER\t10:18:SL:LOCATION\twetter in new york\tweather\tde_DE\t[]\t{toks}\n");
        fs::write(&f, line).unwrap();
        let c = load_mtop_flat(&f).unwrap();
        assert_eq!(c.records[0].intent, "GET_WEATHER");
        assert_eq!(
            c.records[0].slots,
            vec!["O", "O", "B-LOCATION", "I-LOCATION"]
        );
        assert_eq!(c.records[0].locale, "de_DE");

        fs::write(&f, "1\tGET_WEATHER\tx\n").unwrap();
        assert!(matches!(
            load_mtop_flat(&f),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
