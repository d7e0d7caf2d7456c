//! Corpus generation, file formats and episode sampling.

use std::path::Path;

use lada_core::data::{
    format_conll, format_jsonl, generate_synthetic_pair, kshot_sample, load_conll, load_jsonl,
    parse_conll, parse_jsonl,
    synthetic::{SOURCE_LOCALE, TARGET_LOCALE},
    write_conll, write_jsonl, Grammar, SyntheticLanguageSpec,
};
use lada_core::harness::extract_spans;
use lada_core::Error;

#[test]
fn jsonl_and_conll_files_round_trip() {
    let schema = Grammar::standard().schema();
    let pair =
        generate_synthetic_pair(&schema, 50, &SyntheticLanguageSpec::reversal_affix(4)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    for corpus in [&pair.source, &pair.target] {
        let j = tmp.path().join("c.jsonl");
        write_jsonl(corpus, &j).unwrap();
        assert_eq!(&load_jsonl(&j).unwrap(), corpus);
        let c = tmp.path().join("c.conll");
        write_conll(corpus, &c).unwrap();
        assert_eq!(&load_conll(&c).unwrap(), corpus);
    }
}

#[test]
fn identity_target_equals_source_up_to_locale() {
    let schema = Grammar::standard().schema();
    let pair = generate_synthetic_pair(&schema, 30, &SyntheticLanguageSpec::identity(9)).unwrap();
    for (s, t) in pair.source.iter().zip(pair.target.iter()) {
        assert_eq!(s.locale, SOURCE_LOCALE);
        assert_eq!(t.locale, TARGET_LOCALE);
        assert_eq!(
            (&s.tokens, &s.intent, &s.slots),
            (&t.tokens, &t.intent, &t.slots)
        );
    }
}

#[test]
fn reversal_keeps_intents_and_span_types() {
    let schema = Grammar::standard().schema();
    let pair =
        generate_synthetic_pair(&schema, 100, &SyntheticLanguageSpec::reversal_affix(5)).unwrap();
    for (s, t) in pair.source.iter().zip(pair.target.iter()) {
        assert_eq!(s.intent, t.intent);
        assert_eq!(s.len(), t.len());
        t.validate().unwrap();
        let mut st: Vec<String> = extract_spans(&s.slots).into_iter().map(|x| x.2).collect();
        let mut tt: Vec<String> = extract_spans(&t.slots).into_iter().map(|x| x.2).collect();
        st.sort();
        tt.sort();
        assert_eq!(st, tt);
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    let schema = Grammar::standard().schema();
    let a =
        generate_synthetic_pair(&schema, 40, &SyntheticLanguageSpec::reversal_affix(2)).unwrap();
    let b =
        generate_synthetic_pair(&schema, 40, &SyntheticLanguageSpec::reversal_affix(2)).unwrap();
    let c =
        generate_synthetic_pair(&schema, 40, &SyntheticLanguageSpec::reversal_affix(3)).unwrap();
    assert_eq!(format_jsonl(&a.target), format_jsonl(&b.target));
    assert_ne!(format_jsonl(&a.target), format_jsonl(&c.target));
}

#[test]
fn malformed_input_reports_the_line() {
    let p = Path::new("bad.jsonl");
    let text = "# lada-jsonl v1\n{\"tokens\":[\"a\"],\"intent\":\"x\",\"slots\":[\"O\"],\"locale\":\"src\"}\n{\"tokens\":[\"a\"],\"intent\":\"x\",\"slots\":[\"I-\"],\"locale\":\"src\"}\n";
    match parse_jsonl(text, p) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let conll = "# intent = x\na\tO\tb\n";
    assert!(matches!(
        parse_conll(conll, Path::new("bad.conll")),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn conll_text_round_trips() {
    let schema = Grammar::standard().schema();
    let pair = generate_synthetic_pair(&schema, 20, &SyntheticLanguageSpec::identity(1)).unwrap();
    let text = format_conll(&pair.source);
    assert_eq!(parse_conll(&text, Path::new("x")).unwrap(), pair.source);
}

#[test]
fn kshot_episodes_are_disjoint_and_reproducible() {
    let schema = Grammar::standard().schema();
    let corpus = generate_synthetic_pair(&schema, 300, &SyntheticLanguageSpec::identity(1))
        .unwrap()
        .source;
    let a = kshot_sample(&corpus, 3, 4, 7).unwrap();
    assert_eq!(a, kshot_sample(&corpus, 3, 4, 7).unwrap());
    assert_eq!(a.n(), 4);
    assert_eq!(a.support.len(), 12);
    for class in &a.classes {
        assert_eq!(a.support.iter().filter(|r| &r.intent == class).count(), 3);
    }
    assert!(a.query.iter().all(|r| a.classes.contains(&r.intent)));
    let zero = kshot_sample(&corpus, 0, 4, 7).unwrap();
    assert!(zero.is_zero_shot() && zero.support.is_empty());
    assert!(matches!(
        kshot_sample(&corpus, 1, 99, 0),
        Err(Error::Sampling(_))
    ));
}
