use std::path::PathBuf;

use lingeval::retrieval::tokenize::UnigramTokenizer;
use lingeval::retrieval::Tokenizer;
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    text: String,
    ids: Vec<u32>,
    tokens: Vec<String>,
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn cases() -> Vec<Case> {
    std::fs::read_to_string(fixture("unigram_reference.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn unigram_ids_match_reference_implementation() {
    let tok = UnigramTokenizer::from_file(&fixture("unigram_tokenizer.json")).unwrap();
    let cases = cases();
    assert_eq!(cases.len(), 100);
    for case in &cases {
        let got: Vec<u32> = tok.encode(&case.text).iter().map(|t| t.id).collect();
        assert_eq!(got, case.ids, "text {:?}", case.text);
    }
}

#[test]
fn tokenize_yields_reference_pieces_and_is_stable() {
    let spec = fixture("unigram_tokenizer.json");
    let a = Tokenizer::from_spec(spec.to_str().unwrap()).unwrap();
    let b = Tokenizer::from_spec(spec.to_str().unwrap()).unwrap();
    for case in cases() {
        let got = a.tokenize(&case.text);
        assert_eq!(got, case.tokens, "text {:?}", case.text);
        assert_eq!(got, b.tokenize(&case.text));
    }
}

#[test]
fn fallback_splits_on_whitespace_and_lowercases() {
    assert_eq!(
        Tokenizer::Fallback.tokenize("  Hello\tWORLD  über\n"),
        ["hello", "world", "über"]
    );
    assert!(Tokenizer::Fallback.tokenize(" \t ").is_empty());
}
