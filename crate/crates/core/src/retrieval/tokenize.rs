//! Tokenizers for lexical scoring.
//!
//! Two modes: a whitespace + lowercase fallback, and a subword unigram
//! tokenizer loaded from a `tokenizer.json` style definition (normalizer,
//! metaspace pre-tokenizer and a unigram vocabulary with log-probability
//! scores). Segmentation is the Viterbi best path over vocabulary pieces,
//! with unknown characters falling back to the unknown piece and runs of
//! unknown pieces fused.

use std::collections::HashMap;
use std::path::Path;

use regex::Regex;
use serde::Deserialize;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

const UNK_PENALTY: f64 = 10.0;

#[derive(Debug, Clone)]
pub enum Tokenizer {
    /// Unicode whitespace split, then lowercase.
    Fallback,
    Unigram(UnigramTokenizer),
}

impl Tokenizer {
    /// `"fallback"` selects the fallback rule; anything else is a path to a
    /// tokenizer definition.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if spec == "fallback" {
            Ok(Tokenizer::Fallback)
        } else {
            Ok(Tokenizer::Unigram(UnigramTokenizer::from_file(Path::new(spec))?))
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self {
            Tokenizer::Fallback => text.split_whitespace().map(str::to_lowercase).collect(),
            // Unknown spans keep their own text, so distinct unknown strings
            // stay distinct terms.
            Tokenizer::Unigram(t) => t.encode(text).into_iter().map(|tok| tok.surface).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub id: u32,
    /// Normalized surface text covered by the token.
    pub surface: String,
}

#[derive(Debug, Clone)]
enum Normalizer {
    Nfc,
    Nfd,
    Nfkc,
    Nfkd,
    Lowercase,
    Strip { left: bool, right: bool },
    ReplaceLiteral { pattern: String, content: String },
    ReplaceRegex { pattern: Regex, content: String },
}

impl Normalizer {
    fn apply(&self, s: String) -> String {
        match self {
            Normalizer::Nfc => s.nfc().collect(),
            Normalizer::Nfd => s.nfd().collect(),
            Normalizer::Nfkc => s.nfkc().collect(),
            Normalizer::Nfkd => s.nfkd().collect(),
            Normalizer::Lowercase => s.to_lowercase(),
            Normalizer::Strip { left, right } => {
                let t = match (left, right) {
                    (true, true) => s.trim(),
                    (true, false) => s.trim_start(),
                    (false, true) => s.trim_end(),
                    (false, false) => s.as_str(),
                };
                t.to_string()
            }
            Normalizer::ReplaceLiteral { pattern, content } => s.replace(pattern, content),
            Normalizer::ReplaceRegex { pattern, content } => {
                pattern.replace_all(&s, content.as_str()).into_owned()
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Metaspace {
    replacement: char,
    prepend: bool,
    split: bool,
}

impl Metaspace {
    fn pre_tokenize(&self, text: &str) -> Vec<String> {
        if text.is_empty() {
            return Vec::new();
        }
        let mut s: String = text
            .chars()
            .map(|c| if c == ' ' { self.replacement } else { c })
            .collect();
        if self.prepend && !s.starts_with(self.replacement) {
            s.insert(0, self.replacement);
        }
        if !self.split {
            return vec![s];
        }
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in s.chars() {
            if c == self.replacement && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct UnigramTokenizer {
    normalizers: Vec<Normalizer>,
    metaspace: Option<Metaspace>,
    pieces: Vec<String>,
    scores: Vec<f64>,
    lookup: HashMap<String, u32>,
    max_piece_chars: usize,
    unk_id: u32,
    unk_score: f64,
}

#[derive(Deserialize)]
struct FileDef {
    #[serde(default)]
    normalizer: Option<serde_json::Value>,
    #[serde(default)]
    pre_tokenizer: Option<serde_json::Value>,
    model: ModelDef,
}

#[derive(Deserialize)]
struct ModelDef {
    #[serde(rename = "type")]
    kind: String,
    vocab: Vec<(String, f64)>,
    unk_id: Option<u32>,
    #[serde(default)]
    byte_fallback: bool,
}

fn tok_err(msg: impl Into<String>) -> Error {
    Error::Tokenizer(msg.into())
}

fn parse_normalizer(v: &serde_json::Value, out: &mut Vec<Normalizer>) -> Result<()> {
    let kind = v["type"].as_str().ok_or_else(|| tok_err("normalizer without type"))?;
    match kind {
        "Sequence" => {
            for n in v["normalizers"]
                .as_array()
                .ok_or_else(|| tok_err("Sequence normalizer without list"))?
            {
                parse_normalizer(n, out)?;
            }
        }
        "NFC" => out.push(Normalizer::Nfc),
        "NFD" => out.push(Normalizer::Nfd),
        "NFKC" => out.push(Normalizer::Nfkc),
        "NFKD" => out.push(Normalizer::Nfkd),
        // Compiled sentencepiece character maps are NFKC-based rewrite
        // tables; NFKC reproduces them for everything but a few control and
        // whitespace folds.
        "Precompiled" => out.push(Normalizer::Nfkc),
        "Lowercase" => out.push(Normalizer::Lowercase),
        "Strip" => out.push(Normalizer::Strip {
            left: v["strip_left"].as_bool().unwrap_or(true),
            right: v["strip_right"].as_bool().unwrap_or(true),
        }),
        "Replace" => {
            let content = v["content"].as_str().unwrap_or_default().to_string();
            let pattern = &v["pattern"];
            if let Some(lit) = pattern["String"].as_str() {
                out.push(Normalizer::ReplaceLiteral {
                    pattern: lit.to_string(),
                    content,
                });
            } else if let Some(re) = pattern["Regex"].as_str() {
                let pattern = Regex::new(re).map_err(|e| tok_err(e.to_string()))?;
                out.push(Normalizer::ReplaceRegex { pattern, content });
            } else {
                return Err(tok_err("Replace normalizer without pattern"));
            }
        }
        other => return Err(tok_err(format!("unsupported normalizer {other}"))),
    }
    Ok(())
}

fn parse_pre_tokenizer(v: &serde_json::Value) -> Result<Option<Metaspace>> {
    let kind = v["type"].as_str().ok_or_else(|| tok_err("pre_tokenizer without type"))?;
    match kind {
        "Metaspace" => {
            let replacement = v["replacement"]
                .as_str()
                .and_then(|s| s.chars().next())
                .unwrap_or('\u{2581}');
            let prepend = match v["prepend_scheme"].as_str() {
                Some("never") => false,
                Some(_) => true,
                None => v["add_prefix_space"].as_bool().unwrap_or(true),
            };
            Ok(Some(Metaspace {
                replacement,
                prepend,
                split: v["split"].as_bool().unwrap_or(true),
            }))
        }
        "Sequence" => {
            let list = v["pretokenizers"]
                .as_array()
                .ok_or_else(|| tok_err("Sequence pre_tokenizer without list"))?;
            match list.as_slice() {
                [single] => parse_pre_tokenizer(single),
                _ => Err(tok_err("only single-element pre_tokenizer sequences are supported")),
            }
        }
        other => Err(tok_err(format!("unsupported pre_tokenizer {other}"))),
    }
}

impl UnigramTokenizer {
    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let def: FileDef = serde_json::from_slice(bytes).map_err(|e| tok_err(e.to_string()))?;
        if def.model.kind != "Unigram" {
            return Err(tok_err(format!("unsupported model type {}", def.model.kind)));
        }
        if def.model.byte_fallback {
            return Err(tok_err("byte_fallback unigram models are not supported"));
        }
        if def.model.vocab.is_empty() {
            return Err(tok_err("empty vocabulary"));
        }
        let unk_id = def.model.unk_id.ok_or_else(|| tok_err("model has no unk_id"))?;
        if unk_id as usize >= def.model.vocab.len() {
            return Err(tok_err("unk_id outside vocabulary"));
        }

        let mut normalizers = Vec::new();
        if let Some(n) = def.normalizer.as_ref().filter(|n| !n.is_null()) {
            parse_normalizer(n, &mut normalizers)?;
        }
        let metaspace = match def.pre_tokenizer.as_ref().filter(|p| !p.is_null()) {
            Some(p) => parse_pre_tokenizer(p)?,
            None => None,
        };

        let mut pieces = Vec::with_capacity(def.model.vocab.len());
        let mut scores = Vec::with_capacity(def.model.vocab.len());
        let mut lookup = HashMap::with_capacity(def.model.vocab.len());
        let mut max_piece_chars = 1;
        let mut min_score = f64::INFINITY;
        for (i, (piece, score)) in def.model.vocab.into_iter().enumerate() {
            min_score = min_score.min(score);
            max_piece_chars = max_piece_chars.max(piece.chars().count());
            lookup.entry(piece.clone()).or_insert(i as u32);
            pieces.push(piece);
            scores.push(score);
        }

        Ok(UnigramTokenizer {
            normalizers,
            metaspace,
            pieces,
            scores,
            lookup,
            max_piece_chars,
            unk_id,
            unk_score: min_score - UNK_PENALTY,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    pub fn encode(&self, text: &str) -> Vec<Token> {
        let normalized = self
            .normalizers
            .iter()
            .fold(text.to_string(), |s, n| n.apply(s));
        let words = match &self.metaspace {
            Some(m) => m.pre_tokenize(&normalized),
            None if normalized.is_empty() => Vec::new(),
            None => vec![normalized],
        };
        let mut out = Vec::new();
        for word in &words {
            self.segment(word, &mut out);
        }
        out
    }

    fn segment(&self, word: &str, out: &mut Vec<Token>) {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n = bounds.len() - 1;
        // best[e] = (score, start, id) of the best path ending at char e
        let mut best: Vec<(f64, usize, u32)> = vec![(f64::NEG_INFINITY, 0, 0); n + 1];
        best[0].0 = 0.0;
        for end in 1..=n {
            let lo = end.saturating_sub(self.max_piece_chars);
            for start in lo..end {
                let piece = &word[bounds[start]..bounds[end]];
                let node = match self.lookup.get(piece) {
                    Some(&id) => Some((self.scores[id as usize], id)),
                    None if end == start + 1 => Some((self.unk_score, self.unk_id)),
                    None => None,
                };
                if let Some((score, id)) = node {
                    let total = best[start].0 + score;
                    if total > best[end].0 {
                        best[end] = (total, start, id);
                    }
                }
            }
        }

        let mut path = Vec::new();
        let mut end = n;
        while end > 0 {
            let (_, start, id) = best[end];
            path.push((start, end, id));
            end = start;
        }
        path.reverse();

        for (start, end, id) in path {
            let surface = &word[bounds[start]..bounds[end]];
            match out.last_mut() {
                Some(prev) if id == self.unk_id && prev.id == self.unk_id => {
                    prev.surface.push_str(surface)
                }
                _ => out.push(Token {
                    id,
                    surface: surface.to_string(),
                }),
            }
        }
    }
}
