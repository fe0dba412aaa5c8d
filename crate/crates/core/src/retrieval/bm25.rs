//! Inverted index and Lucene-style BM25.
//!
//! ```text
//! idf(t)     = ln(1 + (N - df + 0.5) / (df + 0.5))
//! tf_norm    = tf / (tf + k1 * (1 - b + b * dl / avgdl))
//! score(q,d) = sum over unique query terms of idf(t) * tf_norm(t, d)
//! ```
//!
//! Query-side term frequency is ignored; each unique term counts once.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::Tokenizer;
use super::Retriever;
use crate::error::{Error, Result};
use crate::model::{Corpus, Passage, Query};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Position of the passage in the index's `doc_ids`.
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<u32>,
    pub avg_doc_length: f64,
    /// Postings per term, sorted by document position.
    pub postings: BTreeMap<String, Vec<Posting>>,
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn doc_position(&self, passage_id: &str) -> Option<usize> {
        self.doc_ids
            .binary_search_by(|id| id.as_str().cmp(passage_id))
            .ok()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, doc: usize, params: Bm25Params) -> f64 {
        let tf = tf as f64;
        let dl = self.doc_lengths[doc] as f64;
        let norm = 1.0 - params.b + params.b * dl / self.avg_doc_length;
        idf * (tf / (tf + params.k1 * norm))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }
}

pub fn build_index(corpus: &Corpus, tokenizer: &Tokenizer) -> InvertedIndex {
    let passages = corpus.passages();
    let mut doc_ids = Vec::with_capacity(passages.len());
    let mut doc_lengths = Vec::with_capacity(passages.len());
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut total: u64 = 0;

    for (doc, passage) in passages.iter().enumerate() {
        let tokens = tokenizer.tokenize(&passage.text);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens.iter() {
            *counts.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting {
                doc: doc as u32,
                tf,
            });
        }
        doc_ids.push(passage.id.clone());
        doc_lengths.push(tokens.len() as u32);
        total += tokens.len() as u64;
    }

    let avg_doc_length = if doc_ids.is_empty() {
        0.0
    } else {
        total as f64 / doc_ids.len() as f64
    };
    InvertedIndex {
        doc_ids,
        doc_lengths,
        avg_doc_length,
        postings,
    }
}

fn unique_terms(query_tokens: &[String]) -> BTreeSet<&str> {
    query_tokens.iter().map(String::as_str).collect()
}

pub fn bm25_score_with(
    index: &InvertedIndex,
    query_tokens: &[String],
    passage_id: &str,
    params: Bm25Params,
) -> Result<f64> {
    let doc = index
        .doc_position(passage_id)
        .ok_or_else(|| Error::MissingId {
            kind: "passage",
            id: passage_id.to_string(),
        })?;
    let mut score = 0.0;
    for term in unique_terms(query_tokens) {
        let Some(list) = index.postings.get(term) else {
            continue;
        };
        if let Ok(i) = list.binary_search_by_key(&(doc as u32), |p| p.doc) {
            score += index.term_weight(index.idf(term), list[i].tf, doc, params);
        }
    }
    Ok(score)
}

/// BM25 with k1 = 1.2 and b = 0.75.
pub fn bm25_score(index: &InvertedIndex, query_tokens: &[String], passage_id: &str) -> Result<f64> {
    bm25_score_with(index, query_tokens, passage_id, Bm25Params::default())
}

/// Scores all indexed documents by walking postings. Per document, terms are
/// added in the same order as [`bm25_score_with`], so both paths agree bit
/// for bit.
pub fn bm25_score_all(index: &InvertedIndex, query_tokens: &[String], params: Bm25Params) -> Vec<f64> {
    let mut acc = vec![0.0; index.doc_count()];
    for term in unique_terms(query_tokens) {
        let Some(list) = index.postings.get(term) else {
            continue;
        };
        let idf = index.idf(term);
        for p in list {
            acc[p.doc as usize] += index.term_weight(idf, p.tf, p.doc as usize, params);
        }
    }
    acc
}

pub struct Bm25Retriever {
    index: InvertedIndex,
    tokenizer: Tokenizer,
    params: Bm25Params,
}

impl Bm25Retriever {
    pub fn new(index: InvertedIndex, tokenizer: Tokenizer, params: Bm25Params) -> Self {
        Bm25Retriever {
            index,
            tokenizer,
            params,
        }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }
}

impl Retriever for Bm25Retriever {
    fn score(&self, query: &Query, passage: &Passage) -> Result<f64> {
        let tokens = self.tokenizer.tokenize(&query.text);
        bm25_score_with(&self.index, &tokens, &passage.id, self.params)
    }

    fn score_passages(&self, query: &Query, corpus: &Corpus) -> Result<Vec<f64>> {
        let tokens = self.tokenizer.tokenize(&query.text);
        let all = bm25_score_all(&self.index, &tokens, self.params);
        if self.index.doc_ids.len() == corpus.passages().len()
            && self
                .index
                .doc_ids
                .iter()
                .zip(corpus.passages())
                .all(|(a, p)| *a == p.id)
        {
            return Ok(all);
        }
        corpus
            .passages()
            .iter()
            .map(|p| {
                self.index
                    .doc_position(&p.id)
                    .map(|i| all[i])
                    .ok_or_else(|| Error::MissingId {
                        kind: "passage",
                        id: p.id.clone(),
                    })
            })
            .collect()
    }
}
