//! Scoring paradigms behind a single retriever contract.
//!
//! Every retriever scores any (query, passage) pair on demand; ranking is
//! exhaustive and uses one total order: score descending, then passage id
//! ascending.

pub mod bm25;
pub mod dense;
pub mod late;
pub mod mock;
pub mod sparse;
pub mod tokenize;
pub mod vecfile;

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Corpus, Passage, Query};

pub use bm25::{bm25_score, build_index, Bm25Params, Bm25Retriever, InvertedIndex};
pub use dense::{dense_score, DenseRetriever, DenseStore};
pub use late::{maxsim_score, LateInteractionRetriever, TokenStore};
pub use mock::mock_embed;
pub use sparse::{sparse_score, SparseRetriever, SparseStore};
pub use tokenize::Tokenizer;

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub passage_id: String,
    pub score: f64,
}

pub trait Retriever: Send + Sync {
    fn score(&self, query: &Query, passage: &Passage) -> Result<f64>;

    /// Scores every corpus passage, in corpus order.
    fn score_passages(&self, query: &Query, corpus: &Corpus) -> Result<Vec<f64>> {
        corpus
            .passages()
            .iter()
            .map(|p| self.score(query, p))
            .collect()
    }
}

/// Ranking order over corpus positions. Corpus passages are sorted by id, so
/// the position tie-break is the ascending-id rule.
pub fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Positions of the best `k` scores, in rank order.
pub fn rank_positions(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(order.len());
    if k == 0 {
        return Vec::new();
    }
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        order.truncate(k);
    }
    order.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    order
}

pub fn top_k(
    retriever: &dyn Retriever,
    corpus: &Corpus,
    query_id: &str,
    k: usize,
) -> Result<Vec<Scored>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let query = corpus.query(query_id).ok_or_else(|| Error::MissingId {
        kind: "query",
        id: query_id.to_string(),
    })?;
    let scores = retriever.score_passages(query, corpus)?;
    Ok(rank_positions(&scores, k)
        .into_iter()
        .map(|i| Scored {
            passage_id: corpus.passages()[i].id.clone(),
            score: scores[i],
        })
        .collect())
}

/// Retriever over a fixed score table, keyed by (query id, passage id).
/// Unlisted pairs score zero.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    scores: HashMap<(String, String), f64>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, passage_id: &str, score: f64) {
        self.scores
            .insert((query_id.to_string(), passage_id.to_string()), score);
    }

    /// Applies `f` to every stored score.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScoreTable {
            scores: self
                .scores
                .iter()
                .map(|(k, &v)| (k.clone(), f(v)))
                .collect(),
        }
    }
}

impl Retriever for ScoreTable {
    fn score(&self, query: &Query, passage: &Passage) -> Result<f64> {
        Ok(self
            .scores
            .get(&(query.id.clone(), passage.id.clone()))
            .copied()
            .unwrap_or(0.0))
    }
}
