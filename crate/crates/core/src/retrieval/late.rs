//! Late-interaction (MaxSim) scoring over token vectors.
//!
//! `score(q, d) = sum_i max_j sim(q_i, d_j)`. The token similarity is cosine:
//! rows are kept as imported and each carries its inverse norm, so an
//! unnormalized export is scored exactly like its normalized form.

use std::collections::HashMap;
use std::path::Path;

use super::dense::{dot, norm};
use super::vecfile::{self, TokenRecords};
use super::Retriever;
use crate::error::{Error, Result};
use crate::model::{Passage, Query};

/// Tolerance for treating an imported token row as already unit length.
const UNIT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TokenStore {
    dim: usize,
    ids: Vec<String>,
    tokens: Vec<Vec<f32>>,
    inv_norms: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    normalized_on_import: bool,
}

impl TokenStore {
    pub fn new(records: TokenRecords) -> Result<Self> {
        if records.dim == 0 {
            return Err(Error::InvalidArgument("token dimension must be positive".into()));
        }
        if records.ids.len() != records.tokens.len() {
            return Err(Error::InvalidArgument("ids and token lists differ in length".into()));
        }
        let mut index = HashMap::with_capacity(records.ids.len());
        let mut inv_norms = Vec::with_capacity(records.ids.len());
        let mut normalized_on_import = false;
        for (i, (id, toks)) in records.ids.iter().zip(&records.tokens).enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::format("token vector", format!("duplicate id {id:?}")));
            }
            if toks.is_empty() {
                return Err(Error::format("token vector", format!("{id:?} has no tokens")));
            }
            if toks.len() % records.dim != 0 {
                return Err(Error::Dimension {
                    expected: records.dim,
                    found: toks.len() % records.dim,
                });
            }
            let mut inv = Vec::with_capacity(toks.len() / records.dim);
            for row in toks.chunks_exact(records.dim) {
                let n = norm(row);
                if n == 0.0 || !n.is_finite() {
                    return Err(Error::ZeroNorm { id: id.clone() });
                }
                if (n - 1.0).abs() > UNIT_TOLERANCE {
                    normalized_on_import = true;
                }
                inv.push(1.0 / n);
            }
            inv_norms.push(inv);
        }
        Ok(TokenStore {
            dim: records.dim,
            ids: records.ids,
            tokens: records.tokens,
            inv_norms,
            index,
            normalized_on_import,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(vecfile::read_tokens(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Whether any imported row was off unit length and had to be rescaled.
    pub fn normalized_on_import(&self) -> bool {
        self.normalized_on_import
    }

    pub fn token_count(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| self.inv_norms[i].len())
    }

    fn record(&self, id: &str, kind: &'static str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::MissingId {
            kind,
            id: id.to_string(),
        })
    }
}

pub fn maxsim_score(
    queries: &TokenStore,
    passages: &TokenStore,
    query_id: &str,
    passage_id: &str,
) -> Result<f64> {
    if queries.dim != passages.dim {
        return Err(Error::Dimension {
            expected: queries.dim,
            found: passages.dim,
        });
    }
    let qi = queries.record(query_id, "query")?;
    let pi = passages.record(passage_id, "passage")?;
    let dim = queries.dim;
    let q_rows = queries.tokens[qi].chunks_exact(dim).zip(&queries.inv_norms[qi]);
    let mut maxima: Vec<f64> = q_rows
        .map(|(q, &q_inv)| {
            passages.tokens[pi]
                .chunks_exact(dim)
                .zip(&passages.inv_norms[pi])
                .map(|(p, &p_inv)| dot(q, p) * q_inv * p_inv)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    // Summing in sorted order makes the score independent of query token order.
    maxima.sort_unstable_by(f64::total_cmp);
    Ok(maxima.iter().sum())
}

pub struct LateInteractionRetriever {
    queries: TokenStore,
    passages: TokenStore,
}

impl LateInteractionRetriever {
    pub fn new(queries: TokenStore, passages: TokenStore) -> Result<Self> {
        if queries.dim != passages.dim {
            return Err(Error::Dimension {
                expected: queries.dim,
                found: passages.dim,
            });
        }
        Ok(LateInteractionRetriever { queries, passages })
    }

    pub fn queries(&self) -> &TokenStore {
        &self.queries
    }

    pub fn passages(&self) -> &TokenStore {
        &self.passages
    }
}

impl Retriever for LateInteractionRetriever {
    fn score(&self, query: &Query, passage: &Passage) -> Result<f64> {
        maxsim_score(&self.queries, &self.passages, &query.id, &passage.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(records: Vec<(&str, Vec<f32>)>) -> TokenStore {
        TokenStore::new(TokenRecords {
            dim: 2,
            ids: records.iter().map(|r| r.0.to_string()).collect(),
            tokens: records.into_iter().map(|r| r.1).collect(),
        })
        .unwrap()
    }

    #[test]
    fn identical_token_scores_one() {
        let q = store(vec![("q", vec![0.6, 0.8])]);
        let p = store(vec![("p", vec![1.0, 0.0, 0.6, 0.8, 0.0, -1.0])]);
        assert!((maxsim_score(&q, &p, "q", "p").unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn repeated_query_tokens_add_up() {
        let p = store(vec![("p", vec![1.0, 0.0, 0.0, 1.0])]);
        let single = store(vec![("q", vec![3.0, 1.0])]);
        let triple = store(vec![("q", vec![3.0, 1.0, 3.0, 1.0, 3.0, 1.0])]);
        let s1 = maxsim_score(&single, &p, "q", "p").unwrap();
        let s3 = maxsim_score(&triple, &p, "q", "p").unwrap();
        assert!((s3 - 3.0 * s1).abs() < 1e-12);
        assert!(single.normalized_on_import());
    }

    #[test]
    fn rejects_empty_and_zero_rows() {
        let empty = TokenStore::new(TokenRecords {
            dim: 2,
            ids: vec!["a".into()],
            tokens: vec![vec![]],
        });
        assert!(empty.is_err());
        let zero = TokenStore::new(TokenRecords {
            dim: 2,
            ids: vec!["a".into()],
            tokens: vec![vec![0.0, 0.0]],
        });
        assert!(matches!(zero, Err(Error::ZeroNorm { .. })));
    }
}
