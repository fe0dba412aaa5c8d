//! Learned sparse vectors scored by inner product.

use std::collections::HashMap;
use std::path::Path;

use super::vecfile::{self, SparseRecords};
use super::Retriever;
use crate::error::{Error, Result};
use crate::model::{Passage, Query};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseStore {
    vocab_size: u32,
    ids: Vec<String>,
    /// Entries sorted by vocabulary index, duplicates summed.
    vectors: Vec<Vec<(u32, f32)>>,
    index: HashMap<String, usize>,
}

impl SparseStore {
    pub fn new(records: SparseRecords) -> Result<Self> {
        if records.ids.len() != records.vectors.len() {
            return Err(Error::InvalidArgument("ids and vectors differ in length".into()));
        }
        let mut index = HashMap::with_capacity(records.ids.len());
        let mut vectors = Vec::with_capacity(records.vectors.len());
        for (i, (id, mut v)) in records.ids.iter().zip(records.vectors).enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::format("sparse vector", format!("duplicate id {id:?}")));
            }
            for &(term, w) in &v {
                if term >= records.vocab_size {
                    return Err(Error::format(
                        "sparse vector",
                        format!("{id:?}: index {term} outside vocabulary of {}", records.vocab_size),
                    ));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::format(
                        "sparse vector",
                        format!("{id:?}: weight {w} at index {term} is not a finite non-negative value"),
                    ));
                }
            }
            v.sort_by_key(|e| e.0);
            v.dedup_by(|later, kept| {
                if later.0 == kept.0 {
                    kept.1 += later.1;
                    true
                } else {
                    false
                }
            });
            vectors.push(v);
        }
        Ok(SparseStore {
            vocab_size: records.vocab_size,
            ids: records.ids,
            vectors,
            index,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(vecfile::read_sparse(path)?)
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn vector(&self, id: &str) -> Option<&[(u32, f32)]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }
}

/// Inner product of two index-sorted sparse vectors.
pub fn sparse_dot(a: &[(u32, f32)], b: &[(u32, f32)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 as f64 * b[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

pub fn sparse_score(
    queries: &SparseStore,
    passages: &SparseStore,
    query_id: &str,
    passage_id: &str,
) -> Result<f64> {
    let q = queries.vector(query_id).ok_or_else(|| Error::MissingId {
        kind: "query",
        id: query_id.to_string(),
    })?;
    let p = passages.vector(passage_id).ok_or_else(|| Error::MissingId {
        kind: "passage",
        id: passage_id.to_string(),
    })?;
    Ok(sparse_dot(q, p))
}

pub struct SparseRetriever {
    queries: SparseStore,
    passages: SparseStore,
}

impl SparseRetriever {
    pub fn new(queries: SparseStore, passages: SparseStore) -> Self {
        SparseRetriever { queries, passages }
    }

    pub fn queries(&self) -> &SparseStore {
        &self.queries
    }

    pub fn passages(&self) -> &SparseStore {
        &self.passages
    }
}

impl Retriever for SparseRetriever {
    fn score(&self, query: &Query, passage: &Passage) -> Result<f64> {
        sparse_score(&self.queries, &self.passages, &query.id, &passage.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(vectors: Vec<(&str, Vec<(u32, f32)>)>) -> SparseStore {
        SparseStore::new(SparseRecords {
            vocab_size: 16,
            ids: vectors.iter().map(|v| v.0.to_string()).collect(),
            vectors: vectors.into_iter().map(|v| v.1).collect(),
        })
        .unwrap()
    }

    #[test]
    fn single_term_and_disjoint() {
        let q = store(vec![("q", vec![(3, 2.0)])]);
        let p = store(vec![("d", vec![(3, 0.5)]), ("e", vec![(4, 9.0), (1, 1.0)])]);
        assert_eq!(sparse_score(&q, &p, "q", "d").unwrap(), 1.0);
        assert_eq!(sparse_score(&q, &p, "q", "e").unwrap(), 0.0);
        assert!(sparse_score(&q, &p, "q", "zz").is_err());
    }

    #[test]
    fn validation() {
        let bad_index = SparseStore::new(SparseRecords {
            vocab_size: 2,
            ids: vec!["a".into()],
            vectors: vec![vec![(2, 1.0)]],
        });
        assert!(bad_index.is_err());
        let bad_weight = SparseStore::new(SparseRecords {
            vocab_size: 8,
            ids: vec!["a".into()],
            vectors: vec![vec![(2, f32::NAN)]],
        });
        assert!(bad_weight.is_err());
        let negative = SparseStore::new(SparseRecords {
            vocab_size: 8,
            ids: vec!["a".into()],
            vectors: vec![vec![(2, -1.0)]],
        });
        assert!(negative.is_err());
    }

    #[test]
    fn unsorted_input_is_canonicalized() {
        let s = store(vec![("a", vec![(5, 1.0), (2, 1.0), (5, 0.5)])]);
        assert_eq!(s.vector("a").unwrap(), &[(2, 1.0), (5, 1.5)]);
    }
}
