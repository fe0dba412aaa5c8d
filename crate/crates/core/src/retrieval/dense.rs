//! Exhaustive cosine scoring over dense vectors.

use std::collections::HashMap;
use std::path::Path;

use super::vecfile::{self, DenseRecords};
use super::Retriever;
use crate::error::{Error, Result};
use crate::model::{Corpus, Passage, Query};

/// Dense vectors keyed by id. Rows are stored as 32-bit floats; all
/// arithmetic is done in 64 bits.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
}

impl DenseStore {
    pub fn new(records: DenseRecords) -> Result<Self> {
        if records.dim == 0 {
            return Err(Error::InvalidArgument("dense dimension must be positive".into()));
        }
        if records.data.len() != records.ids.len() * records.dim {
            return Err(Error::Dimension {
                expected: records.ids.len() * records.dim,
                found: records.data.len(),
            });
        }
        let mut index = HashMap::with_capacity(records.ids.len());
        for (i, id) in records.ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::format("dense vector", format!("duplicate id {id:?}")));
            }
        }
        let norms = records.data.chunks_exact(records.dim).map(norm).collect();
        Ok(DenseStore {
            dim: records.dim,
            norms,
            ids: records.ids,
            data: records.data,
            index,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(vecfile::read_dense(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        vecfile::write_dense(path, &self.to_records())
    }

    pub fn to_records(&self) -> DenseRecords {
        DenseRecords {
            dim: self.dim,
            ids: self.ids.clone(),
            data: self.data.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn row(&self, id: &str) -> Option<&[f32]> {
        self.index
            .get(id)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Row and its euclidean norm; zero norms are an error.
    fn row_with_norm(&self, id: &str, kind: &'static str) -> Result<(&[f32], f64)> {
        let &i = self.index.get(id).ok_or_else(|| Error::MissingId {
            kind,
            id: id.to_string(),
        })?;
        let n = self.norms[i];
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm { id: id.to_string() });
        }
        Ok((&self.data[i * self.dim..(i + 1) * self.dim], n))
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn cosine_with_norms(q: &[f32], q_norm: f64, p: &[f32], p_norm: f64) -> f64 {
    dot(q, p) / (q_norm * p_norm)
}

/// Cosine similarity between a query vector and a passage vector.
pub fn dense_score(
    queries: &DenseStore,
    passages: &DenseStore,
    query_id: &str,
    passage_id: &str,
) -> Result<f64> {
    if queries.dim != passages.dim {
        return Err(Error::Dimension {
            expected: queries.dim,
            found: passages.dim,
        });
    }
    let (q, q_norm) = queries.row_with_norm(query_id, "query")?;
    let (p, p_norm) = passages.row_with_norm(passage_id, "passage")?;
    Ok(cosine_with_norms(q, q_norm, p, p_norm))
}

pub struct DenseRetriever {
    queries: DenseStore,
    passages: DenseStore,
}

impl DenseRetriever {
    pub fn new(queries: DenseStore, passages: DenseStore) -> Result<Self> {
        if queries.dim != passages.dim {
            return Err(Error::Dimension {
                expected: queries.dim,
                found: passages.dim,
            });
        }
        Ok(DenseRetriever { queries, passages })
    }

    pub fn queries(&self) -> &DenseStore {
        &self.queries
    }

    pub fn passages(&self) -> &DenseStore {
        &self.passages
    }
}

impl Retriever for DenseRetriever {
    fn score(&self, query: &Query, passage: &Passage) -> Result<f64> {
        dense_score(&self.queries, &self.passages, &query.id, &passage.id)
    }

    fn score_passages(&self, query: &Query, corpus: &Corpus) -> Result<Vec<f64>> {
        let (q, q_norm) = self.queries.row_with_norm(&query.id, "query")?;
        corpus
            .passages()
            .iter()
            .map(|p| {
                let (row, p_norm) = self.passages.row_with_norm(&p.id, "passage")?;
                Ok(cosine_with_norms(q, q_norm, row, p_norm))
            })
            .collect()
    }
}
