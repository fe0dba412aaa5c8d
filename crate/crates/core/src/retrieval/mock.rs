//! Deterministic test embedder.
//!
//! Each text is embedded as `normalize([f(group_id); w * f(lang)])`, where
//! `f` is a seeded Gaussian feature vector of unit length. Content alone
//! drives similarity at `w = 0`; larger `w` makes the same-language member of
//! a group the closest one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::dense::DenseStore;
use super::vecfile::DenseRecords;
use crate::error::{Error, Result};
use crate::model::{Corpus, LanguageTag};

#[derive(Debug, Clone)]
pub struct MockStores {
    pub queries: DenseStore,
    pub passages: DenseStore,
}

fn features(seed: u64, namespace: &str, key: &str, dim: usize) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(namespace.as_bytes());
    hasher.update([0]);
    hasher.update(key.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= n;
    }
    v
}

fn embed(seed: u64, group_id: &str, lang: &LanguageTag, dim: usize, weight: f64) -> Vec<f32> {
    let lang_dim = dim / 2;
    let mut v = features(seed, "group", group_id, dim - lang_dim);
    v.extend(
        features(seed, "lang", lang.as_str(), lang_dim)
            .into_iter()
            .map(|x| if weight == 0.0 { 0.0 } else { weight * x }),
    );
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| (x / n) as f32).collect()
}

pub fn mock_embed(corpus: &Corpus, dim: usize, language_weight: f64, seed: u64) -> Result<MockStores> {
    if dim < 2 {
        return Err(Error::InvalidArgument("mock embedding dimension must be at least 2".into()));
    }
    if !language_weight.is_finite() {
        return Err(Error::InvalidArgument("language weight must be finite".into()));
    }
    let mut passages = DenseRecords {
        dim,
        ids: Vec::with_capacity(corpus.passages().len()),
        data: Vec::with_capacity(corpus.passages().len() * dim),
    };
    for p in corpus.passages() {
        passages.ids.push(p.id.clone());
        passages
            .data
            .extend(embed(seed, &p.group_id, &p.lang, dim, language_weight));
    }
    let mut queries = DenseRecords {
        dim,
        ids: Vec::with_capacity(corpus.queries().len()),
        data: Vec::with_capacity(corpus.queries().len() * dim),
    };
    for q in corpus.queries() {
        queries.ids.push(q.id.clone());
        queries
            .data
            .extend(embed(seed, &q.group_id, &q.lang, dim, language_weight));
    }
    Ok(MockStores {
        queries: DenseStore::new(queries)?,
        passages: DenseStore::new(passages)?,
    })
}
