//! Evaluation protocol driver and `MLRN` run files.
//!
//! A run scores every passage for every query, keeps the top `depth`
//! passages, and records the scores of every member of the query's target
//! group (whether or not they made the top list). Both come from one score
//! vector per query.
//!
//! ```text
//! "MLRN" | version u32 | header length u32 | header JSON
//! passages u64 | ids
//! queries  u64 | per query: id, ntop u32, ntop*(passage u32, score f64),
//!                            ngroup u32, ngroup*(passage u32, score f64)
//! ```
//!
//! The header carries the configuration, input file digests and a SHA-256
//! of the payload.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{default_depth_for, load_corpus, CorpusManifest};
use crate::metrics::QueryRun;
use crate::model::{validate_corpus, Corpus};
use crate::retrieval::vecfile::{put_id, Reader};
use crate::retrieval::{
    mock_embed, rank_positions, Bm25Params, Bm25Retriever, DenseRetriever, DenseStore,
    InvertedIndex, LateInteractionRetriever, Retriever, Scored, SparseRetriever, SparseStore,
    TokenStore, Tokenizer,
};

pub const RUN_MAGIC: &[u8; 4] = b"MLRN";
pub const RUN_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    Bm25,
    Dense,
    Sparse,
    LateInteraction,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockParams {
    pub dim: usize,
    pub language_weight: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: String,
    /// Corpus manifest path.
    pub corpus: PathBuf,
    pub paradigm: Paradigm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Run even when depth is below the largest content group.
    #[serde(default)]
    pub force_depth: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_store: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_store: Option<PathBuf>,
    /// `"fallback"` or a tokenizer definition path (BM25 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<String>,
    /// Prebuilt inverted index (BM25 only); built on the fly when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bm25: Option<Bm25Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockParams>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    /// Resolves relative paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        for p in [&mut self.query_store, &mut self.passage_store, &mut self.index]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(t) = &mut self.tokenizer {
            if t != "fallback" && Path::new(t).is_relative() {
                *t = base.join(&*t).to_string_lossy().into_owned();
            }
        }
    }

    fn store_path(&self, p: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
        p.clone().ok_or_else(|| {
            Error::InvalidArgument(format!("{:?} paradigm needs {what}", self.paradigm))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub engine_version: String,
    pub config: RunConfig,
    pub corpus: String,
    pub depth: usize,
    pub inputs: BTreeMap<String, InputDigest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    pub header: RunHeader,
    /// One entry per corpus query, ascending query id.
    pub queries: Vec<QueryRun>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Picks the evaluation depth and checks it against the largest group.
pub fn resolve_depth(config: &RunConfig, manifest: &CorpusManifest, corpus: &Corpus) -> Result<usize> {
    let depth = config
        .depth
        .or(manifest.default_depth)
        .unwrap_or_else(|| default_depth_for(corpus.max_group_size()));
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let max = corpus.max_group_size();
    if depth < max {
        if !config.force_depth {
            return Err(Error::Depth {
                depth,
                max_group_size: max,
            });
        }
        log::warn!("depth {depth} is below the largest content group ({max}); forced");
    } else if depth == max {
        log::warn!("depth {depth} equals the largest content group; recall@k cannot exceed it");
    }
    Ok(depth)
}

fn check_coverage<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a str>,
    contains: impl Fn(&str) -> bool,
) -> Result<()> {
    let missing: Vec<String> = ids.filter(|id| !contains(id)).map(str::to_string).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Coverage {
            kind,
            count: missing.len(),
            sample: missing.into_iter().take(5).collect(),
        })
    }
}

fn cover_queries(corpus: &Corpus, contains: impl Fn(&str) -> bool) -> Result<()> {
    check_coverage("query", corpus.queries().iter().map(|q| q.id.as_str()), contains)
}

fn cover_passages(corpus: &Corpus, contains: impl Fn(&str) -> bool) -> Result<()> {
    check_coverage("passage", corpus.passages().iter().map(|p| p.id.as_str()), contains)
}

/// Builds the retriever a configuration names and checks that its stores
/// cover the corpus.
pub fn build_retriever(config: &RunConfig, corpus: &Corpus) -> Result<Box<dyn Retriever>> {
    Ok(match config.paradigm {
        Paradigm::Bm25 => {
            let tokenizer = Tokenizer::from_spec(config.tokenizer.as_deref().unwrap_or("fallback"))?;
            let index = match &config.index {
                Some(path) => InvertedIndex::load(path)?,
                None => crate::retrieval::build_index(corpus, &tokenizer),
            };
            cover_passages(corpus, |id| index.doc_position(id).is_some())?;
            Box::new(Bm25Retriever::new(
                index,
                tokenizer,
                config.bm25.unwrap_or_default(),
            ))
        }
        Paradigm::Dense => {
            let queries = DenseStore::load(&config.store_path(&config.query_store, "query_store")?)?;
            let passages =
                DenseStore::load(&config.store_path(&config.passage_store, "passage_store")?)?;
            cover_queries(corpus, |id| queries.contains(id))?;
            cover_passages(corpus, |id| passages.contains(id))?;
            Box::new(DenseRetriever::new(queries, passages)?)
        }
        Paradigm::Sparse => {
            let queries = SparseStore::load(&config.store_path(&config.query_store, "query_store")?)?;
            let passages =
                SparseStore::load(&config.store_path(&config.passage_store, "passage_store")?)?;
            cover_queries(corpus, |id| queries.contains(id))?;
            cover_passages(corpus, |id| passages.contains(id))?;
            Box::new(SparseRetriever::new(queries, passages))
        }
        Paradigm::LateInteraction => {
            let queries = TokenStore::load(&config.store_path(&config.query_store, "query_store")?)?;
            let passages =
                TokenStore::load(&config.store_path(&config.passage_store, "passage_store")?)?;
            cover_queries(corpus, |id| queries.contains(id))?;
            cover_passages(corpus, |id| passages.contains(id))?;
            Box::new(LateInteractionRetriever::new(queries, passages)?)
        }
        Paradigm::Mock => {
            let params = config
                .mock
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("mock paradigm needs `mock` parameters".into()))?;
            let stores = mock_embed(corpus, params.dim, params.language_weight, params.seed)?;
            Box::new(DenseRetriever::new(stores.queries, stores.passages)?)
        }
    })
}

/// Scores one query against the whole corpus.
pub fn score_query(
    retriever: &dyn Retriever,
    corpus: &Corpus,
    query_id: &str,
    depth: usize,
) -> Result<QueryRun> {
    let query = corpus.query(query_id).ok_or_else(|| Error::MissingId {
        kind: "query",
        id: query_id.to_string(),
    })?;
    let group = corpus.group(&query.group_id).ok_or_else(|| Error::MissingId {
        kind: "group",
        id: query.group_id.clone(),
    })?;
    let scores = retriever.score_passages(query, corpus)?;
    let passages = corpus.passages();
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore {
            query: query.id.clone(),
            passage: passages[i].id.clone(),
        });
    }
    let ranking = rank_positions(&scores, depth)
        .into_iter()
        .map(|i| Scored {
            passage_id: passages[i].id.clone(),
            score: scores[i],
        })
        .collect();
    let mut group_scores: Vec<Scored> = group
        .members
        .values()
        .map(|id| {
            let i = corpus.passage_position(id).expect("group members are corpus passages");
            Scored {
                passage_id: id.clone(),
                score: scores[i],
            }
        })
        .collect();
    group_scores.sort_by(|a, b| a.passage_id.cmp(&b.passage_id));
    Ok(QueryRun {
        query_id: query.id.clone(),
        ranking,
        group_scores,
    })
}

/// Scores every query (in parallel on the current rayon pool); output is in
/// ascending query id order.
pub fn execute(retriever: &dyn Retriever, corpus: &Corpus, depth: usize) -> Result<Vec<QueryRun>> {
    corpus
        .queries()
        .par_iter()
        .map(|q| score_query(retriever, corpus, &q.id, depth))
        .collect()
}

fn input_digests(config: &RunConfig, manifest: &CorpusManifest) -> Result<BTreeMap<String, InputDigest>> {
    let mut files: Vec<(&str, PathBuf)> = vec![
        ("manifest", config.corpus.clone()),
        ("passages", manifest.passages.clone()),
        ("queries", manifest.queries.clone()),
    ];
    if config.paradigm != Paradigm::Mock {
        if let Some(p) = &config.query_store {
            files.push(("query_store", p.clone()));
        }
        if let Some(p) = &config.passage_store {
            files.push(("passage_store", p.clone()));
        }
    }
    if config.paradigm == Paradigm::Bm25 {
        if let Some(p) = &config.index {
            files.push(("index", p.clone()));
        }
        if let Some(t) = config.tokenizer.as_deref().filter(|t| *t != "fallback") {
            files.push(("tokenizer", PathBuf::from(t)));
        }
    }
    files
        .into_iter()
        .map(|(role, path)| {
            let sha256 = file_digest(&path)?;
            Ok((role.to_string(), InputDigest { path, sha256 }))
        })
        .collect()
}

/// Runs the full protocol for one (model, dataset) configuration.
pub fn run(config: &RunConfig) -> Result<ScoredRun> {
    let manifest = CorpusManifest::load(&config.corpus)?;
    let corpus = load_corpus(&manifest)?;
    let violations = validate_corpus(&corpus);
    if let Some(first) = violations.first() {
        return Err(Error::InvalidCorpus {
            count: violations.len(),
            first: first.to_string(),
        });
    }
    let depth = resolve_depth(config, &manifest, &corpus)?;
    let inputs = input_digests(config, &manifest)?;
    let retriever = build_retriever(config, &corpus)?;
    let queries = execute(retriever.as_ref(), &corpus, depth)?;
    Ok(ScoredRun {
        header: RunHeader {
            engine_version: ENGINE_VERSION.to_string(),
            config: config.clone(),
            corpus: corpus.name().to_string(),
            depth,
            inputs,
        },
        queries,
    })
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    #[serde(flatten)]
    run: RunHeader,
    payload_bytes: u64,
    payload_sha256: String,
}

fn encode_payload(queries: &[QueryRun]) -> Result<Vec<u8>> {
    let ids: BTreeSet<&str> = queries
        .iter()
        .flat_map(|q| q.ranking.iter().chain(&q.group_scores))
        .map(|s| s.passage_id.as_str())
        .collect();
    let ids: Vec<&str> = ids.into_iter().collect();
    let position = |id: &str| ids.binary_search(&id).expect("id collected above") as u32;

    let mut out = Vec::new();
    out.extend_from_slice(&(ids.len() as u64).to_le_bytes());
    for id in &ids {
        put_id(&mut out, id)?;
    }
    out.extend_from_slice(&(queries.len() as u64).to_le_bytes());
    for q in queries {
        put_id(&mut out, &q.query_id)?;
        for list in [&q.ranking, &q.group_scores] {
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for s in list {
                out.extend_from_slice(&position(&s.passage_id).to_le_bytes());
                out.extend_from_slice(&s.score.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn decode_payload(bytes: &[u8]) -> Result<Vec<QueryRun>> {
    let mut r = Reader::new(bytes, "run");
    let n_ids = r.u64()? as usize;
    let mut ids = Vec::with_capacity(n_ids.min(1 << 20));
    for _ in 0..n_ids {
        ids.push(r.id()?);
    }
    let n_queries = r.u64()? as usize;
    let mut queries = Vec::with_capacity(n_queries.min(1 << 20));
    for _ in 0..n_queries {
        let query_id = r.id()?;
        let mut lists = [Vec::new(), Vec::new()];
        for list in &mut lists {
            let n = r.u32()? as usize;
            list.reserve(n.min(1 << 16));
            for _ in 0..n {
                let idx = r.u32()? as usize;
                let score = r.f64()?;
                let passage_id = ids
                    .get(idx)
                    .ok_or_else(|| Error::format("run", format!("passage index {idx} out of range")))?
                    .clone();
                list.push(Scored { passage_id, score });
            }
        }
        let [ranking, group_scores] = lists;
        queries.push(QueryRun {
            query_id,
            ranking,
            group_scores,
        });
    }
    r.expect_eof()?;
    Ok(queries)
}

pub fn encode_run(run: &ScoredRun) -> Result<Vec<u8>> {
    let payload = encode_payload(&run.queries)?;
    let header = FileHeader {
        run: run.header.clone(),
        payload_bytes: payload.len() as u64,
        payload_sha256: hex::encode(Sha256::digest(&payload)),
    };
    let header = serde_json::to_vec(&header).map_err(|source| Error::Json {
        context: "run header".into(),
        source,
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + payload.len());
    out.extend_from_slice(RUN_MAGIC);
    out.extend_from_slice(&RUN_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_run(bytes: &[u8]) -> Result<ScoredRun> {
    if bytes.len() < 12 || &bytes[..4] != RUN_MAGIC {
        return Err(Error::format("run", "bad magic or truncated header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != RUN_VERSION {
        return Err(Error::format("run", format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_end = 12usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format("run", "truncated header"))?;
    let header: FileHeader =
        serde_json::from_slice(&bytes[12..header_end]).map_err(|source| Error::Json {
            context: "run header".into(),
            source,
        })?;
    let payload = &bytes[header_end..];
    if payload.len() as u64 != header.payload_bytes {
        return Err(Error::format(
            "run",
            format!(
                "payload is {} bytes, header says {}",
                payload.len(),
                header.payload_bytes
            ),
        ));
    }
    let found = hex::encode(Sha256::digest(payload));
    if found != header.payload_sha256 {
        return Err(Error::Digest {
            what: "run payload".into(),
            expected: header.payload_sha256,
            found,
        });
    }
    Ok(ScoredRun {
        header: header.run,
        queries: decode_payload(payload)?,
    })
}

pub fn persist_run(run: &ScoredRun, path: &Path) -> Result<()> {
    let bytes = encode_run(run)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a run file and checks its payload digest.
pub fn load_run(path: &Path) -> Result<ScoredRun> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_run(&bytes)
}

/// Checks that the input files recorded in the run are unchanged.
pub fn verify_inputs(run: &ScoredRun) -> Result<()> {
    for (role, input) in &run.header.inputs {
        let found = file_digest(&input.path)?;
        if found != input.sha256 {
            return Err(Error::Digest {
                what: format!("{role} ({})", input.path.display()),
                expected: input.sha256.clone(),
                found,
            });
        }
    }
    Ok(())
}

/// Like [`load_run`], but also verifies the recorded input digests.
pub fn load_run_verified(path: &Path) -> Result<ScoredRun> {
    let run = load_run(path)?;
    verify_inputs(&run)?;
    Ok(run)
}

/// Loads the corpus a run was produced from.
pub fn load_run_corpus(run: &ScoredRun) -> Result<Corpus> {
    let manifest = CorpusManifest::load(&run.header.config.corpus)?;
    load_corpus(&manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_run() -> ScoredRun {
        ScoredRun {
            header: RunHeader {
                engine_version: ENGINE_VERSION.into(),
                config: RunConfig {
                    model: "m".into(),
                    corpus: "c.json".into(),
                    paradigm: Paradigm::Mock,
                    depth: Some(2),
                    force_depth: false,
                    query_store: None,
                    passage_store: None,
                    tokenizer: None,
                    index: None,
                    bm25: None,
                    mock: Some(MockParams {
                        dim: 4,
                        language_weight: 0.5,
                        seed: 1,
                    }),
                },
                corpus: "c".into(),
                depth: 2,
                inputs: BTreeMap::new(),
            },
            queries: vec![QueryRun {
                query_id: "q1".into(),
                ranking: vec![
                    Scored {
                        passage_id: "b".into(),
                        score: 0.75,
                    },
                    Scored {
                        passage_id: "a".into(),
                        score: -0.0,
                    },
                ],
                group_scores: vec![Scored {
                    passage_id: "a".into(),
                    score: -0.0,
                }],
            }],
        }
    }

    #[test]
    fn run_round_trip() {
        let run = sample_run();
        let bytes = encode_run(&run).unwrap();
        let back = decode_run(&bytes).unwrap();
        assert_eq!(back, run);
        assert_eq!(
            back.queries[0].group_scores[0].score.to_bits(),
            (-0.0f64).to_bits()
        );
    }

    #[test]
    fn truncated_or_corrupted_files_fail() {
        let bytes = encode_run(&sample_run()).unwrap();
        for cut in [0, 5, 11, 40, bytes.len() - 1] {
            assert!(decode_run(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0x01;
        assert!(matches!(decode_run(&flipped), Err(Error::Digest { .. })));
    }
}
