//! Corpus and language-classification loaders.
//!
//! Corpora arrive as two JSON-lines files (passages and queries), each line
//! an object with `id`, `lang`, `group_id` and `text`. Unknown fields are
//! ignored. A small JSON manifest names the files and the declared
//! parallelism.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Corpus, LanguageTag, Parallelism, Passage, Query, Violation, ViolationKind,
};

/// Depth used when neither the manifest nor the run config sets one.
pub fn default_depth_for(max_group_size: usize) -> usize {
    if max_group_size <= 12 {
        20
    } else {
        200
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub passages: PathBuf,
    pub queries: PathBuf,
    pub parallelism: Parallelism,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_depth: Option<usize>,
}

impl CorpusManifest {
    /// Reads a manifest and resolves its file paths against the manifest's
    /// own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: CorpusManifest =
            serde_json::from_slice(&bytes).map_err(|source| Error::Json {
                context: path.display().to_string(),
                source,
            })?;
        if manifest.default_depth == Some(0) {
            return Err(Error::InvalidArgument(
                "manifest default_depth must be positive".into(),
            ));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        manifest.passages = base.join(&manifest.passages);
        manifest.queries = base.join(&manifest.queries);
        Ok(manifest)
    }

    pub fn depth(&self, corpus: &Corpus) -> usize {
        self.default_depth
            .unwrap_or_else(|| default_depth_for(corpus.max_group_size()))
    }

    /// Manifest-level checks that need the loaded corpus.
    pub fn check(&self, corpus: &Corpus) -> Vec<Violation> {
        let depth = self.depth(corpus);
        if depth < corpus.max_group_size() {
            vec![Violation {
                kind: ViolationKind::DepthBelowMaxGroup,
                id: self.name.clone(),
                detail: format!(
                    "default depth {depth} is below max group size {}",
                    corpus.max_group_size()
                ),
            }]
        } else {
            Vec::new()
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    lang: Option<String>,
    group_id: Option<String>,
    text: Option<String>,
}

struct Record {
    id: String,
    lang: LanguageTag,
    group_id: String,
    text: String,
}

fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let required = |value: Option<String>, field: &str| match value {
            Some(v) if !v.trim().is_empty() => Ok(v),
            Some(_) => Err(parse_err(format!("field `{field}` is empty"))),
            None => Err(parse_err(format!("missing field `{field}`"))),
        };
        let id = required(raw.id, "id")?;
        let lang = LanguageTag::new(&required(raw.lang, "lang")?)
            .map_err(|_| parse_err("field `lang` is empty".into()))?;
        let group_id = required(raw.group_id, "group_id")?;
        let text = raw
            .text
            .ok_or_else(|| parse_err("missing field `text`".into()))?;
        out.push(Record {
            id,
            lang,
            group_id,
            text,
        });
    }
    Ok(out)
}

pub fn read_passages(path: &Path) -> Result<Vec<Passage>> {
    Ok(read_records(path)?
        .into_iter()
        .map(|r| Passage {
            id: r.id,
            lang: r.lang,
            group_id: r.group_id,
            text: r.text,
        })
        .collect())
}

pub fn read_queries(path: &Path) -> Result<Vec<Query>> {
    Ok(read_records(path)?
        .into_iter()
        .map(|r| Query {
            id: r.id,
            lang: r.lang,
            group_id: r.group_id,
            text: r.text,
        })
        .collect())
}

pub fn load_corpus(manifest: &CorpusManifest) -> Result<Corpus> {
    let passages = read_passages(&manifest.passages)?;
    let queries = read_queries(&manifest.queries)?;
    Ok(Corpus::new(
        manifest.name.clone(),
        manifest.parallelism,
        passages,
        queries,
    ))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the corpus back out in the canonical JSON-lines layout.
pub fn write_corpus(corpus: &Corpus, passages_path: &Path, queries_path: &Path) -> Result<()> {
    write_jsonl(passages_path, corpus.passages())?;
    write_jsonl(queries_path, corpus.queries())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceTier {
    Low,
    Mid,
    High,
}

impl ResourceTier {
    pub fn as_str(self) -> &'static str {
        match self {
            ResourceTier::Low => "low",
            ResourceTier::Mid => "mid",
            ResourceTier::High => "high",
        }
    }
}

/// Per-language resource tier and macro language group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LanguageClassification {
    pub resource_tier: BTreeMap<LanguageTag, ResourceTier>,
    pub macro_group: BTreeMap<LanguageTag, String>,
}

#[derive(Deserialize)]
struct ClassificationLine {
    lang: String,
    tier: ResourceTier,
    macro_group: String,
}

impl LanguageClassification {
    /// Languages in `langs` that have no macro group.
    pub fn missing_macro_groups<'a>(
        &self,
        langs: impl IntoIterator<Item = &'a LanguageTag>,
    ) -> Vec<LanguageTag> {
        langs
            .into_iter()
            .filter(|l| !self.macro_group.contains_key(*l))
            .cloned()
            .collect()
    }

    pub fn missing_tiers<'a>(
        &self,
        langs: impl IntoIterator<Item = &'a LanguageTag>,
    ) -> Vec<LanguageTag> {
        langs
            .into_iter()
            .filter(|l| !self.resource_tier.contains_key(*l))
            .cloned()
            .collect()
    }
}

pub fn load_language_classification(path: &Path) -> Result<LanguageClassification> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = LanguageClassification::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let entry: ClassificationLine =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let lang = LanguageTag::new(&entry.lang).map_err(|e| parse_err(e.to_string()))?;
        if entry.macro_group.trim().is_empty() {
            return Err(parse_err("field `macro_group` is empty".into()));
        }
        if out.resource_tier.contains_key(&lang) {
            return Err(Error::DuplicateTag(lang.to_string()));
        }
        out.resource_tier.insert(lang.clone(), entry.tier);
        out.macro_group.insert(lang, entry.macro_group);
    }
    Ok(out)
}
