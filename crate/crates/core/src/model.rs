//! Shared domain types: passages, queries, content groups and the
//! language-aware relevance grade.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized language identifier.
///
/// Tags are lowercased, trimmed, and `-` is folded to `_`, so `eng-Latn`
/// and `eng_latn` compare equal. No other folding happens: `zh_simpl` and
/// `zh_trad` stay distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn new(raw: &str) -> Result<Self> {
        let code = Self::normalize(raw);
        if code.is_empty() {
            return Err(Error::InvalidArgument("empty language tag".into()));
        }
        Ok(LanguageTag(code))
    }

    pub fn normalize(raw: &str) -> String {
        raw.trim().to_lowercase().replace('-', "_")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageTag {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        LanguageTag::new(&value)
    }
}

impl From<LanguageTag> for String {
    fn from(tag: LanguageTag) -> String {
        tag.0
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub lang: LanguageTag,
    pub group_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub lang: LanguageTag,
    pub group_id: String,
    pub text: String,
}

/// Semantically equivalent passages across languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentGroup {
    pub group_id: String,
    pub members: BTreeMap<LanguageTag, String>,
}

impl ContentGroup {
    /// Number of relevant passages for any query targeting this group.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, lang: &LanguageTag) -> Option<&str> {
        self.members.get(lang).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Full,
    Partial,
}

/// Language-aware relevance: 3 for the query-language member of the target
/// group, 2 for its translations, 0 for everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelevanceGrade {
    Irrelevant,
    CrossLingual,
    Exact,
}

impl RelevanceGrade {
    pub fn value(self) -> u8 {
        match self {
            RelevanceGrade::Irrelevant => 0,
            RelevanceGrade::CrossLingual => 2,
            RelevanceGrade::Exact => 3,
        }
    }

    /// Exponential DCG gain `2^grade - 1`.
    pub fn gain(self) -> f64 {
        match self {
            RelevanceGrade::Irrelevant => 0.0,
            RelevanceGrade::CrossLingual => 3.0,
            RelevanceGrade::Exact => 7.0,
        }
    }

    pub fn is_relevant(self) -> bool {
        self != RelevanceGrade::Irrelevant
    }
}

pub fn grade(query: &Query, passage: &Passage) -> RelevanceGrade {
    match (query.group_id == passage.group_id, query.lang == passage.lang) {
        (true, true) => RelevanceGrade::Exact,
        (true, false) => RelevanceGrade::CrossLingual,
        (false, _) => RelevanceGrade::Irrelevant,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicatePassageId,
    DuplicateQueryId,
    DuplicateGroupLanguage,
    UnknownQueryGroup,
    MissingQueryLanguagePassage,
    ParallelismMismatch,
    DepthBelowMaxGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub id: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}: {}", self.kind, self.id, self.detail)
    }
}

/// A loaded corpus. Passages and queries are kept sorted by id; ties in
/// retrieval are broken by passage position, which is therefore ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    name: String,
    parallelism: Parallelism,
    passages: Vec<Passage>,
    queries: Vec<Query>,
    groups: BTreeMap<String, ContentGroup>,
    passage_index: HashMap<String, usize>,
    query_index: HashMap<String, usize>,
    languages: BTreeSet<LanguageTag>,
    max_group_size: usize,
}

impl Corpus {
    /// Builds a corpus from raw records. Never fails: broken data is kept and
    /// surfaced by [`validate_corpus`].
    pub fn new(
        name: impl Into<String>,
        parallelism: Parallelism,
        mut passages: Vec<Passage>,
        mut queries: Vec<Query>,
    ) -> Self {
        // Full-record sort keeps duplicates in a canonical order.
        passages.sort_by(|a, b| {
            (&a.id, &a.lang, &a.group_id, &a.text).cmp(&(&b.id, &b.lang, &b.group_id, &b.text))
        });
        queries.sort_by(|a, b| {
            (&a.id, &a.lang, &a.group_id, &a.text).cmp(&(&b.id, &b.lang, &b.group_id, &b.text))
        });

        let mut passage_index = HashMap::with_capacity(passages.len());
        let mut groups: BTreeMap<String, ContentGroup> = BTreeMap::new();
        let mut languages = BTreeSet::new();
        for (i, p) in passages.iter().enumerate() {
            passage_index.entry(p.id.clone()).or_insert(i);
            languages.insert(p.lang.clone());
            let group = groups
                .entry(p.group_id.clone())
                .or_insert_with(|| ContentGroup {
                    group_id: p.group_id.clone(),
                    members: BTreeMap::new(),
                });
            group
                .members
                .entry(p.lang.clone())
                .or_insert_with(|| p.id.clone());
        }
        let mut query_index = HashMap::with_capacity(queries.len());
        for (i, q) in queries.iter().enumerate() {
            query_index.entry(q.id.clone()).or_insert(i);
        }
        let max_group_size = groups.values().map(ContentGroup::len).max().unwrap_or(0);

        Corpus {
            name: name.into(),
            parallelism,
            passages,
            queries,
            groups,
            passage_index,
            query_index,
            languages,
            max_group_size,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Declared parallelism.
    pub fn parallelism(&self) -> Parallelism {
        self.parallelism
    }

    /// Parallelism implied by the data: full iff every group spans every
    /// passage language.
    pub fn observed_parallelism(&self) -> Parallelism {
        let n = self.languages.len();
        if self.groups.values().all(|g| g.len() == n) {
            Parallelism::Full
        } else {
            Parallelism::Partial
        }
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn groups(&self) -> &BTreeMap<String, ContentGroup> {
        &self.groups
    }

    pub fn group(&self, group_id: &str) -> Option<&ContentGroup> {
        self.groups.get(group_id)
    }

    /// Languages carried by passages.
    pub fn languages(&self) -> &BTreeSet<LanguageTag> {
        &self.languages
    }

    /// Languages of passages and queries together.
    pub fn all_languages(&self) -> BTreeSet<LanguageTag> {
        let mut langs = self.languages.clone();
        langs.extend(self.queries.iter().map(|q| q.lang.clone()));
        langs
    }

    pub fn max_group_size(&self) -> usize {
        self.max_group_size
    }

    pub fn passage_position(&self, id: &str) -> Option<usize> {
        self.passage_index.get(id).copied()
    }

    pub fn passage(&self, id: &str) -> Option<&Passage> {
        self.passage_position(id).map(|i| &self.passages[i])
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.query_index.get(id).map(|&i| &self.queries[i])
    }
}

pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();

    for pair in corpus.passages.windows(2) {
        if pair[0].id == pair[1].id {
            out.push(Violation {
                kind: ViolationKind::DuplicatePassageId,
                id: pair[1].id.clone(),
                detail: "passage id appears more than once".into(),
            });
        }
    }
    for pair in corpus.queries.windows(2) {
        if pair[0].id == pair[1].id {
            out.push(Violation {
                kind: ViolationKind::DuplicateQueryId,
                id: pair[1].id.clone(),
                detail: "query id appears more than once".into(),
            });
        }
    }

    let mut seen: HashMap<(&str, &LanguageTag), &str> = HashMap::new();
    for p in &corpus.passages {
        if let Some(first) = seen.insert((&p.group_id, &p.lang), &p.id) {
            if first != p.id {
                out.push(Violation {
                    kind: ViolationKind::DuplicateGroupLanguage,
                    id: p.id.clone(),
                    detail: format!(
                        "group {:?} already has a {} passage ({first:?})",
                        p.group_id, p.lang
                    ),
                });
            }
        }
    }

    for q in &corpus.queries {
        match corpus.groups.get(&q.group_id) {
            None => out.push(Violation {
                kind: ViolationKind::UnknownQueryGroup,
                id: q.id.clone(),
                detail: format!("group {:?} does not exist", q.group_id),
            }),
            Some(group) if group.member(&q.lang).is_none() => out.push(Violation {
                kind: ViolationKind::MissingQueryLanguagePassage,
                id: q.id.clone(),
                detail: format!("group {:?} has no {} passage", q.group_id, q.lang),
            }),
            Some(_) => {}
        }
    }

    let observed = corpus.observed_parallelism();
    if observed != corpus.parallelism {
        out.push(Violation {
            kind: ViolationKind::ParallelismMismatch,
            id: corpus.name.clone(),
            detail: format!(
                "declared {:?} but groups are {:?}",
                corpus.parallelism, observed
            ),
        });
    }

    out.sort();
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tag(s: &str) -> LanguageTag {
        LanguageTag::new(s).unwrap()
    }

    pub(crate) fn passage(id: &str, lang: &str, group: &str, text: &str) -> Passage {
        Passage {
            id: id.into(),
            lang: tag(lang),
            group_id: group.into(),
            text: text.into(),
        }
    }

    pub(crate) fn query(id: &str, lang: &str, group: &str, text: &str) -> Query {
        Query {
            id: id.into(),
            lang: tag(lang),
            group_id: group.into(),
            text: text.into(),
        }
    }

    /// Fully parallel corpus with `groups` groups over `langs`, one query per
    /// (group, language).
    pub(crate) fn parallel_corpus(groups: usize, langs: &[&str]) -> Corpus {
        let mut passages = Vec::new();
        let mut queries = Vec::new();
        for g in 0..groups {
            for l in langs {
                passages.push(passage(&format!("p{g}-{l}"), l, &format!("g{g}"), ""));
                queries.push(query(&format!("q{g}-{l}"), l, &format!("g{g}"), ""));
            }
        }
        Corpus::new("synthetic", Parallelism::Full, passages, queries)
    }

    #[test]
    fn grades_follow_group_and_language() {
        let q = query("q", "en", "g1", "");
        assert_eq!(grade(&q, &passage("a", "en", "g1", "")).value(), 3);
        assert_eq!(grade(&q, &passage("b", "de", "g1", "")).value(), 2);
        assert_eq!(grade(&q, &passage("c", "en", "g2", "")).value(), 0);
        assert_eq!(grade(&q, &passage("d", "de", "g2", "")).value(), 0);
        assert_eq!(RelevanceGrade::Exact.gain(), 7.0);
        assert_eq!(RelevanceGrade::CrossLingual.gain(), 3.0);
    }

    #[test]
    fn tag_normalization_is_idempotent() {
        for raw in ["EN", " eng-Latn ", "zh_simpl", "zh_TRAD"] {
            let once = LanguageTag::normalize(raw);
            assert_eq!(LanguageTag::normalize(&once), once);
        }
        assert_eq!(tag("eng-Latn"), tag("ENG_latn"));
        assert_ne!(tag("zh_simpl"), tag("zh_trad"));
        assert!(LanguageTag::new("  ").is_err());
    }

    #[test]
    fn duplicate_group_language_is_reported() {
        let corpus = Corpus::new(
            "dup",
            Parallelism::Full,
            vec![passage("a", "en", "g1", ""), passage("b", "en", "g1", "")],
            vec![],
        );
        let v = validate_corpus(&corpus);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::DuplicateGroupLanguage);
        assert_eq!(v[0].id, "b");
    }

    #[test]
    fn query_without_same_language_passage_is_reported() {
        let corpus = Corpus::new(
            "missing",
            Parallelism::Full,
            vec![passage("a", "en", "g1", "")],
            vec![query("q", "de", "g1", "")],
        );
        let v = validate_corpus(&corpus);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::MissingQueryLanguagePassage);
        assert_eq!(v[0].id, "q");
    }

    #[test]
    fn unknown_group_and_duplicate_ids() {
        let corpus = Corpus::new(
            "broken",
            Parallelism::Full,
            vec![passage("a", "en", "g1", ""), passage("a", "de", "g1", "")],
            vec![query("q", "en", "g9", ""), query("q", "en", "g1", "")],
        );
        let kinds: Vec<_> = validate_corpus(&corpus).iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ViolationKind::DuplicatePassageId,
                ViolationKind::DuplicateQueryId,
                ViolationKind::UnknownQueryGroup
            ]
        );
    }

    #[test]
    fn xquad_shaped_corpus_is_clean() {
        let langs = [
            "ar", "de", "el", "en", "es", "hi", "ro", "ru", "th", "tr", "vi", "zh",
        ];
        let mut passages = Vec::new();
        let mut queries = Vec::new();
        for g in 0..240 {
            for l in langs {
                passages.push(passage(&format!("p{g}-{l}"), l, &format!("g{g}"), ""));
            }
        }
        // 14,280 = 1,190 question sets x 12 languages; questions spread over
        // the 240 contexts.
        for qi in 0..1190 {
            for l in langs {
                queries.push(query(&format!("q{qi}-{l}"), l, &format!("g{}", qi % 240), ""));
            }
        }
        let corpus = Corpus::new("xquad", Parallelism::Full, passages, queries);
        assert!(validate_corpus(&corpus).is_empty());
        assert_eq!(corpus.passages().len(), 2880);
        assert_eq!(corpus.groups().len(), 240);
        assert_eq!(corpus.queries().len(), 14_280);
        assert_eq!(corpus.max_group_size(), 12);
        assert_eq!(corpus.languages().len(), 12);
    }

    #[test]
    fn partial_groups_are_legal_when_declared() {
        let corpus = Corpus::new(
            "mlqa",
            Parallelism::Partial,
            vec![
                passage("a", "en", "g1", ""),
                passage("b", "de", "g1", ""),
                passage("c", "en", "g2", ""),
            ],
            vec![query("q", "en", "g2", "")],
        );
        assert!(validate_corpus(&corpus).is_empty());
        assert_eq!(corpus.max_group_size(), 2);

        let declared_full = Corpus::new(
            "mlqa",
            Parallelism::Full,
            corpus.passages().to_vec(),
            corpus.queries().to_vec(),
        );
        let v = validate_corpus(&declared_full);
        assert_eq!(v[0].kind, ViolationKind::ParallelismMismatch);
    }
}
