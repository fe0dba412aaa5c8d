//! Language-preference diagnostics: LPR, top-1 decomposition, per-language
//! breakdowns and macro-group transition matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::stats::mean;
use super::QueryOutcome;
use crate::error::{Error, Result};
use crate::format::{ser_f64, ser_nested_f64};
use crate::ingest::LanguageClassification;
use crate::model::{ContentGroup, Corpus, LanguageTag, Passage, Query};
use crate::retrieval::Scored;

/// Result of the within-group preference check for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct LprOutcome {
    /// The query-language member strictly outscores every other member.
    pub hit: bool,
    /// The query-language member shares the top score with another member.
    pub tie: bool,
    /// The query-language member on a hit; otherwise the best-scoring other
    /// member (ascending id among equals).
    pub preferred: String,
}

/// Within-group preference for one query. `group_scores` must hold a score
/// for every member of the query's target group.
pub fn lpr_outcome(query: &Query, group: &ContentGroup, group_scores: &[Scored]) -> Result<LprOutcome> {
    let target = group.member(&query.lang).ok_or_else(|| {
        Error::Metric(format!(
            "group {:?} has no passage in the language of query {:?}",
            group.group_id, query.id
        ))
    })?;
    let lookup: HashMap<&str, f64> = group_scores
        .iter()
        .map(|s| (s.passage_id.as_str(), s.score))
        .collect();
    let score_of = |id: &str| {
        lookup.get(id).copied().ok_or_else(|| {
            Error::Metric(format!(
                "no group score for passage {id:?} (query {:?})",
                query.id
            ))
        })
    };

    let target_score = score_of(target)?;
    // Best competitor: highest score, ascending id among equals. Members are
    // visited in language order, so compare ids explicitly.
    let mut best: Option<(&str, f64)> = None;
    for id in group.members.values() {
        if id == target {
            continue;
        }
        let s = score_of(id)?;
        best = match best {
            Some((bid, bs)) if bs > s || (bs == s && bid < id.as_str()) => Some((bid, bs)),
            _ => Some((id.as_str(), s)),
        };
    }

    Ok(match best {
        None => LprOutcome {
            hit: true,
            tie: false,
            preferred: target.to_string(),
        },
        Some((_, s)) if target_score > s => LprOutcome {
            hit: true,
            tie: false,
            preferred: target.to_string(),
        },
        Some((id, s)) => LprOutcome {
            hit: false,
            tie: target_score == s,
            preferred: id.to_string(),
        },
    })
}

/// Mean of the per-query hit flags.
pub fn lpr(outcomes: &[QueryOutcome]) -> f64 {
    let hits: Vec<f64> = outcomes.iter().map(|o| indicator(o.lpr_hit)).collect();
    mean(&hits)
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Top1Class {
    Perfect,
    LangFail,
    SemFail,
    BothFail,
}

pub fn top1_class(query: &Query, ranking: &[&Passage]) -> Result<Top1Class> {
    let first = ranking
        .first()
        .ok_or_else(|| Error::Metric(format!("empty ranking for query {:?}", query.id)))?;
    Ok(
        match (first.group_id == query.group_id, first.lang == query.lang) {
            (true, true) => Top1Class::Perfect,
            (true, false) => Top1Class::LangFail,
            (false, true) => Top1Class::SemFail,
            (false, false) => Top1Class::BothFail,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    #[serde(serialize_with = "ser_f64")]
    pub perfect: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lang_fail: f64,
    #[serde(serialize_with = "ser_f64")]
    pub sem_fail: f64,
    #[serde(serialize_with = "ser_f64")]
    pub both_fail: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.perfect + self.lang_fail + self.sem_fail + self.both_fail
    }
}

pub fn decompose_top1(classes: &[Top1Class]) -> Result<Decomposition> {
    if classes.is_empty() {
        return Err(Error::Metric("top-1 decomposition over zero queries".into()));
    }
    let share = |c: Top1Class| {
        let flags: Vec<f64> = classes.iter().map(|&x| indicator(x == c)).collect();
        mean(&flags)
    };
    Ok(Decomposition {
        perfect: share(Top1Class::Perfect),
        lang_fail: share(Top1Class::LangFail),
        sem_fail: share(Top1Class::SemFail),
        both_fail: share(Top1Class::BothFail),
    })
}

/// Mean hit rate per query language. Languages without queries are absent.
pub fn lpr_by_query_language(outcomes: &[QueryOutcome]) -> BTreeMap<LanguageTag, f64> {
    let mut per: BTreeMap<LanguageTag, Vec<f64>> = BTreeMap::new();
    for o in outcomes {
        per.entry(o.query_lang.clone())
            .or_default()
            .push(indicator(o.lpr_hit));
    }
    per.into_iter().map(|(l, v)| (l, mean(&v))).collect()
}

/// Mean hit rate per resource tier of the query language.
pub fn lpr_by_tier(
    outcomes: &[QueryOutcome],
    classification: &LanguageClassification,
) -> Result<BTreeMap<String, f64>> {
    let langs: BTreeSet<&LanguageTag> = outcomes.iter().map(|o| &o.query_lang).collect();
    let missing = classification.missing_tiers(langs);
    if !missing.is_empty() {
        return Err(Error::MissingClassification {
            what: "resource tier",
            langs: missing.iter().map(ToString::to_string).collect(),
        });
    }
    let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for o in outcomes {
        let tier = classification.resource_tier[&o.query_lang];
        per.entry(tier.as_str().to_string())
            .or_default()
            .push(indicator(o.lpr_hit));
    }
    Ok(per.into_iter().map(|(t, v)| (t, mean(&v))).collect())
}

/// Where LPR failures land, by macro language group. `cells[query_group]`
/// is a distribution over document groups; groups with no failures are
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix {
    pub labels: Vec<String>,
    #[serde(serialize_with = "ser_nested_f64")]
    pub cells: BTreeMap<String, BTreeMap<String, f64>>,
    pub support: BTreeMap<String, usize>,
}

pub fn transition_matrix(
    outcomes: &[QueryOutcome],
    classification: &LanguageClassification,
) -> Result<TransitionMatrix> {
    let observed: BTreeSet<&LanguageTag> = outcomes
        .iter()
        .flat_map(|o| [&o.query_lang, &o.preferred_lang])
        .collect();
    let missing = classification.missing_macro_groups(observed);
    if !missing.is_empty() {
        return Err(Error::MissingClassification {
            what: "macro group",
            langs: missing.iter().map(ToString::to_string).collect(),
        });
    }

    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| !o.lpr_hit) {
        let from = &classification.macro_group[&o.query_lang];
        let to = &classification.macro_group[&o.preferred_lang];
        *counts
            .entry(from.clone())
            .or_default()
            .entry(to.clone())
            .or_default() += 1;
    }

    let mut cells = BTreeMap::new();
    let mut support = BTreeMap::new();
    for (from, row) in counts {
        let total: usize = row.values().sum();
        cells.insert(
            from.clone(),
            row.into_iter()
                .map(|(to, c)| (to, c as f64 / total as f64))
                .collect(),
        );
        support.insert(from, total);
    }
    let labels: BTreeSet<String> = classification.macro_group.values().cloned().collect();
    Ok(TransitionMatrix {
        labels: labels.into_iter().collect(),
        cells,
        support,
    })
}

/// Language of a passage referenced by a run.
pub(crate) fn passage_lang<'a>(corpus: &'a Corpus, id: &str) -> Result<&'a LanguageTag> {
    corpus
        .passage(id)
        .map(|p| &p.lang)
        .ok_or_else(|| Error::MissingId {
            kind: "passage",
            id: id.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ResourceTier;
    use crate::model::tests::{query, tag};

    fn group(members: &[(&str, &str)]) -> ContentGroup {
        ContentGroup {
            group_id: "g".into(),
            members: members
                .iter()
                .map(|(l, p)| (tag(l), p.to_string()))
                .collect(),
        }
    }

    fn scores(list: &[(&str, f64)]) -> Vec<Scored> {
        list.iter()
            .map(|(id, s)| Scored {
                passage_id: id.to_string(),
                score: *s,
            })
            .collect()
    }

    #[test]
    fn unique_argmax_decides() {
        let g = group(&[("en", "pe"), ("de", "pd")]);
        let s = scores(&[("pe", 0.9), ("pd", 0.8)]);
        let en = lpr_outcome(&query("q", "en", "g", ""), &g, &s).unwrap();
        assert!(en.hit && !en.tie);
        let de = lpr_outcome(&query("q", "de", "g", ""), &g, &s).unwrap();
        assert!(!de.hit && !de.tie);
        assert_eq!(de.preferred, "pe");
    }

    #[test]
    fn singleton_group_always_hits() {
        let g = group(&[("en", "pe")]);
        let o = lpr_outcome(&query("q", "en", "g", ""), &g, &scores(&[("pe", -5.0)])).unwrap();
        assert!(o.hit);
    }

    #[test]
    fn ties_are_misses_with_flag() {
        let g = group(&[("en", "pe"), ("de", "pd"), ("fr", "pf")]);
        let s = scores(&[("pe", 0.5), ("pd", 0.5), ("pf", 0.5)]);
        let o = lpr_outcome(&query("q", "en", "g", ""), &g, &s).unwrap();
        assert!(!o.hit && o.tie);
        assert_eq!(o.preferred, "pd");
    }

    #[test]
    fn missing_group_score_is_an_error() {
        let g = group(&[("en", "pe"), ("de", "pd")]);
        assert!(lpr_outcome(&query("q", "en", "g", ""), &g, &scores(&[("pe", 1.0)])).is_err());
    }

    fn outcome(lang: &str, hit: bool, preferred: &str) -> QueryOutcome {
        QueryOutcome {
            query_id: format!("q-{lang}"),
            query_lang: tag(lang),
            top1: Top1Class::Perfect,
            lpr_hit: hit,
            tie: false,
            preferred_lang: tag(preferred),
            ndcg: 1.0,
            lang_ndcg: 1.0,
            recall: 1.0,
            lang_recall: 1.0,
        }
    }

    fn classification(entries: &[(&str, &str)]) -> LanguageClassification {
        let mut c = LanguageClassification::default();
        for (l, g) in entries {
            c.resource_tier.insert(tag(l), ResourceTier::High);
            c.macro_group.insert(tag(l), g.to_string());
        }
        c
    }

    #[test]
    fn per_language_lpr() {
        let outcomes = vec![
            outcome("en", true, "en"),
            outcome("en", true, "en"),
            outcome("de", false, "en"),
        ];
        let by = lpr_by_query_language(&outcomes);
        assert_eq!(by[&tag("en")], 1.0);
        assert_eq!(by[&tag("de")], 0.0);
        assert!((lpr(&outcomes) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn transition_columns() {
        let c = classification(&[
            ("de", "Germanic"),
            ("nl", "Germanic"),
            ("ru", "Slavic"),
            ("pl", "Slavic"),
        ]);
        let outcomes = vec![
            outcome("de", false, "ru"),
            outcome("nl", false, "pl"),
            outcome("ru", false, "pl"),
            outcome("pl", true, "pl"),
        ];
        let m = transition_matrix(&outcomes, &c).unwrap();
        assert_eq!(m.cells["Germanic"]["Slavic"], 1.0);
        assert_eq!(m.support["Germanic"], 2);
        // same macro group, different language
        assert_eq!(m.cells["Slavic"]["Slavic"], 1.0);
        assert_eq!(m.support["Slavic"], 1);

        let only_hits = vec![outcome("pl", true, "pl")];
        let m = transition_matrix(&only_hits, &c).unwrap();
        assert!(m.cells.is_empty() && m.support.is_empty());

        let missing = transition_matrix(&[outcome("th", false, "de")], &c);
        assert!(matches!(missing, Err(Error::MissingClassification { .. })));
    }

    #[test]
    fn decomposition_partitions() {
        use Top1Class::*;
        let d = decompose_top1(&[Perfect, LangFail, LangFail, BothFail]).unwrap();
        assert_eq!(d.lang_fail, 0.5);
        assert_eq!(d.sem_fail, 0.0);
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!(decompose_top1(&[]).is_err());
    }
}
