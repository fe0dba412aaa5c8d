//! Standard and language-aware metrics computed from scored runs.
//!
//! Metrics only see rankings and scores ([`QueryRun`]); which paradigm
//! produced them is irrelevant here.

pub mod language;
pub mod ranking;
pub mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

pub use language::{
    decompose_top1, lpr, lpr_by_query_language, lpr_by_tier, lpr_outcome, top1_class,
    transition_matrix, Decomposition, LprOutcome, Top1Class, TransitionMatrix,
};
pub use ranking::{base_ndcg, dcg, dcg_lang, lang_ndcg, lang_recall_at_k, recall_at_k};
pub use stats::{correlate, mean, pairwise_sum, Correlation};

use crate::error::{Error, Result};
use crate::format::{ser_f64, ser_map_f64, ser_opt_map_f64};
use crate::ingest::LanguageClassification;
use crate::model::{Corpus, LanguageTag, Passage};
use crate::retrieval::Scored;

/// Retrieval output for one query: the ranked list and the scores of every
/// member of the query's target group.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRun {
    pub query_id: String,
    pub ranking: Vec<Scored>,
    /// Sorted by passage id.
    pub group_scores: Vec<Scored>,
}

/// Everything the aggregate metrics need from one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub query_id: String,
    pub query_lang: LanguageTag,
    pub top1: Top1Class,
    pub lpr_hit: bool,
    pub tie: bool,
    /// Language of the preferred group member (see [`LprOutcome::preferred`]).
    pub preferred_lang: LanguageTag,
    pub ndcg: f64,
    pub lang_ndcg: f64,
    pub recall: f64,
    pub lang_recall: f64,
}

pub fn evaluate_query(run: &QueryRun, corpus: &Corpus, k: usize) -> Result<QueryOutcome> {
    let query = corpus.query(&run.query_id).ok_or_else(|| Error::MissingId {
        kind: "query",
        id: run.query_id.clone(),
    })?;
    let group = corpus.group(&query.group_id).ok_or_else(|| {
        Error::Metric(format!(
            "query {:?} targets unknown group {:?}",
            query.id, query.group_id
        ))
    })?;
    let ranking: Vec<&Passage> = run
        .ranking
        .iter()
        .map(|s| {
            corpus.passage(&s.passage_id).ok_or_else(|| Error::MissingId {
                kind: "passage",
                id: s.passage_id.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let top1 = top1_class(query, &ranking)?;
    let pref = lpr_outcome(query, group, &run.group_scores)?;
    let preferred_lang = language::passage_lang(corpus, &pref.preferred)?.clone();

    Ok(QueryOutcome {
        query_id: query.id.clone(),
        query_lang: query.lang.clone(),
        top1,
        lpr_hit: pref.hit,
        tie: pref.tie,
        preferred_lang,
        ndcg: base_ndcg(&ranking, group, k)?,
        lang_ndcg: lang_ndcg(&ranking, query, group, k)?,
        recall: recall_at_k(&ranking, group, k)?,
        lang_recall: lang_recall_at_k(&ranking, query, group, k)?,
    })
}

/// Per-query outcomes, in the order of `runs`.
pub fn evaluate_outcomes(runs: &[QueryRun], corpus: &Corpus, k: usize) -> Result<Vec<QueryOutcome>> {
    runs.par_iter()
        .map(|r| evaluate_query(r, corpus, k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub model: String,
    pub dataset: String,
    /// Evaluation depth; absent for macro averages.
    pub k: Option<usize>,
    pub queries: usize,
    #[serde(serialize_with = "ser_f64")]
    pub ndcg: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lang_ndcg: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lpr: f64,
    #[serde(serialize_with = "ser_f64")]
    pub recall: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lang_recall: f64,
    #[serde(serialize_with = "ser_f64")]
    pub tie_rate: f64,
    pub decomposition: Decomposition,
    #[serde(serialize_with = "ser_map_f64")]
    pub lpr_by_language: BTreeMap<String, f64>,
    #[serde(
        serialize_with = "ser_opt_map_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub lpr_by_tier: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionMatrix>,
}

/// Aggregates per-query outcomes. Tier and transition breakdowns are added
/// when a classification is supplied.
pub fn summarize(
    outcomes: &[QueryOutcome],
    model: &str,
    dataset: &str,
    k: usize,
    classification: Option<&LanguageClassification>,
) -> Result<MetricReport> {
    let column = |f: fn(&QueryOutcome) -> f64| {
        let v: Vec<f64> = outcomes.iter().map(f).collect();
        mean(&v)
    };
    let classes: Vec<Top1Class> = outcomes.iter().map(|o| o.top1).collect();
    let (lpr_by_tier, transition) = match classification {
        Some(c) => (
            Some(lpr_by_tier(outcomes, c)?),
            Some(transition_matrix(outcomes, c)?),
        ),
        None => (None, None),
    };
    Ok(MetricReport {
        model: model.to_string(),
        dataset: dataset.to_string(),
        k: Some(k),
        queries: outcomes.len(),
        ndcg: column(|o| o.ndcg),
        lang_ndcg: column(|o| o.lang_ndcg),
        lpr: lpr(outcomes),
        recall: column(|o| o.recall),
        lang_recall: column(|o| o.lang_recall),
        tie_rate: column(|o| if o.tie { 1.0 } else { 0.0 }),
        decomposition: decompose_top1(&classes)?,
        lpr_by_language: lpr_by_query_language(outcomes)
            .into_iter()
            .map(|(l, v)| (l.to_string(), v))
            .collect(),
        lpr_by_tier,
        transition,
    })
}

pub fn evaluate(
    runs: &[QueryRun],
    corpus: &Corpus,
    k: usize,
    model: &str,
    classification: Option<&LanguageClassification>,
) -> Result<MetricReport> {
    let outcomes = evaluate_outcomes(runs, corpus, k)?;
    summarize(&outcomes, model, corpus.name(), k, classification)
}

fn average_maps(maps: &[&BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in maps {
        for (k, &v) in m.iter() {
            per.entry(k.clone()).or_default().push(v);
        }
    }
    per.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

/// Unweighted mean over datasets. Per-language and per-tier values are
/// averaged over the datasets that report them; transition matrices are
/// dropped.
pub fn macro_average(reports: &[MetricReport]) -> Result<MetricReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Metric("macro average over zero reports".into()))?;
    let column = |f: fn(&MetricReport) -> f64| {
        let v: Vec<f64> = reports.iter().map(f).collect();
        mean(&v)
    };
    let decomposition = Decomposition {
        perfect: column(|r| r.decomposition.perfect),
        lang_fail: column(|r| r.decomposition.lang_fail),
        sem_fail: column(|r| r.decomposition.sem_fail),
        both_fail: column(|r| r.decomposition.both_fail),
    };
    if (decomposition.total() - 1.0).abs() > 1e-9 {
        return Err(Error::Metric(format!(
            "averaged decomposition sums to {}",
            decomposition.total()
        )));
    }
    let model = if reports.iter().all(|r| r.model == first.model) {
        first.model.clone()
    } else {
        "macro".to_string()
    };
    let tiers: Vec<&BTreeMap<String, f64>> =
        reports.iter().filter_map(|r| r.lpr_by_tier.as_ref()).collect();
    let langs: Vec<&BTreeMap<String, f64>> = reports.iter().map(|r| &r.lpr_by_language).collect();
    Ok(MetricReport {
        model,
        dataset: "macro".to_string(),
        k: None,
        queries: reports.iter().map(|r| r.queries).sum(),
        ndcg: column(|r| r.ndcg),
        lang_ndcg: column(|r| r.lang_ndcg),
        lpr: column(|r| r.lpr),
        recall: column(|r| r.recall),
        lang_recall: column(|r| r.lang_recall),
        tie_rate: column(|r| r.tie_rate),
        decomposition,
        lpr_by_language: average_maps(&langs),
        lpr_by_tier: (!tiers.is_empty()).then(|| average_maps(&tiers)),
        transition: None,
    })
}
