//! Synthetic corpora and brute-force reference metrics shared by the
//! integration tests. Nothing here calls library metric code.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use lingeval::ingest::{LanguageClassification, ResourceTier};
use lingeval::metrics::QueryRun;
use lingeval::model::{Corpus, LanguageTag, Parallelism, Passage, Query};
use lingeval::retrieval::Scored;
use rand::seq::SliceRandom;
use rand::Rng;

pub const LANGS: [&str; 6] = ["ar", "de", "en", "fr", "th", "zh"];

pub fn tag(s: &str) -> LanguageTag {
    LanguageTag::new(s).unwrap()
}

pub fn passage(id: &str, lang: &str, group: &str, text: &str) -> Passage {
    Passage {
        id: id.into(),
        lang: tag(lang),
        group_id: group.into(),
        text: text.into(),
    }
}

pub fn query(id: &str, lang: &str, group: &str, text: &str) -> Query {
    Query {
        id: id.into(),
        lang: tag(lang),
        group_id: group.into(),
        text: text.into(),
    }
}

/// Random corpus with at most `max_groups` groups over at most `max_langs`
/// languages. Groups hold a random non-empty language subset; every group
/// gets at least one query.
pub fn synth_corpus(rng: &mut impl Rng, max_groups: usize, max_langs: usize) -> Corpus {
    let n_langs = rng.random_range(1..=max_langs.min(LANGS.len()));
    let mut pool: Vec<&str> = LANGS.to_vec();
    pool.shuffle(rng);
    let langs = &pool[..n_langs];
    let n_groups = rng.random_range(1..=max_groups);
    let full = rng.random_bool(0.5);

    let mut passages = Vec::new();
    let mut queries = Vec::new();
    for g in 0..n_groups {
        let gid = format!("g{g:03}");
        let mut members: Vec<&str> = langs
            .iter()
            .copied()
            .filter(|_| full || rng.random_bool(0.7))
            .collect();
        if members.is_empty() {
            members.push(langs[rng.random_range(0..langs.len())]);
        }
        for l in &members {
            passages.push(passage(&format!("p{g:03}_{l}"), l, &gid, ""));
        }
        let mut any = false;
        for l in &members {
            if rng.random_bool(0.6) {
                queries.push(query(&format!("q{g:03}_{l}"), l, &gid, ""));
                any = true;
            }
        }
        if !any {
            let l = members[0];
            queries.push(query(&format!("q{g:03}_{l}"), l, &gid, ""));
        }
    }
    let used: std::collections::BTreeSet<&LanguageTag> = passages.iter().map(|p| &p.lang).collect();
    let parallelism = if passages.len() == n_groups * used.len() {
        Parallelism::Full
    } else {
        Parallelism::Partial
    };
    Corpus::new("synth", parallelism, passages, queries)
}

/// Scores for every passage, in corpus order. Tie-prone scores are drawn
/// from a handful of integers.
pub fn random_scores(rng: &mut impl Rng, n: usize, tie_prone: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if tie_prone {
                rng.random_range(0..4) as f64
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect()
}

/// Full sort by score descending, then id ascending.
pub fn full_sort<'a>(ids: &[&'a str], scores: &[f64]) -> Vec<(&'a str, f64)> {
    let mut all: Vec<(&str, f64)> = ids.iter().copied().zip(scores.iter().copied()).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
    all
}

/// Builds a run from per-query score vectors (corpus order) using the
/// reference full sort.
pub fn build_runs(corpus: &Corpus, scores: &HashMap<String, Vec<f64>>, k: usize) -> Vec<QueryRun> {
    let ids: Vec<&str> = corpus.passages().iter().map(|p| p.id.as_str()).collect();
    corpus
        .queries()
        .iter()
        .map(|q| {
            let s = &scores[&q.id];
            let ranking = full_sort(&ids, s)
                .into_iter()
                .take(k)
                .map(|(id, score)| Scored {
                    passage_id: id.to_string(),
                    score,
                })
                .collect();
            let mut group_scores: Vec<Scored> = corpus
                .passages()
                .iter()
                .zip(s)
                .filter(|(p, _)| p.group_id == q.group_id)
                .map(|(p, &score)| Scored {
                    passage_id: p.id.clone(),
                    score,
                })
                .collect();
            group_scores.sort_by(|a, b| a.passage_id.cmp(&b.passage_id));
            QueryRun {
                query_id: q.id.clone(),
                ranking,
                group_scores,
            }
        })
        .collect()
}

pub fn classification(macro_of: impl Fn(&str) -> &'static str) -> LanguageClassification {
    let mut c = LanguageClassification::default();
    for (i, l) in LANGS.iter().enumerate() {
        c.macro_group.insert(tag(l), macro_of(l).to_string());
        let tier = [ResourceTier::Low, ResourceTier::Mid, ResourceTier::High][i % 3];
        c.resource_tier.insert(tag(l), tier);
    }
    c
}

pub fn default_macro(lang: &str) -> &'static str {
    match lang {
        "de" | "en" | "fr" => "european",
        "ar" => "semitic",
        _ => "asian",
    }
}

// ---- reference metrics -------------------------------------------------

pub struct RefOutcome {
    pub ndcg: f64,
    pub lang_ndcg: f64,
    pub recall: f64,
    pub lang_recall: f64,
    pub hit: bool,
    pub tie: bool,
    pub preferred: String,
    /// (in group, same language) of the top-1 passage.
    pub top1: (bool, bool),
}

pub struct RefReport {
    pub ndcg: f64,
    pub lang_ndcg: f64,
    pub recall: f64,
    pub lang_recall: f64,
    pub lpr: f64,
    pub tie_rate: f64,
    /// perfect, lang_fail, sem_fail, both_fail
    pub decomposition: [f64; 4],
    pub lpr_by_language: BTreeMap<String, f64>,
    /// query macro group -> preferred macro group -> share; plus support.
    pub transition: BTreeMap<String, (usize, BTreeMap<String, f64>)>,
}

fn log2_discount(rank: usize) -> f64 {
    // rank is 1-based
    ((rank + 1) as f64).ln() / 2f64.ln()
}

pub fn ref_outcome(corpus: &Corpus, run: &QueryRun, k: usize) -> RefOutcome {
    let q = corpus
        .queries()
        .iter()
        .find(|q| q.id == run.query_id)
        .unwrap();
    let members: Vec<&Passage> = corpus
        .passages()
        .iter()
        .filter(|p| p.group_id == q.group_id)
        .collect();
    let lookup = |id: &str| corpus.passages().iter().find(|p| p.id == id).unwrap();
    let ranked: Vec<&Passage> = run.ranking.iter().take(k).map(|s| lookup(&s.passage_id)).collect();

    let mut dcg = 0.0;
    let mut dcg_lang = 0.0;
    for (i, p) in ranked.iter().enumerate() {
        let rank = i + 1;
        let in_group = p.group_id == q.group_id;
        let rel_lang: u32 = match (in_group, p.lang == q.lang) {
            (true, true) => 3,
            (true, false) => 2,
            _ => 0,
        };
        let rel: u32 = if in_group { 1 } else { 0 };
        dcg += (2f64.powi(rel as i32) - 1.0) / log2_discount(rank);
        dcg_lang += (2f64.powi(rel_lang as i32) - 1.0) / log2_discount(rank);
    }
    let mut idcg = 0.0;
    for rank in 1..=members.len().min(k) {
        idcg += 1.0 / log2_discount(rank);
    }
    let mut idcg_lang = 0.0;
    for rank in 1..=members.len().min(k) {
        let gain = if rank == 1 { 7.0 } else { 3.0 };
        idcg_lang += gain / log2_discount(rank);
    }
    let found = ranked.iter().filter(|p| p.group_id == q.group_id).count();
    let lang_found = ranked
        .iter()
        .any(|p| p.group_id == q.group_id && p.lang == q.lang);

    let score_of = |id: &str| {
        run.group_scores
            .iter()
            .find(|s| s.passage_id == id)
            .unwrap()
            .score
    };
    let target = members.iter().find(|p| p.lang == q.lang).unwrap();
    let t = score_of(&target.id);
    let others: Vec<(&str, f64)> = members
        .iter()
        .filter(|p| p.id != target.id)
        .map(|p| (p.id.as_str(), score_of(&p.id)))
        .collect();
    let hit = others.iter().all(|&(_, s)| t > s);
    let tie = !hit && others.iter().all(|&(_, s)| t >= s);
    let preferred = if hit {
        target.id.clone()
    } else {
        let mut sorted = others.clone();
        sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
        sorted[0].0.to_string()
    };
    let first = lookup(&run.ranking[0].passage_id);

    RefOutcome {
        ndcg: dcg / idcg,
        lang_ndcg: dcg_lang / idcg_lang,
        recall: found as f64 / members.len() as f64,
        lang_recall: if lang_found { 1.0 } else { 0.0 },
        hit,
        tie,
        preferred,
        top1: (first.group_id == q.group_id, first.lang == q.lang),
    }
}

pub fn ref_report(
    corpus: &Corpus,
    runs: &[QueryRun],
    k: usize,
    classification: &LanguageClassification,
) -> RefReport {
    let outcomes: Vec<RefOutcome> = runs.iter().map(|r| ref_outcome(corpus, r, k)).collect();
    let n = outcomes.len() as f64;
    let avg = |f: &dyn Fn(&RefOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;

    let mut decomposition = [0.0; 4];
    for o in &outcomes {
        let slot = match o.top1 {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        decomposition[slot] += 1.0;
    }
    for d in &mut decomposition {
        *d /= n;
    }

    let lang_of_query = |id: &str| corpus.queries().iter().find(|q| q.id == id).unwrap().lang.clone();
    let lang_of_passage = |id: &str| corpus.passages().iter().find(|p| p.id == id).unwrap().lang.clone();

    let mut per_lang: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for (r, o) in runs.iter().zip(&outcomes) {
        let e = per_lang.entry(lang_of_query(&r.query_id).to_string()).or_default();
        e.0 += if o.hit { 1.0 } else { 0.0 };
        e.1 += 1.0;
    }

    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (r, o) in runs.iter().zip(&outcomes) {
        if o.hit {
            continue;
        }
        let from = classification.macro_group[&lang_of_query(&r.query_id)].clone();
        let to = classification.macro_group[&lang_of_passage(&o.preferred)].clone();
        *counts.entry(from).or_default().entry(to).or_default() += 1;
    }
    let transition = counts
        .into_iter()
        .map(|(from, row)| {
            let total: usize = row.values().sum();
            let shares = row
                .into_iter()
                .map(|(to, c)| (to, c as f64 / total as f64))
                .collect();
            (from, (total, shares))
        })
        .collect();

    RefReport {
        ndcg: avg(&|o| o.ndcg),
        lang_ndcg: avg(&|o| o.lang_ndcg),
        recall: avg(&|o| o.recall),
        lang_recall: avg(&|o| o.lang_recall),
        lpr: avg(&|o| if o.hit { 1.0 } else { 0.0 }),
        tie_rate: avg(&|o| if o.tie { 1.0 } else { 0.0 }),
        decomposition,
        lpr_by_language: per_lang.into_iter().map(|(l, (h, c))| (l, h / c)).collect(),
        transition,
    }
}

/// Pearson via the textbook sums formula, Spearman via an O(n^2) rank count.
pub fn ref_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|y| y * y).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

pub fn ref_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn ref_spearman(a: &[f64], b: &[f64]) -> f64 {
    ref_pearson(&ref_ranks(a), &ref_ranks(b))
}
