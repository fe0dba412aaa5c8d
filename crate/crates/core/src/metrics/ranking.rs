//! Rank-based metrics: DCG variants and recall.

use crate::error::{Error, Result};
use crate::model::{grade, ContentGroup, Passage, Query, RelevanceGrade};

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Metric("k must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `sum_{i=1..k} gain_i / log2(i + 1)` over the first `k` gains.
pub fn dcg(gains: impl IntoIterator<Item = f64>, k: usize) -> f64 {
    gains
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// DCG under the language-aware grades (gains 7 / 3 / 0).
pub fn dcg_lang(grades: &[RelevanceGrade], k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(dcg(grades.iter().map(|g| g.gain()), k))
}

fn in_group(passage: &Passage, group: &ContentGroup) -> bool {
    passage.group_id == group.group_id
}

/// Lang-nDCG@k. The ideal list is the query-language member followed by the
/// remaining group members, truncated at `k`.
pub fn lang_ndcg(ranking: &[&Passage], query: &Query, group: &ContentGroup, k: usize) -> Result<f64> {
    check_k(k)?;
    if group.member(&query.lang).is_none() {
        return Err(Error::Metric(format!(
            "group {:?} has no passage in the language of query {:?}",
            group.group_id, query.id
        )));
    }
    let ideal = std::iter::once(RelevanceGrade::Exact.gain()).chain(
        std::iter::repeat_n(RelevanceGrade::CrossLingual.gain(), group.len() - 1),
    );
    let idcg = dcg(ideal, k);
    if idcg <= 0.0 {
        return Err(Error::Metric(format!("zero ideal DCG for query {:?}", query.id)));
    }
    let actual = dcg(ranking.iter().map(|p| grade(query, p).gain()), k);
    Ok(actual / idcg)
}

/// nDCG@k with binary relevance (group membership, gain 1).
pub fn base_ndcg(ranking: &[&Passage], group: &ContentGroup, k: usize) -> Result<f64> {
    check_k(k)?;
    if group.is_empty() {
        return Err(Error::Metric(format!("group {:?} is empty", group.group_id)));
    }
    let idcg = dcg(std::iter::repeat_n(1.0, group.len()), k);
    let actual = dcg(
        ranking
            .iter()
            .map(|p| if in_group(p, group) { 1.0 } else { 0.0 }),
        k,
    );
    Ok(actual / idcg)
}

/// Fraction of the group retrieved within the top `k`.
pub fn recall_at_k(ranking: &[&Passage], group: &ContentGroup, k: usize) -> Result<f64> {
    check_k(k)?;
    if group.is_empty() {
        return Err(Error::Metric(format!("group {:?} is empty", group.group_id)));
    }
    let hits = ranking.iter().take(k).filter(|p| in_group(p, group)).count();
    Ok(hits as f64 / group.len() as f64)
}

/// 1 if the query-language member of the group is within the top `k`.
pub fn lang_recall_at_k(
    ranking: &[&Passage],
    query: &Query,
    group: &ContentGroup,
    k: usize,
) -> Result<f64> {
    check_k(k)?;
    let found = ranking
        .iter()
        .take(k)
        .any(|p| in_group(p, group) && p.lang == query.lang);
    Ok(if found { 1.0 } else { 0.0 })
}
