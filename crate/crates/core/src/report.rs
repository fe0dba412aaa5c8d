//! Report bundles and their JSON, CSV and TREC renderings.
//!
//! Every number written here goes through [`fixed5`], so re-emitting the
//! same bundle produces identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{fixed5, ser_f64};
use crate::ingest::LanguageClassification;
use crate::metrics::{correlate, evaluate, macro_average, Correlation, MetricReport};
use crate::runner::{load_run_corpus, verify_inputs, ScoredRun};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub dataset: String,
    pub models: usize,
    /// Absent when fewer than three models cover the dataset.
    pub correlation: Option<Correlation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub model: String,
    #[serde(serialize_with = "ser_f64")]
    pub ndcg: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lpr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportBundle {
    /// One report per (model, dataset), sorted by model then dataset.
    pub reports: Vec<MetricReport>,
    /// One macro-averaged report per model, sorted by model.
    #[serde(rename = "macro")]
    pub macro_reports: Vec<MetricReport>,
    /// nDCG against LPR across models, per dataset.
    pub correlations: Vec<CorrelationRow>,
}

impl ReportBundle {
    pub fn from_reports(mut reports: Vec<MetricReport>) -> Result<Self> {
        reports.sort_by(|a, b| (&a.model, &a.dataset).cmp(&(&b.model, &b.dataset)));
        if let Some(w) = reports
            .windows(2)
            .find(|w| w[0].model == w[1].model && w[0].dataset == w[1].dataset)
        {
            return Err(Error::InvalidArgument(format!(
                "more than one run for model {:?} on dataset {:?}",
                w[0].model, w[0].dataset
            )));
        }

        let mut by_model: BTreeMap<&str, Vec<MetricReport>> = BTreeMap::new();
        let mut by_dataset: BTreeMap<&str, Vec<&MetricReport>> = BTreeMap::new();
        for r in &reports {
            by_model.entry(&r.model).or_default().push(r.clone());
            by_dataset.entry(&r.dataset).or_default().push(r);
        }
        let macro_reports = by_model
            .values()
            .map(|rs| macro_average(rs))
            .collect::<Result<Vec<_>>>()?;
        let correlations = by_dataset
            .into_iter()
            .map(|(dataset, rs)| {
                let ndcg: Vec<f64> = rs.iter().map(|r| r.ndcg).collect();
                let lpr: Vec<f64> = rs.iter().map(|r| r.lpr).collect();
                let correlation = if rs.len() >= 3 {
                    Some(correlate(&ndcg, &lpr)?)
                } else {
                    None
                };
                Ok(CorrelationRow {
                    dataset: dataset.to_string(),
                    models: rs.len(),
                    correlation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReportBundle {
            reports,
            macro_reports,
            correlations,
        })
    }
}

/// Evaluates one run against its corpus at the run's own depth.
pub fn evaluate_run(run: &ScoredRun, classification: Option<&LanguageClassification>) -> Result<MetricReport> {
    let corpus = load_run_corpus(run)?;
    evaluate(
        &run.queries,
        &corpus,
        run.header.depth,
        &run.header.config.model,
        classification,
    )
}

/// Evaluates every run (after checking its input digests) and bundles the
/// results.
pub fn build_bundle(runs: &[ScoredRun], classification: Option<&LanguageClassification>) -> Result<ReportBundle> {
    let reports = runs
        .iter()
        .map(|run| {
            verify_inputs(run)?;
            evaluate_run(run, classification)
        })
        .collect::<Result<Vec<_>>>()?;
    ReportBundle::from_reports(reports)
}

/// Plot-ready (model, macro nDCG, macro LPR) rows, sorted by model.
pub fn scatter_table(bundle: &ReportBundle) -> Vec<ScatterRow> {
    let mut rows: Vec<ScatterRow> = bundle
        .macro_reports
        .iter()
        .map(|r| ScatterRow {
            model: r.model.clone(),
            ndcg: r.ndcg,
            lpr: r.lpr,
        })
        .collect();
    rows.sort_by(|a, b| a.model.cmp(&b.model));
    rows
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// File stem for a (model, dataset, k) artifact, e.g. `bm25__xquad__k20`.
pub fn artifact_stem(model: &str, dataset: &str, k: Option<usize>) -> String {
    let k = k.map_or_else(|| "macro".to_string(), |k| format!("k{k}"));
    format!("{}__{}__{}", sanitize(model), sanitize(dataset), k)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct BundleDocument<'a> {
    #[serde(flatten)]
    bundle: &'a ReportBundle,
    scatter: Vec<ScatterRow>,
}

pub fn bundle_json(bundle: &ReportBundle) -> Result<String> {
    let doc = BundleDocument {
        bundle,
        scatter: scatter_table(bundle),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|source| Error::Json {
        context: "report bundle".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn report_json(report: &MetricReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        context: "metric report".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn emit_json(bundle: &ReportBundle, path: &Path) -> Result<()> {
    write_bytes(path, bundle_json(bundle)?.as_bytes())
}

/// Named CSV tables with fixed headers, in emission order.
pub fn csv_tables(bundle: &ReportBundle) -> Result<Vec<(&'static str, String)>> {
    let k_cell = |k: Option<usize>| k.map(|k| k.to_string()).unwrap_or_default();
    let all = || bundle.reports.iter().chain(&bundle.macro_reports);

    let main = table(
        &["model", "dataset", "k", "queries", "ndcg", "lang_ndcg", "lpr", "recall", "lang_recall", "tie_rate"],
        bundle.reports.iter().map(|r| summary_row(r, k_cell(r.k))),
    )?;
    let macro_table = table(
        &["model", "datasets", "queries", "ndcg", "lang_ndcg", "lpr", "recall", "lang_recall", "tie_rate"],
        bundle.macro_reports.iter().map(|r| {
            let datasets = bundle.reports.iter().filter(|x| x.model == r.model).count();
            let mut row = summary_row(r, String::new());
            row.remove(2);
            row[1] = datasets.to_string();
            row
        }),
    )?;
    let decomposition = table(
        &["model", "dataset", "perfect", "lang_fail", "sem_fail", "both_fail"],
        all().map(|r| {
            let d = &r.decomposition;
            vec![
                r.model.clone(),
                r.dataset.clone(),
                fixed5(d.perfect),
                fixed5(d.lang_fail),
                fixed5(d.sem_fail),
                fixed5(d.both_fail),
            ]
        }),
    )?;
    let by_language = table(
        &["model", "dataset", "lang", "lpr"],
        all().flat_map(|r| {
            r.lpr_by_language
                .iter()
                .map(|(l, v)| vec![r.model.clone(), r.dataset.clone(), l.clone(), fixed5(*v)])
        }),
    )?;
    let by_tier = table(
        &["model", "dataset", "tier", "lpr"],
        all().flat_map(|r| {
            r.lpr_by_tier
                .iter()
                .flatten()
                .map(|(t, v)| vec![r.model.clone(), r.dataset.clone(), t.clone(), fixed5(*v)])
        }),
    )?;
    let transitions = table(
        &["model", "dataset", "query_group", "preferred_group", "share", "support"],
        bundle.reports.iter().flat_map(|r| {
            r.transition.iter().flat_map(move |t| {
                t.cells.iter().flat_map(move |(from, row)| {
                    row.iter().map(move |(to, v)| {
                        vec![
                            r.model.clone(),
                            r.dataset.clone(),
                            from.clone(),
                            to.clone(),
                            fixed5(*v),
                            t.support[from].to_string(),
                        ]
                    })
                })
            })
        }),
    )?;
    let correlations = table(
        &["dataset", "models", "status", "pearson", "spearman"],
        bundle.correlations.iter().map(|c| {
            let (status, p, s) = match c.correlation {
                Some(Correlation::Defined { pearson, spearman }) => ("defined", fixed5(pearson), fixed5(spearman)),
                Some(Correlation::Undefined) => ("undefined", String::new(), String::new()),
                None => ("insufficient", String::new(), String::new()),
            };
            vec![c.dataset.clone(), c.models.to_string(), status.to_string(), p, s]
        }),
    )?;
    let scatter = table(
        &["model", "ndcg", "lpr"],
        scatter_table(bundle)
            .into_iter()
            .map(|r| vec![r.model, fixed5(r.ndcg), fixed5(r.lpr)]),
    )?;

    Ok(vec![
        ("main", main),
        ("macro", macro_table),
        ("decomposition", decomposition),
        ("lpr_by_language", by_language),
        ("lpr_by_tier", by_tier),
        ("transitions", transitions),
        ("correlations", correlations),
        ("scatter", scatter),
    ])
}

fn summary_row(r: &MetricReport, k: String) -> Vec<String> {
    vec![
        r.model.clone(),
        r.dataset.clone(),
        k,
        r.queries.to_string(),
        fixed5(r.ndcg),
        fixed5(r.lang_ndcg),
        fixed5(r.lpr),
        fixed5(r.recall),
        fixed5(r.lang_recall),
        fixed5(r.tie_rate),
    ]
}

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let csv_err = |e: csv::Error| Error::format("csv", e.to_string());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
}

/// Writes one CSV per table into `dir`; returns the paths written.
pub fn emit_csv(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    csv_tables(bundle)?
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(format!("{name}.csv"));
            write_bytes(&path, text.as_bytes())?;
            Ok(path)
        })
        .collect()
}

/// `query_id Q0 passage_id rank score run_tag`, one line per ranked passage,
/// in the run's own order.
pub fn trec_lines(run: &ScoredRun, tag: &str) -> String {
    let tag = if tag.is_empty() { "run" } else { tag };
    let tag: String = tag.split_whitespace().collect::<Vec<_>>().join("_");
    let mut out = String::new();
    for q in &run.queries {
        for (rank, s) in q.ranking.iter().enumerate() {
            out.push_str(&format!(
                "{} Q0 {} {} {} {}\n",
                q.query_id,
                s.passage_id,
                rank + 1,
                fixed5(s.score),
                tag
            ));
        }
    }
    out
}

pub fn emit_trec_run(run: &ScoredRun, path: &Path) -> Result<()> {
    write_bytes(path, trec_lines(run, &run.header.config.model).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Decomposition;

    fn report(model: &str, dataset: &str, ndcg: f64, lpr: f64) -> MetricReport {
        MetricReport {
            model: model.into(),
            dataset: dataset.into(),
            k: Some(20),
            queries: 4,
            ndcg,
            lang_ndcg: ndcg,
            lpr,
            recall: ndcg,
            lang_recall: lpr,
            tie_rate: 0.0,
            decomposition: Decomposition {
                perfect: 0.5,
                lang_fail: 0.25,
                sem_fail: 0.25,
                both_fail: 0.0,
            },
            lpr_by_language: BTreeMap::from([("en".to_string(), lpr)]),
            lpr_by_tier: None,
            transition: None,
        }
    }

    #[test]
    fn empty_bundle_is_valid_json() {
        let bundle = ReportBundle::from_reports(vec![]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&bundle_json(&bundle).unwrap()).unwrap();
        for key in ["reports", "macro", "correlations", "scatter"] {
            assert_eq!(v[key], serde_json::json!([]), "{key}");
        }
        for (_, text) in csv_tables(&bundle).unwrap() {
            assert_eq!(text.lines().count(), 1);
        }
    }

    #[test]
    fn scatter_is_macro_projection_sorted_by_model() {
        let bundle = ReportBundle::from_reports(vec![
            report("zeta", "a", 0.5, 0.25),
            report("alpha", "a", 0.75, 0.5),
            report("alpha", "b", 0.25, 1.0),
        ])
        .unwrap();
        let rows = scatter_table(&bundle);
        assert_eq!(rows.iter().map(|r| r.model.as_str()).collect::<Vec<_>>(), ["alpha", "zeta"]);
        for row in &rows {
            let m = bundle.macro_reports.iter().find(|r| r.model == row.model).unwrap();
            assert_eq!(row.ndcg.to_bits(), m.ndcg.to_bits());
            assert_eq!(row.lpr.to_bits(), m.lpr.to_bits());
        }
        assert_eq!(rows[0].ndcg, 0.5);
    }

    #[test]
    fn correlation_needs_three_models() {
        let two = ReportBundle::from_reports(vec![report("a", "d", 0.1, 0.2), report("b", "d", 0.3, 0.4)]).unwrap();
        assert_eq!(two.correlations[0].correlation, None);
        let three = ReportBundle::from_reports(vec![
            report("a", "d", 0.1, 0.2),
            report("b", "d", 0.3, 0.4),
            report("c", "d", 0.5, 0.6),
        ])
        .unwrap();
        assert!(matches!(three.correlations[0].correlation, Some(Correlation::Defined { .. })));
        assert!(ReportBundle::from_reports(vec![report("a", "d", 0.1, 0.2), report("a", "d", 0.1, 0.2)]).is_err());
    }

    #[test]
    fn reemission_is_byte_identical() {
        let build = || {
            ReportBundle::from_reports(vec![report("b", "x", 1.0 / 3.0, 0.125), report("a", "x", 0.2, 0.7)]).unwrap()
        };
        assert_eq!(bundle_json(&build()).unwrap(), bundle_json(&build()).unwrap());
        assert_eq!(csv_tables(&build()).unwrap(), csv_tables(&build()).unwrap());
        assert!(bundle_json(&build()).unwrap().contains("0.33333"));
    }

    #[test]
    fn stems_are_filesystem_safe() {
        assert_eq!(artifact_stem("org/model v2", "xquad", Some(20)), "org_model_v2__xquad__k20");
        assert_eq!(artifact_stem("m", "d", None), "m__d__macro");
    }
}
