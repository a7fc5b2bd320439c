//! Corpus evaluation: precision, recall, accuracy and Top-N recall of the
//! activated concept lists against gold concepts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::ConceptId;
use crate::pipeline::{Engine, EngineError};

/// Category used for cases that carry none.
pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("top-N cutoffs must be at least 1")]
    InvalidCutoff,
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("corpus {path}: {message}")]
    Io { path: String, message: String },
    #[error("no scorable cases (all {0} skipped)")]
    NoScorableCases(usize),
    #[error("case {case_id}: {message}")]
    Predict { case_id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusCase {
    pub case_id: String,
    pub question: String,
    pub gold_concepts: BTreeSet<ConceptId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl CorpusCase {
    pub fn category(&self) -> &str {
        self.category.as_deref().unwrap_or(UNCATEGORIZED)
    }
}

/// One JSON object per line; blank and `#` lines are skipped.
pub fn parse_corpus(source: &str) -> Result<Vec<CorpusCase>, EvalError> {
    let mut cases = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::Corpus { line: i + 1, message };
        let case: CorpusCase = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if case.gold_concepts.is_empty() {
            return Err(err(format!("case {} has no gold concepts", case.case_id)));
        }
        if !seen.insert(case.case_id.clone()) {
            return Err(err(format!("duplicate case id {}", case.case_id)));
        }
        cases.push(case);
    }
    Ok(cases)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusCase>, EvalError> {
    let source = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_corpus(&source)
}

/// Anything that ranks concepts for a question.
pub trait Predictor: Sync {
    type Error: std::fmt::Display;

    /// Canonical id for a gold concept, or `None` when unknown.
    fn resolve(&self, id: &ConceptId) -> Option<ConceptId>;

    fn predict(&self, case: &CorpusCase) -> Result<Vec<ConceptId>, Self::Error>;
}

impl Predictor for Engine {
    type Error = EngineError;

    fn resolve(&self, id: &ConceptId) -> Option<ConceptId> {
        self.graph().lookup_by_code(id).map(|c| c.primary_id.clone())
    }

    /// Each case runs in its own fresh session.
    fn predict(&self, case: &CorpusCase) -> Result<Vec<ConceptId>, EngineError> {
        let mut session = self.new_session();
        let result = self.activate(&case.question, case.language.as_deref().unwrap_or("en"), &mut session)?;
        Ok(result.concepts())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Pool per-case counts, then divide.
    #[default]
    Micro,
    /// Average per-case ratios.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CasePrediction {
    pub case_id: String,
    pub category: String,
    pub gold: BTreeSet<ConceptId>,
    /// Ranked.
    pub predicted: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub case_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub top_n_recall: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub averaging: Averaging,
    pub overall: Metrics,
    pub per_category: BTreeMap<String, Metrics>,
    /// Cases dropped because a gold concept is not in the graph.
    pub skipped_cases: Vec<String>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn metrics(cases: &[&CasePrediction], ns: &[usize], averaging: Averaging) -> Metrics {
    let n = cases.len() as f64;
    let (mut hits, mut predicted, mut gold) = (0usize, 0usize, 0usize);
    let (mut precision_sum, mut recall_sum) = (0.0, 0.0);
    let mut top1 = 0usize;
    let mut top_n = vec![0usize; ns.len()];
    for case in cases {
        let distinct: BTreeSet<&ConceptId> = case.predicted.iter().collect();
        let h = distinct.iter().filter(|c| case.gold.contains(c)).count();
        hits += h;
        predicted += distinct.len();
        gold += case.gold.len();
        precision_sum += ratio(h as f64, distinct.len() as f64);
        recall_sum += ratio(h as f64, case.gold.len() as f64);
        if case.predicted.first().is_some_and(|c| case.gold.contains(c)) {
            top1 += 1;
        }
        for (slot, &cut) in top_n.iter_mut().zip(ns) {
            if case.predicted.iter().take(cut).any(|c| case.gold.contains(c)) {
                *slot += 1;
            }
        }
    }
    let (precision, recall) = match averaging {
        Averaging::Micro => (ratio(hits as f64, predicted as f64), ratio(hits as f64, gold as f64)),
        Averaging::Macro => (ratio(precision_sum, n), ratio(recall_sum, n)),
    };
    Metrics {
        case_count: cases.len(),
        precision,
        recall,
        accuracy: ratio(top1 as f64, n),
        top_n_recall: ns.iter().zip(top_n).map(|(&cut, c)| (cut, ratio(c as f64, n))).collect(),
    }
}

fn check_cutoffs(ns: &[usize]) -> Result<Vec<usize>, EvalError> {
    if ns.contains(&0) {
        return Err(EvalError::InvalidCutoff);
    }
    Ok(ns.iter().copied().collect::<BTreeSet<_>>().into_iter().collect())
}

/// Scores ranked predictions against gold sets.
pub fn score_predictions(
    predictions: &[CasePrediction],
    ns: &[usize],
    averaging: Averaging,
) -> Result<MetricsReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let ns = check_cutoffs(ns)?;
    let all: Vec<&CasePrediction> = predictions.iter().collect();
    let mut groups: BTreeMap<&str, Vec<&CasePrediction>> = BTreeMap::new();
    for p in predictions {
        groups.entry(p.category.as_str()).or_default().push(p);
    }
    Ok(MetricsReport {
        averaging,
        overall: metrics(&all, &ns, averaging),
        per_category: groups
            .into_iter()
            .map(|(cat, cases)| (cat.to_string(), metrics(&cases, &ns, averaging)))
            .collect(),
        skipped_cases: Vec::new(),
    })
}

/// Runs `predictor` over the corpus (cases in parallel) and scores it.
pub fn evaluate<P: Predictor>(
    corpus: &[CorpusCase],
    predictor: &P,
    ns: &[usize],
    averaging: Averaging,
) -> Result<MetricsReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    check_cutoffs(ns)?;
    let mut skipped = Vec::new();
    let mut scorable = Vec::new();
    for case in corpus {
        let resolved: Option<BTreeSet<ConceptId>> = case.gold_concepts.iter().map(|g| predictor.resolve(g)).collect();
        match resolved {
            Some(gold) => scorable.push((case, gold)),
            None => {
                log::warn!("case {}: gold concept not in graph, skipped", case.case_id);
                skipped.push(case.case_id.clone());
            }
        }
    }
    if scorable.is_empty() {
        return Err(EvalError::NoScorableCases(skipped.len()));
    }
    let predictions: Vec<CasePrediction> = scorable
        .par_iter()
        .map(|(case, gold)| {
            let predicted = predictor.predict(case).map_err(|e| EvalError::Predict {
                case_id: case.case_id.clone(),
                message: e.to_string(),
            })?;
            Ok(CasePrediction {
                case_id: case.case_id.clone(),
                category: case.category().to_string(),
                gold: gold.clone(),
                predicted,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    let mut report = score_predictions(&predictions, ns, averaging)?;
    report.skipped_cases = skipped;
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Table,
    Machine,
}

pub fn report_render(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Table => render_table(report),
    }
}

fn render_table(report: &MetricsReport) -> String {
    let ns: Vec<usize> = report.overall.top_n_recall.keys().copied().collect();
    let mut rows: Vec<(String, &Metrics)> = vec![("overall".to_string(), &report.overall)];
    rows.extend(report.per_category.iter().map(|(c, m)| (format!("  {c}"), m)));
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);

    let mut out = String::new();
    let _ = write!(out, "{:<width$}  {:>5}  {:>9}  {:>9}  {:>9}", "scope", "cases", "precision", "recall", "accuracy");
    for n in &ns {
        let _ = write!(out, "  {:>7}", format!("top-{n}"));
    }
    out.push('\n');
    for (label, m) in rows {
        let _ = write!(
            out,
            "{label:<width$}  {:>5}  {:>9.4}  {:>9.4}  {:>9.4}",
            m.case_count, m.precision, m.recall, m.accuracy
        );
        for n in &ns {
            let _ = write!(out, "  {:>7.4}", m.top_n_recall[n]);
        }
        out.push('\n');
    }
    let avg = match report.averaging {
        Averaging::Micro => "micro",
        Averaging::Macro => "macro",
    };
    let _ = writeln!(out, "averaging: {avg}");
    if !report.skipped_cases.is_empty() {
        let _ = writeln!(out, "skipped: {}", report.skipped_cases.join(", "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ConceptId {
        s.parse().unwrap()
    }

    fn pred(case: &str, cat: &str, gold: &[&str], predicted: &[&str]) -> CasePrediction {
        CasePrediction {
            case_id: case.into(),
            category: cat.into(),
            gold: gold.iter().map(|g| id(g)).collect(),
            predicted: predicted.iter().map(|p| id(p)).collect(),
        }
    }

    #[test]
    fn perfect_prediction() {
        let p = vec![
            pred("a", UNCATEGORIZED, &["ORPHA:1"], &["ORPHA:1"]),
            pred("b", UNCATEGORIZED, &["ORPHA:2"], &["ORPHA:2"]),
        ];
        let r = score_predictions(&p, &[1], Averaging::Micro).unwrap();
        let m = &r.overall;
        assert_eq!((m.precision, m.recall, m.accuracy, m.top_n_recall[&1]), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn unrelated_predictions_score_zero() {
        let p = vec![pred("a", "x", &["ORPHA:1"], &["ORPHA:7", "ORPHA:8"])];
        let r = score_predictions(&p, &[3], Averaging::Micro).unwrap();
        assert_eq!((r.overall.accuracy, r.overall.recall, r.overall.precision), (0.0, 0.0, 0.0));
    }

    #[test]
    fn micro_and_macro_differ() {
        // case a: 1 hit of 1 predicted; case b: 1 hit of 4 predicted
        let p = vec![
            pred("a", "x", &["ORPHA:1"], &["ORPHA:1"]),
            pred("b", "x", &["ORPHA:2"], &["ORPHA:5", "ORPHA:2", "ORPHA:6", "ORPHA:7"]),
        ];
        let micro = score_predictions(&p, &[], Averaging::Micro).unwrap();
        let macro_ = score_predictions(&p, &[], Averaging::Macro).unwrap();
        assert_eq!(micro.overall.precision, 2.0 / 5.0);
        assert_eq!(macro_.overall.precision, (1.0 + 0.25) / 2.0);
        assert_eq!(micro.overall.accuracy, 0.5);
    }

    #[test]
    fn categories_partition_cases() {
        let p = vec![
            pred("a", "ultra-rare", &["ORPHA:1"], &["ORPHA:1"]),
            pred("b", UNCATEGORIZED, &["ORPHA:2"], &[]),
            pred("c", "ultra-rare", &["ORPHA:3"], &["ORPHA:9", "ORPHA:3"]),
        ];
        let r = score_predictions(&p, &[1, 2], Averaging::Micro).unwrap();
        let total: usize = r.per_category.values().map(|m| m.case_count).sum();
        assert_eq!(total, r.overall.case_count);
        assert_eq!(r.per_category["ultra-rare"].top_n_recall[&2], 1.0);
        assert_eq!(r.per_category["ultra-rare"].accuracy, 0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(score_predictions(&[], &[1], Averaging::Micro), Err(EvalError::EmptyCorpus)));
        let p = vec![pred("a", "x", &["ORPHA:1"], &[])];
        assert!(matches!(score_predictions(&p, &[0], Averaging::Micro), Err(EvalError::InvalidCutoff)));
    }

    #[test]
    fn render_forms() {
        let p = vec![pred("a", "rare", &["ORPHA:1"], &["ORPHA:1"])];
        let r = score_predictions(&p, &[], Averaging::Micro).unwrap();
        let table = report_render(&r, ReportFormat::Table);
        assert_eq!(table.lines().filter(|l| l.contains("1.0000")).count(), 2);
        assert!(!table.contains("top-"));
        assert_eq!(report_render(&r, ReportFormat::Machine), report_render(&r.clone(), ReportFormat::Machine));
    }

    #[test]
    fn corpus_parsing() {
        let src = "{\"case_id\":\"c1\",\"question\":\"q\",\"gold_concepts\":[\"ORPHA:1\"]}\n";
        assert_eq!(parse_corpus(src).unwrap()[0].category(), UNCATEGORIZED);
        let empty_gold = "{\"case_id\":\"c1\",\"question\":\"q\",\"gold_concepts\":[]}";
        assert!(matches!(parse_corpus(empty_gold), Err(EvalError::Corpus { line: 1, .. })));
        let dup = format!("{src}{src}");
        assert!(matches!(parse_corpus(&dup), Err(EvalError::Corpus { line: 2, .. })));
    }
}
