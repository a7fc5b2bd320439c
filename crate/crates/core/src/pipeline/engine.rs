//! The activation engine: candidate retrieval, matching, score combination,
//! diversity adjustment, adaptive top-k, fallback and context assembly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, EngineConfig};
use super::context::{assemble_context, ContextDocument, EvidenceProvider, FileEvidenceProvider, NullProvider};
use crate::diversity::{DiversityError, DiversityReport, SessionHistory};
use crate::fallback::{FallbackError, FallbackResolver, FallbackResult, PhenotypeLexicon};
use crate::id::ConceptId;
use crate::kg::{Concept, GraphError, KnowledgeGraph};
use crate::matchers::{Lexicon, MatchMethod, MatchScore, Matchers, PhoneticTable, QueryTerm, Segmenter};
use crate::sparsity::{self, adaptive_k, ComplexityBreakdown, OrganSystems};
use crate::text::Stopwords;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Fallback(#[from] FallbackError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryOrigin {
    Matched,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationScoreEntry {
    pub concept: ConceptId,
    pub name: String,
    pub origin: EntryOrigin,
    /// Scores of the enabled matchers, in matcher order.
    pub raw: Vec<MatchScore>,
    pub combined: f64,
    pub adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationResult {
    pub query: QueryTerm,
    pub candidate_count: usize,
    pub k_used: usize,
    pub complexity: ComplexityBreakdown,
    pub entries: Vec<ActivationScoreEntry>,
    pub fallback: Option<FallbackResult>,
    pub diversity: DiversityReport,
    pub context: ContextDocument,
}

impl ActivationResult {
    pub fn concepts(&self) -> Vec<ConceptId> {
        self.entries.iter().map(|e| e.concept.clone()).collect()
    }

    /// Stable machine-readable form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("activation result serializes")
    }

    /// Human-readable trace.
    pub fn render_trace(&self) -> String {
        let mut out = String::new();
        let q = &self.query;
        let _ = writeln!(out, "query: {:?} [{}]", q.raw_text, q.language);
        let _ = writeln!(out, "normalized: {}", q.normalized);
        if !q.extracted_codes.is_empty() {
            let codes: Vec<String> = q.extracted_codes.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "codes: {}", codes.join(", "));
        }
        let c = &self.complexity;
        let _ = writeln!(
            out,
            "complexity: {:.4} (length {:.4}, terms {:.4}, semantic {:.4}, systems {:.4})",
            c.total, c.length_factor, c.term_density, c.semantic_complexity, c.multisystem_factor
        );
        let _ = writeln!(out, "candidates: {}  k: {}", self.candidate_count, self.k_used);
        if let Some(fb) = &self.fallback {
            let _ = writeln!(out, "fallback: {} ({})", fb.level, fb.rationale);
        }
        let id_width = self.entries.iter().map(|e| e.concept.to_string().len()).max().unwrap_or(7).max(7);
        let _ = writeln!(out, "{:>4}  {:<id_width$}  {:>8}  {:>8}  name", "rank", "concept", "combined", "adjusted");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = write!(
                out,
                "{:>4}  {:<id_width$}  {:>8.4}  {:>8.4}  {}",
                i + 1,
                e.concept.to_string(),
                e.combined,
                e.adjusted,
                e.name
            );
            let fired: Vec<String> = e
                .raw
                .iter()
                .filter(|s| s.value > 0.0)
                .map(|s| format!("{} {:.4}", s.method, s.value))
                .collect();
            if !fired.is_empty() {
                let _ = write!(out, "  [{}]", fired.join(", "));
            }
            out.push('\n');
        }
        let overlap: Vec<String> = self.diversity.overlap.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            out,
            "diversity: {:.4} (repeated: {})",
            self.diversity.score,
            if overlap.is_empty() { "none".to_string() } else { overlap.join(", ") }
        );
        if !self.context.sections.is_empty() {
            out.push('\n');
            out.push_str(&self.context.render());
        }
        out
    }
}

/// Intermediate values behind one concept's score for one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub concept: ConceptId,
    pub name: String,
    pub in_candidate_set: bool,
    /// All four matchers, whether enabled or not.
    pub raw: Vec<MatchScore>,
    pub enabled: Vec<MatchMethod>,
    pub combined: f64,
    pub previously_used: bool,
    pub lambda_rd: f64,
    pub adjusted: f64,
    pub activation_threshold: f64,
    pub complexity: ComplexityBreakdown,
    pub concept_count: usize,
    pub alpha: f64,
    /// α · |C| · complexity before rounding and clamping.
    pub k_raw: f64,
    pub k: usize,
}

impl Explanation {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "concept: {} ({})", self.concept, self.name);
        let _ = writeln!(out, "in candidate set: {}", self.in_candidate_set);
        for s in &self.raw {
            let state = if self.enabled.contains(&s.method) { "" } else { " (disabled)" };
            let _ = write!(out, "{:<13} {:.6}{state}", format!("{}:", s.method), s.value);
            if !s.evidence.is_empty() {
                let _ = write!(out, "  {}", s.evidence.join("; "));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "combined:     {:.6}", self.combined);
        let _ = writeln!(
            out,
            "adjusted:     {:.6} (previously used: {}, lambda {:.4})",
            self.adjusted, self.previously_used, self.lambda_rd
        );
        let _ = writeln!(out, "threshold:    {:.4}", self.activation_threshold);
        let c = &self.complexity;
        let _ = writeln!(
            out,
            "complexity:   {:.6} = weighted(length {:.6}, terms {:.6}, semantic {:.6}, systems {:.6})",
            c.total, c.length_factor, c.term_density, c.semantic_complexity, c.multisystem_factor
        );
        let _ = writeln!(
            out,
            "k:            {} (alpha {} x concepts {} x complexity = {:.6})",
            self.k, self.alpha, self.concept_count, self.k_raw
        );
        out
    }
}

/// `max` over enabled methods of method weight × score.
pub fn combine_scores(raw: &[MatchScore], config: &EngineConfig) -> Result<f64, ConfigError> {
    if config.switches.enabled_methods().is_empty() {
        return Err(ConfigError::NoMatcher);
    }
    Ok(raw
        .iter()
        .filter(|s| config.switches.enabled(s.method))
        .map(|s| config.method_weights.get(s.method) * s.value)
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0))
}

/// The first `k` items under `order`, sorted.
pub fn select_top_k<T>(mut items: Vec<T>, k: usize, mut order: impl FnMut(&T, &T) -> Ordering) -> Vec<T> {
    if k == 0 {
        return Vec::new();
    }
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, &mut order);
        items.truncate(k);
    }
    items.sort_by(order);
    items
}

/// Adjusted score descending, then concept id ascending.
pub fn rank_order(a: &ActivationScoreEntry, b: &ActivationScoreEntry) -> Ordering {
    b.adjusted.total_cmp(&a.adjusted).then_with(|| a.concept.cmp(&b.concept))
}

#[derive(Debug)]
pub struct Engine {
    graph: KnowledgeGraph,
    config: EngineConfig,
    matchers: Matchers,
    organ_systems: OrganSystems,
    phenotypes: PhenotypeLexicon,
    stopwords: Stopwords,
    evidence: Box<dyn EvidenceProvider>,
}

fn resource_error(path: &Path, e: impl ToString) -> ConfigError {
    ConfigError::Resource {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl Engine {
    pub fn new(graph: KnowledgeGraph, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        if graph.is_empty() {
            return Err(GraphError::Empty.into());
        }
        let res = &config.resources;
        let stopwords = match &res.stopwords {
            Some(p) => Stopwords::from_file(p).map_err(|e| resource_error(p, e))?,
            None => Stopwords::default(),
        };
        let phenotypes = match &res.phenotype_lexicon {
            Some(p) => PhenotypeLexicon::from_file(p).map_err(|e| resource_error(p, e))?,
            None => PhenotypeLexicon::default(),
        };
        let organ_systems = match &res.organ_systems {
            Some(p) => OrganSystems::from_file(p).map_err(|e| resource_error(p, e))?,
            None => OrganSystems::default(),
        };
        let phonetic = match &res.phonetic_table {
            Some(p) => PhoneticTable::from_file(p).map_err(|e| resource_error(p, e))?,
            None => PhoneticTable::default(),
        };
        let evidence: Box<dyn EvidenceProvider> = match &res.evidence {
            Some(p) => Box::new(FileEvidenceProvider::from_file(p).map_err(|e| resource_error(p, e))?),
            None => Box::new(NullProvider),
        };

        let mut lexicon: Lexicon = graph.normalized_names().collect();
        lexicon.extend(phenotypes.labels());
        if let Some(p) = &res.lexicon {
            let extra = Lexicon::from_file(p).map_err(|e| resource_error(p, e))?;
            lexicon.extend(extra.terms());
        }
        let mut matchers = Matchers::new(Segmenter::new(lexicon, stopwords.clone()));
        matchers.phonetic = phonetic;
        matchers.combine = config.multilingual_weights;

        Ok(Self {
            graph,
            config,
            matchers,
            organ_systems,
            phenotypes,
            stopwords,
            evidence,
        })
    }

    pub fn with_evidence(mut self, provider: Box<dyn EvidenceProvider>) -> Self {
        self.evidence = provider;
        self
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn matchers(&self) -> &Matchers {
        &self.matchers
    }

    /// A fresh session using the configured diversity factor.
    pub fn new_session(&self) -> SessionHistory {
        SessionHistory::new(self.config.lambda_rd).expect("validated lambda")
    }

    pub fn prepare(&self, text: &str, language: &str) -> QueryTerm {
        self.matchers.query(text, language)
    }

    fn fallback_resolver(&self) -> FallbackResolver<'_> {
        FallbackResolver {
            graph: &self.graph,
            phenotypes: &self.phenotypes,
            stopwords: &self.stopwords,
            basic_count: self.config.sparsity.k_min(),
        }
    }

    /// Enabled matcher scores and their combination for one concept.
    pub fn score(&self, query: &QueryTerm, concept: &Concept) -> Result<(Vec<MatchScore>, f64), ConfigError> {
        let raw: Vec<MatchScore> = self
            .config
            .switches
            .enabled_methods()
            .into_iter()
            .map(|m| self.matchers.run(m, query, concept))
            .collect();
        let combined = combine_scores(&raw, &self.config)?;
        Ok((raw, combined))
    }

    fn adjust(&self, session: &SessionHistory, score: f64, concept: &ConceptId) -> f64 {
        if self.config.switches.diversity {
            session.adjust_score(score, concept).clamp(0.0, 1.0)
        } else {
            score
        }
    }

    pub fn complexity(&self, query: &QueryTerm) -> ComplexityBreakdown {
        sparsity::complexity(query, &self.config.complexity_weights, &self.organ_systems)
    }

    pub fn activate(
        &self,
        text: &str,
        language: &str,
        session: &mut SessionHistory,
    ) -> Result<ActivationResult, EngineError> {
        let query = self.prepare(text, language);
        let candidates = self
            .graph
            .candidates_for_query(&query.tokens, &query.extracted_codes, self.config.candidate_cap);

        let scored: Vec<ActivationScoreEntry> = candidates
            .par_iter()
            .map(|id| {
                let concept = self.graph.concept(id).expect("candidate ids come from the graph");
                let (raw, combined) = self.score(&query, concept)?;
                Ok(ActivationScoreEntry {
                    concept: id.clone(),
                    name: concept.standard_name.clone(),
                    origin: EntryOrigin::Matched,
                    raw,
                    combined,
                    adjusted: self.adjust(session, combined, id),
                })
            })
            .collect::<Result<_, ConfigError>>()?;

        let complexity = self.complexity(&query);
        let k_used = adaptive_k(&self.config.sparsity, self.graph.len(), complexity.total);
        let tau = self.config.activation_threshold;

        let (cleared, below): (Vec<_>, Vec<_>) = scored.into_iter().partition(|e| e.adjusted >= tau && e.adjusted > 0.0);
        let mut entries = select_top_k(cleared, k_used, rank_order);

        let mut fallback = None;
        if entries.is_empty() && self.config.switches.fallback {
            let weak: Vec<(ConceptId, f64)> = below
                .iter()
                .filter(|e| e.adjusted > 0.0)
                .map(|e| (e.concept.clone(), e.adjusted))
                .collect();
            let raw_by_concept: BTreeMap<&ConceptId, &Vec<MatchScore>> =
                below.iter().map(|e| (&e.concept, &e.raw)).collect();
            let result = self.fallback_resolver().resolve(&query, &weak)?;
            let from_fallback: Vec<ActivationScoreEntry> = result
                .candidates
                .iter()
                .map(|c| ActivationScoreEntry {
                    concept: c.concept.clone(),
                    name: self.graph.concept(&c.concept).map(|x| x.standard_name.clone()).unwrap_or_default(),
                    origin: EntryOrigin::Fallback,
                    raw: raw_by_concept.get(&c.concept).map(|r| (*r).clone()).unwrap_or_default(),
                    combined: c.score,
                    adjusted: self.adjust(session, c.score, &c.concept),
                })
                .collect();
            entries = select_top_k(from_fallback, k_used, rank_order);
            fallback = Some(result);
        }

        let active: BTreeSet<ConceptId> = entries.iter().map(|e| e.concept.clone()).collect();
        let diversity = if active.is_empty() {
            DiversityReport::vacuous()
        } else {
            session.diversity(&active)?
        };
        session.record(&active);

        let concepts: Vec<ConceptId> = entries.iter().map(|e| e.concept.clone()).collect();
        let context = assemble_context(&concepts, &self.graph, self.evidence.as_ref(), text);

        Ok(ActivationResult {
            query,
            candidate_count: candidates.len(),
            k_used,
            complexity,
            entries,
            fallback,
            diversity,
            context,
        })
    }

    /// Scores `concept` against the query without touching the session.
    pub fn explain(
        &self,
        text: &str,
        language: &str,
        concept: &ConceptId,
        session: &SessionHistory,
    ) -> Result<Explanation, EngineError> {
        let target = self
            .graph
            .lookup_by_code(concept)
            .ok_or_else(|| GraphError::UnknownConcept(concept.clone()))?;
        let id = &target.primary_id;
        let query = self.prepare(text, language);
        let in_candidate_set = self
            .graph
            .candidates_for_query(&query.tokens, &query.extracted_codes, self.config.candidate_cap)
            .contains(id);
        let raw: Vec<MatchScore> = MatchMethod::ALL.iter().map(|m| self.matchers.run(*m, &query, target)).collect();
        let combined = combine_scores(&raw, &self.config)?;
        let complexity = self.complexity(&query);
        let sparsity = &self.config.sparsity;
        Ok(Explanation {
            concept: id.clone(),
            name: target.standard_name.clone(),
            in_candidate_set,
            raw,
            enabled: self.config.switches.enabled_methods(),
            combined,
            previously_used: session.contains(id),
            lambda_rd: session.lambda_rd(),
            adjusted: self.adjust(session, combined, id),
            activation_threshold: self.config.activation_threshold,
            concept_count: self.graph.len(),
            alpha: sparsity.alpha(),
            k_raw: sparsity.alpha() * self.graph.len() as f64 * complexity.total,
            k: adaptive_k(sparsity, self.graph.len(), complexity.total),
            complexity,
        })
    }
}
