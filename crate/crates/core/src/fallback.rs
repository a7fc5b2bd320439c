//! Progressive fallback for queries whose activation set came out empty.
//!
//! Levels are tried in order and the first one producing candidates wins:
//!
//! 1. family: taxonomy siblings of weak (sub-threshold) matches
//! 2. phenotype: Jaccard overlap between query HPO terms and clinical profiles
//! 3. clinical features: weighted share of profile features named in the query
//! 4. genotype: genes mentioned in the query linked through instance records
//! 5. basic knowledge: representative concepts of the largest taxonomy roots
//!
//! Level 5 always yields something on a non-empty graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::id::{ConceptId, Namespace};
use crate::kg::KnowledgeGraph;
use crate::matchers::{extract_codes, gene_mentions, Lexicon, QueryTerm, Segmenter, UnitKind};
use crate::text::{self, Stopwords};

/// Multiplier applied to a weak match's score for its family members.
pub const FAMILY_DISCOUNT: f64 = 0.9;
/// Score given to basic-knowledge candidates.
pub const BASIC_KNOWLEDGE_SCORE: f64 = 0.05;
pub const BASIC_KNOWLEDGE_RATIONALE: &str = "basic knowledge fallback";

#[derive(Debug, Error)]
pub enum FallbackError {
    #[error("fallback on an empty graph")]
    EmptyGraph,
    #[error("phenotype lexicon line {line}: {message}")]
    PhenotypeLexicon { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FallbackLevel {
    #[serde(rename = "L1_family_related")]
    FamilyRelated = 1,
    #[serde(rename = "L2_phenotype_driven")]
    PhenotypeDriven = 2,
    #[serde(rename = "L3_clinical_feature_combination")]
    ClinicalFeatureCombination = 3,
    #[serde(rename = "L4_genotype_association")]
    GenotypeAssociation = 4,
    #[serde(rename = "L5_basic_knowledge")]
    BasicKnowledge = 5,
}

impl FallbackLevel {
    pub const ALL: [FallbackLevel; 5] = [
        FallbackLevel::FamilyRelated,
        FallbackLevel::PhenotypeDriven,
        FallbackLevel::ClinicalFeatureCombination,
        FallbackLevel::GenotypeAssociation,
        FallbackLevel::BasicKnowledge,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for FallbackLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FallbackLevel::FamilyRelated => "family-related",
            FallbackLevel::PhenotypeDriven => "phenotype-driven",
            FallbackLevel::ClinicalFeatureCombination => "clinical-feature combination",
            FallbackLevel::GenotypeAssociation => "genotype association",
            FallbackLevel::BasicKnowledge => "basic knowledge",
        };
        write!(f, "L{} {name}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallbackCandidate {
    pub concept: ConceptId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallbackResult {
    pub level: FallbackLevel,
    pub candidates: Vec<FallbackCandidate>,
    pub rationale: String,
}

const SHIPPED_PHENOTYPES: &str = include_str!("../data/phenotypes.tsv");

/// HPO label to HPO term, one `label<TAB>HP:nnnnnnn` pair per line.
#[derive(Debug, Clone)]
pub struct PhenotypeLexicon {
    labels: Lexicon,
    codes: HashMap<String, ConceptId>,
}

impl Default for PhenotypeLexicon {
    fn default() -> Self {
        Self::parse(SHIPPED_PHENOTYPES).expect("shipped phenotype lexicon is well formed")
    }
}

impl PhenotypeLexicon {
    pub fn empty() -> Self {
        Self {
            labels: Lexicon::new(),
            codes: HashMap::new(),
        }
    }

    pub fn parse(source: &str) -> Result<Self, FallbackError> {
        let mut lex = Self::empty();
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FallbackError::PhenotypeLexicon { line: i + 1, message };
            let (label, code) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `label<TAB>HP:nnnnnnn`".into()))?;
            let id: ConceptId = code.trim().parse().map_err(|e: crate::id::IdError| err(e.to_string()))?;
            if id.namespace() != Namespace::Hpo {
                return Err(err(format!("{id} is not an HPO term")));
            }
            let normalized = text::normalize(label);
            if normalized.is_empty() {
                return Err(err("empty label".into()));
            }
            lex.labels.insert(&normalized);
            lex.codes.insert(normalized, id);
        }
        Ok(lex)
    }

    pub fn from_file(path: &Path) -> Result<Self, FallbackError> {
        let source = std::fs::read_to_string(path).map_err(|e| FallbackError::PhenotypeLexicon {
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&source)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Normalized labels.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.codes.keys().map(String::as_str)
    }

    /// HPO terms whose labels occur in the tokens, by longest match.
    pub fn hits(&self, tokens: &[String]) -> BTreeSet<ConceptId> {
        Segmenter::new(self.labels.clone(), Stopwords::empty())
            .segment_tokens(tokens)
            .into_iter()
            .filter(|u| u.kind == UnitKind::Lexicon)
            .filter_map(|u| self.codes.get(&u.text).cloned())
            .collect()
    }
}

pub struct FallbackResolver<'a> {
    pub graph: &'a KnowledgeGraph,
    pub phenotypes: &'a PhenotypeLexicon,
    pub stopwords: &'a Stopwords,
    /// How many basic-knowledge candidates to return (the activation floor).
    pub basic_count: usize,
}

fn sort_candidates(scores: BTreeMap<ConceptId, f64>) -> Vec<FallbackCandidate> {
    let mut out: Vec<FallbackCandidate> = scores
        .into_iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(concept, score)| FallbackCandidate {
            concept,
            score: score.clamp(0.0, 1.0),
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.concept.cmp(&b.concept)));
    out
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn join_ids<'a>(ids: impl IntoIterator<Item = &'a ConceptId>) -> String {
    ids.into_iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl FallbackResolver<'_> {
    pub fn resolve(&self, query: &QueryTerm, weak_matches: &[(ConceptId, f64)]) -> Result<FallbackResult, FallbackError> {
        if self.graph.is_empty() {
            return Err(FallbackError::EmptyGraph);
        }
        for level in FallbackLevel::ALL {
            let (candidates, rationale) = self.evaluate(level, query, weak_matches);
            if !candidates.is_empty() || level == FallbackLevel::BasicKnowledge {
                return Ok(FallbackResult {
                    level,
                    candidates,
                    rationale,
                });
            }
        }
        unreachable!("the basic-knowledge level always returns")
    }

    /// Candidates of a single level, sorted by score descending then id.
    pub fn evaluate(
        &self,
        level: FallbackLevel,
        query: &QueryTerm,
        weak_matches: &[(ConceptId, f64)],
    ) -> (Vec<FallbackCandidate>, String) {
        match level {
            FallbackLevel::FamilyRelated => self.family(weak_matches),
            FallbackLevel::PhenotypeDriven => self.phenotype(query),
            FallbackLevel::ClinicalFeatureCombination => self.clinical_features(query),
            FallbackLevel::GenotypeAssociation => self.genotype(query),
            FallbackLevel::BasicKnowledge => self.basic_knowledge(),
        }
    }

    fn family(&self, weak_matches: &[(ConceptId, f64)]) -> (Vec<FallbackCandidate>, String) {
        let mut scores: BTreeMap<ConceptId, f64> = BTreeMap::new();
        let mut sources = BTreeSet::new();
        for (concept, weak) in weak_matches {
            let Ok(family) = self.graph.family_of(concept) else { continue };
            for member in family {
                sources.insert(concept);
                let s = (weak * FAMILY_DISCOUNT).clamp(0.0, 1.0);
                let slot = scores.entry(member).or_insert(0.0);
                *slot = slot.max(s);
            }
        }
        (sort_candidates(scores), format!("same-family fallback from weak matches {}", join_ids(sources)))
    }

    /// HPO terms named in the query, by code or by phenotype label.
    pub fn query_phenotypes(&self, query: &QueryTerm) -> BTreeSet<ConceptId> {
        let mut terms: BTreeSet<ConceptId> = extract_codes(&query.raw_text)
            .into_iter()
            .filter(|c| c.namespace() == Namespace::Hpo)
            .collect();
        terms.extend(self.phenotypes.hits(&query.tokens));
        terms
    }

    fn phenotype(&self, query: &QueryTerm) -> (Vec<FallbackCandidate>, String) {
        let terms = self.query_phenotypes(query);
        let mut scores = BTreeMap::new();
        if !terms.is_empty() {
            for profile in self.graph.clinical_profiles() {
                let j = jaccard(&terms, &profile.phenotypes);
                if j > 0.0 {
                    let slot = scores.entry(profile.concept.clone()).or_insert(0.0);
                    *slot = f64::max(*slot, j);
                }
            }
        }
        (sort_candidates(scores), format!("phenotype overlap on {}", join_ids(&terms)))
    }

    fn content_tokens(&self, text_in: &str) -> BTreeSet<String> {
        text::tokenize(text_in)
            .into_iter()
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }

    fn clinical_features(&self, query: &QueryTerm) -> (Vec<FallbackCandidate>, String) {
        let query_tokens: BTreeSet<&str> = query
            .tokens
            .iter()
            .filter(|t| !self.stopwords.contains(t))
            .map(String::as_str)
            .collect();
        let mut scores = BTreeMap::new();
        let mut shared_tokens = BTreeSet::new();
        for profile in self.graph.clinical_profiles() {
            let total: f64 = profile.features.iter().map(|f| f.weight).sum();
            if total <= 0.0 {
                continue;
            }
            let mut matched = 0.0;
            for feature in &profile.features {
                let tokens = self.content_tokens(&feature.text);
                let shared: Vec<&String> = tokens.iter().filter(|t| query_tokens.contains(t.as_str())).collect();
                if !shared.is_empty() {
                    matched += feature.weight;
                    shared_tokens.extend(shared.into_iter().cloned());
                }
            }
            if matched > 0.0 {
                let slot = scores.entry(profile.concept.clone()).or_insert(0.0);
                *slot = f64::max(*slot, matched / total);
            }
        }
        let listed = shared_tokens.into_iter().collect::<Vec<_>>().join(", ");
        (sort_candidates(scores), format!("clinical feature overlap on {listed}"))
    }

    /// Genes mentioned in the query that the graph knows about.
    pub fn query_genes(&self, query: &QueryTerm) -> BTreeSet<ConceptId> {
        let known: BTreeSet<&ConceptId> = self.graph.instances().flat_map(|r| r.gene_links.iter()).collect();
        gene_mentions(&query.raw_text)
            .into_iter()
            .filter(|g| known.contains(g))
            .collect()
    }

    fn genotype(&self, query: &QueryTerm) -> (Vec<FallbackCandidate>, String) {
        let genes = self.query_genes(query);
        let mut scores = BTreeMap::new();
        if !genes.is_empty() {
            let mut by_concept: BTreeMap<&ConceptId, BTreeSet<ConceptId>> = BTreeMap::new();
            for record in self.graph.instances() {
                by_concept
                    .entry(&record.concept)
                    .or_default()
                    .extend(record.gene_links.iter().cloned());
            }
            for (concept, linked) in by_concept {
                let j = jaccard(&genes, &linked);
                if j > 0.0 {
                    scores.insert(concept.clone(), j);
                }
            }
        }
        (sort_candidates(scores), format!("gene association via {}", join_ids(&genes)))
    }

    fn subtree_members(&self, node_id: &str) -> BTreeSet<ConceptId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![node_id.to_string()];
        while let Some(id) = stack.pop() {
            if let Some(node) = self.graph.taxonomy_node(&id) {
                out.extend(node.member_concepts.iter().cloned());
            }
            stack.extend(self.graph.taxonomy_children(&id).map(|n| n.node_id.clone()));
        }
        out
    }

    fn basic_knowledge(&self) -> (Vec<FallbackCandidate>, String) {
        let want = self.basic_count.max(1);
        let mut roots: Vec<(String, Vec<ConceptId>)> = self
            .graph
            .taxonomy_roots()
            .map(|r| (r.node_id.clone(), self.subtree_members(&r.node_id).into_iter().collect::<Vec<_>>()))
            .filter(|(_, m)| !m.is_empty())
            .collect();
        roots.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));

        let mut chosen: BTreeSet<ConceptId> = BTreeSet::new();
        let deepest = roots.iter().map(|(_, m)| m.len()).max().unwrap_or(0);
        'rounds: for round in 0..deepest {
            for (_, members) in &roots {
                if chosen.len() >= want {
                    break 'rounds;
                }
                if let Some(c) = members.get(round) {
                    chosen.insert(c.clone());
                }
            }
        }
        if chosen.is_empty() {
            chosen.extend(self.graph.concepts().iter().take(want).map(|c| c.primary_id.clone()));
        }
        let candidates = chosen
            .into_iter()
            .map(|concept| FallbackCandidate {
                concept,
                score: BASIC_KNOWLEDGE_SCORE,
            })
            .collect();
        (candidates, BASIC_KNOWLEDGE_RATIONALE.to_string())
    }
}
