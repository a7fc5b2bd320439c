//! Three-layer knowledge graph: a classification (taxonomy) layer, a clinical
//! manifestation layer and an instance layer, all hanging off a set of
//! rare-disease concepts.
//!
//! The graph is immutable once loaded. Concepts are kept sorted by primary
//! id, so every listing is deterministic for a given input file.

mod load;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::id::ConceptId;
use crate::text;

pub use load::DEFAULT_CANDIDATE_CAP;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: field `{field}`: {message}")]
    InvalidField {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: {from} references unknown {kind} {to}")]
    Dangling {
        line: usize,
        from: String,
        kind: &'static str,
        to: String,
    },
    #[error("line {line}: duplicate {kind} id {id} (first defined on line {first_line})")]
    Duplicate {
        line: usize,
        kind: &'static str,
        id: String,
        first_line: usize,
    },
    #[error("line {line}: {message}")]
    Conflict { line: usize, message: String },
    #[error("empty graph")]
    Empty,
    #[error("unknown concept {0}")]
    UnknownConcept(ConceptId),
}

impl GraphError {
    /// Source line the error points at, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            GraphError::Malformed { line, .. }
            | GraphError::InvalidField { line, .. }
            | GraphError::Dangling { line, .. }
            | GraphError::Duplicate { line, .. }
            | GraphError::Conflict { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alias {
    pub text: String,
    pub language: String,
    pub authority_weight: f64,
    pub source: String,
}

/// Links from a concept into the three layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LayerLinks {
    pub taxonomy: Option<String>,
    pub clinical: Option<String>,
    pub instances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Concept {
    pub primary_id: ConceptId,
    pub cross_refs: BTreeSet<ConceptId>,
    pub standard_name: String,
    pub aliases: Vec<Alias>,
    pub links: LayerLinks,
}

impl Concept {
    /// Standard name followed by every alias text.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.standard_name.as_str()).chain(self.aliases.iter().map(|a| a.text.as_str()))
    }

    /// Whether `id` is this concept's primary id or one of its cross references.
    pub fn has_code(&self, id: &ConceptId) -> bool {
        &self.primary_id == id || self.cross_refs.contains(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxonomyNode {
    pub node_id: String,
    pub label: String,
    pub parent: Option<String>,
    pub family_id: String,
    pub member_concepts: BTreeSet<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feature {
    pub text: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClinicalProfile {
    pub profile_id: String,
    pub concept: ConceptId,
    pub phenotypes: BTreeSet<ConceptId>,
    pub features: Vec<Feature>,
    pub diagnostic_criteria: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub record_id: String,
    pub concept: ConceptId,
    pub case_text: String,
    pub subtype: Option<String>,
    pub diagnostic_pathway: Vec<String>,
    pub gene_links: BTreeSet<ConceptId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerCounts {
    pub concepts: usize,
    pub taxonomy: usize,
    pub clinical: usize,
    pub instances: usize,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    concepts: Vec<Concept>,
    taxonomy: BTreeMap<String, TaxonomyNode>,
    clinical: BTreeMap<String, ClinicalProfile>,
    instances: BTreeMap<String, InstanceRecord>,
    /// primary id and every cross reference → concept position
    code_index: HashMap<ConceptId, usize>,
    name_index: HashMap<String, BTreeSet<usize>>,
    token_index: HashMap<String, BTreeSet<usize>>,
}

impl KnowledgeGraph {
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn layer_counts(&self) -> LayerCounts {
        LayerCounts {
            concepts: self.concepts.len(),
            taxonomy: self.taxonomy.len(),
            clinical: self.clinical.len(),
            instances: self.instances.len(),
        }
    }

    /// All concepts, sorted by primary id.
    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    /// Concept whose *primary* id is `id`.
    pub fn concept(&self, id: &ConceptId) -> Option<&Concept> {
        self.concepts
            .binary_search_by(|c| c.primary_id.cmp(id))
            .ok()
            .map(|i| &self.concepts[i])
    }

    /// Concept whose primary id or cross references contain `id`.
    pub fn lookup_by_code(&self, id: &ConceptId) -> Option<&Concept> {
        self.code_index.get(id).map(|&i| &self.concepts[i])
    }

    /// Concepts whose standard name or an alias normalizes to `normalized`.
    pub fn concepts_named(&self, normalized: &str) -> Vec<&ConceptId> {
        self.name_index
            .get(normalized)
            .map(|set| set.iter().map(|&i| &self.concepts[i].primary_id).collect())
            .unwrap_or_default()
    }

    /// Concepts indexed under a normalized token.
    pub fn concepts_with_token(&self, token: &str) -> Vec<&ConceptId> {
        self.token_index
            .get(token)
            .map(|set| set.iter().map(|&i| &self.concepts[i].primary_id).collect())
            .unwrap_or_default()
    }

    /// Every token in the inverted index, sorted.
    pub fn indexed_tokens(&self) -> Vec<&str> {
        let mut tokens: Vec<&str> = self.token_index.keys().map(String::as_str).collect();
        tokens.sort_unstable();
        tokens
    }

    /// Pre-filters the graph down to concepts worth scoring.
    ///
    /// Concepts sharing at least one token with the query are ranked by the
    /// number of distinct shared tokens, then by primary id, and cut at
    /// `cap`. Concepts owning one of `codes` are always included, ahead of
    /// the ranked list and regardless of the cap.
    pub fn candidates_for_query(&self, tokens: &[String], codes: &[ConceptId], cap: usize) -> Vec<ConceptId> {
        let cap = cap.max(1);
        let mut forced: Vec<usize> = Vec::new();
        for code in codes {
            if let Some(&i) = self.code_index.get(code) {
                if !forced.contains(&i) {
                    forced.push(i);
                }
            }
        }

        let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
        let mut shared: HashMap<usize, usize> = HashMap::new();
        for token in distinct {
            if let Some(set) = self.token_index.get(token) {
                for &i in set {
                    *shared.entry(i).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(usize, usize)> = shared.into_iter().filter(|(i, _)| !forced.contains(i)).collect();
        // positions follow primary-id order, so ascending position is ascending id
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let room = cap.saturating_sub(forced.len());
        forced
            .into_iter()
            .chain(ranked.into_iter().take(room).map(|(i, _)| i))
            .map(|i| self.concepts[i].primary_id.clone())
            .collect()
    }

    /// Members of every taxonomy node in `concept`'s family, minus `concept`.
    pub fn family_of(&self, concept: &ConceptId) -> Result<BTreeSet<ConceptId>, GraphError> {
        let c = self
            .concept(concept)
            .ok_or_else(|| GraphError::UnknownConcept(concept.clone()))?;
        let Some(family) = c.links.taxonomy.as_ref().map(|n| &self.taxonomy[n].family_id) else {
            return Ok(BTreeSet::new());
        };
        Ok(self
            .taxonomy
            .values()
            .filter(|n| &n.family_id == family)
            .flat_map(|n| n.member_concepts.iter())
            .filter(|m| *m != concept)
            .cloned()
            .collect())
    }

    pub fn taxonomy_node(&self, node_id: &str) -> Option<&TaxonomyNode> {
        self.taxonomy.get(node_id)
    }

    pub fn taxonomy_nodes(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.taxonomy.values()
    }

    /// Nodes without a parent, sorted by node id.
    pub fn taxonomy_roots(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.taxonomy.values().filter(|n| n.parent.is_none())
    }

    /// Children of a node, sorted by node id.
    pub fn taxonomy_children<'a>(&'a self, node_id: &'a str) -> impl Iterator<Item = &'a TaxonomyNode> + 'a {
        self.taxonomy
            .values()
            .filter(move |n| n.parent.as_deref() == Some(node_id))
    }

    /// Root-to-node chain for the concept's taxonomy node; empty when the
    /// concept has no taxonomy link.
    pub fn taxonomy_path(&self, concept: &ConceptId) -> Vec<&TaxonomyNode> {
        let mut path = Vec::new();
        let mut cursor = self
            .concept(concept)
            .and_then(|c| c.links.taxonomy.as_deref())
            .and_then(|n| self.taxonomy.get(n));
        while let Some(node) = cursor {
            path.push(node);
            cursor = node.parent.as_deref().and_then(|p| self.taxonomy.get(p));
        }
        path.reverse();
        path
    }

    pub fn clinical_profiles(&self) -> impl Iterator<Item = &ClinicalProfile> {
        self.clinical.values()
    }

    pub fn clinical_profile_for(&self, concept: &ConceptId) -> Option<&ClinicalProfile> {
        self.concept(concept)
            .and_then(|c| c.links.clinical.as_deref())
            .and_then(|p| self.clinical.get(p))
    }

    pub fn instances(&self) -> impl Iterator<Item = &InstanceRecord> {
        self.instances.values()
    }

    /// Instance records of a concept, sorted by record id.
    pub fn instances_for(&self, concept: &ConceptId) -> Vec<&InstanceRecord> {
        self.concept(concept)
            .map(|c| c.links.instances.iter().filter_map(|r| self.instances.get(r)).collect())
            .unwrap_or_default()
    }

    /// Every normalized standard name and alias in the graph.
    pub fn normalized_names(&self) -> impl Iterator<Item = &str> {
        self.name_index.keys().map(String::as_str)
    }

    fn build_indexes(&mut self) {
        for (i, concept) in self.concepts.iter().enumerate() {
            for id in std::iter::once(&concept.primary_id).chain(&concept.cross_refs) {
                self.code_index.insert(id.clone(), i);
            }
            for name in concept.names() {
                let tokens = text::tokenize(name);
                if tokens.is_empty() {
                    continue;
                }
                self.name_index.entry(tokens.join(" ")).or_default().insert(i);
                for token in tokens {
                    self.token_index.entry(token).or_default().insert(i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const THREE: &str = include_str!("../../tests/fixtures/three_concepts.jsonl");

    fn id(s: &str) -> ConceptId {
        s.parse().unwrap()
    }

    fn graph() -> KnowledgeGraph {
        KnowledgeGraph::from_jsonl(THREE).unwrap()
    }

    #[test]
    fn loads_three_concept_fixture() {
        let g = graph();
        assert_eq!(g.len(), 3);
        assert!(!g.indexed_tokens().is_empty());
        let ids: Vec<String> = g.concepts().iter().map(|c| c.primary_id.to_string()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn lookup_by_primary_and_cross_ref() {
        let g = graph();
        let marfan = g.lookup_by_code(&id("ORPHA:558")).unwrap();
        assert_eq!(marfan.standard_name, "Marfan syndrome");
        assert_eq!(g.lookup_by_code(&id("omim:154700")).unwrap().primary_id, id("ORPHA:558"));
        assert!(g.lookup_by_code(&id("ORPHA:999999")).is_none());
    }

    #[test]
    fn candidates_contain_alias_owner() {
        let g = graph();
        let cands = g.candidates_for_query(&text::tokenize("Anderson-Fabry disease"), &[], 10);
        assert!(cands.contains(&id("ORPHA:324")));
    }

    #[test]
    fn candidates_empty_without_shared_vocabulary() {
        let g = graph();
        assert!(g.candidates_for_query(&text::tokenize("zzz qqq"), &[], 10).is_empty());
    }

    #[test]
    fn candidates_force_include_codes() {
        let g = graph();
        let cands = g.candidates_for_query(&text::tokenize("zzz"), &[id("OMIM:154700")], 1);
        assert_eq!(cands, vec![id("ORPHA:558")]);
    }

    #[test]
    fn family_membership() {
        let g = graph();
        // Marfan and ALS share no family; Fabry sits alone in its family
        assert!(g.family_of(&id("ORPHA:324")).unwrap().is_empty());
        assert!(matches!(g.family_of(&id("ORPHA:1")), Err(GraphError::UnknownConcept(_))));
    }

    #[test]
    fn taxonomy_path_runs_root_to_leaf() {
        let g = graph();
        let labels: Vec<&str> = g.taxonomy_path(&id("ORPHA:803")).iter().map(|n| n.label.as_str()).collect();
        assert_eq!(labels, ["Rare neurological disease", "Motor neuron disease"]);
    }
}
