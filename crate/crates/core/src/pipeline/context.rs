//! Context documents built from activated concepts, plus the pluggable
//! external-evidence provider.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::id::ConceptId;
use crate::kg::KnowledgeGraph;
use crate::text;

/// Instance records shown per concept.
pub const MAX_INSTANCES_PER_CONCEPT: usize = 3;
pub const EVIDENCE_UNAVAILABLE: &str = "evidence unavailable";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSnippet {
    pub title: String,
    pub body: String,
    pub source_uri: String,
    pub retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
#[error("evidence provider: {0}")]
pub struct EvidenceError(pub String);

pub trait EvidenceProvider: Send + Sync + fmt::Debug {
    fn fetch(&self, query: &str) -> Result<Vec<EvidenceSnippet>, EvidenceError>;
}

/// Provider that never has anything to say.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullProvider;

impl EvidenceProvider for NullProvider {
    fn fetch(&self, _query: &str) -> Result<Vec<EvidenceSnippet>, EvidenceError> {
        Ok(Vec::new())
    }
}

/// Canned evidence from a JSON object mapping [`FileEvidenceProvider::key`]
/// of a query to its snippet list.
#[derive(Debug, Clone, Default)]
pub struct FileEvidenceProvider {
    entries: BTreeMap<String, Vec<EvidenceSnippet>>,
}

impl FileEvidenceProvider {
    /// SHA-256 hex digest of the normalized query.
    pub fn key(query: &str) -> String {
        hex::encode(Sha256::digest(text::normalize(query).as_bytes()))
    }

    pub fn parse(source: &str) -> Result<Self, EvidenceError> {
        let entries: BTreeMap<String, Vec<EvidenceSnippet>> =
            serde_json::from_str(source).map_err(|e| EvidenceError(e.to_string()))?;
        for snippet in entries.values().flatten() {
            if snippet.body.trim().is_empty() {
                return Err(EvidenceError(format!("snippet `{}` has an empty body", snippet.title)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, EvidenceError> {
        let source = std::fs::read_to_string(path).map_err(|e| EvidenceError(format!("{}: {e}", path.display())))?;
        Self::parse(&source)
    }

    pub fn insert(&mut self, query: &str, snippets: Vec<EvidenceSnippet>) {
        self.entries.insert(Self::key(query), snippets);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("evidence serializes")
    }
}

impl EvidenceProvider for FileEvidenceProvider {
    fn fetch(&self, query: &str) -> Result<Vec<EvidenceSnippet>, EvidenceError> {
        Ok(self.entries.get(&Self::key(query)).cloned().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Taxonomy,
    ClinicalFeatures,
    InstanceCases,
    ExternalEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextSection {
    pub kind: SectionKind,
    pub title: String,
    pub body: String,
    /// Concept, node, profile and record ids (or evidence URIs) behind the section.
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ContextDocument {
    pub sections: Vec<ContextSection>,
}

impl ContextDocument {
    pub fn section_titles(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|s| s.title.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            out.push_str("## ");
            out.push_str(&s.title);
            out.push('\n');
            out.push_str(&s.body);
            out.push_str("\n\n");
        }
        out
    }
}

/// Builds the context for `concepts` (in rank order). Concepts unknown to the
/// graph are skipped. Evidence errors become an "evidence unavailable"
/// section; an empty provider response adds nothing.
pub fn assemble_context(
    concepts: &[ConceptId],
    graph: &KnowledgeGraph,
    provider: &dyn EvidenceProvider,
    query: &str,
) -> ContextDocument {
    let mut sections = Vec::new();
    for id in concepts {
        let Some(concept) = graph.concept(id) else { continue };
        let name = &concept.standard_name;

        let path = graph.taxonomy_path(id);
        if !path.is_empty() {
            let mut provenance = vec![id.to_string()];
            provenance.extend(path.iter().map(|n| n.node_id.clone()));
            sections.push(ContextSection {
                kind: SectionKind::Taxonomy,
                title: format!("Classification: {name} ({id})"),
                body: path.iter().map(|n| n.label.as_str()).collect::<Vec<_>>().join(" > "),
                provenance,
            });
        }

        if let Some(profile) = graph.clinical_profile_for(id) {
            let mut features: Vec<_> = profile.features.iter().collect();
            features.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.text.cmp(&b.text)));
            let mut lines: Vec<String> = features.iter().map(|f| format!("- {} ({:.2})", f.text, f.weight)).collect();
            if !profile.phenotypes.is_empty() {
                let terms: Vec<String> = profile.phenotypes.iter().map(ToString::to_string).collect();
                lines.push(format!("phenotypes: {}", terms.join(", ")));
            }
            for c in &profile.diagnostic_criteria {
                lines.push(format!("criterion: {c}"));
            }
            sections.push(ContextSection {
                kind: SectionKind::ClinicalFeatures,
                title: format!("Clinical features: {name} ({id})"),
                body: lines.join("\n"),
                provenance: vec![id.to_string(), profile.profile_id.clone()],
            });
        }

        let records = graph.instances_for(id);
        if !records.is_empty() {
            let shown = &records[..records.len().min(MAX_INSTANCES_PER_CONCEPT)];
            let body = shown
                .iter()
                .map(|r| match &r.subtype {
                    Some(sub) => format!("- [{}] {} (subtype: {sub})", r.record_id, r.case_text),
                    None => format!("- [{}] {}", r.record_id, r.case_text),
                })
                .collect::<Vec<_>>()
                .join("\n");
            let mut provenance = vec![id.to_string()];
            provenance.extend(shown.iter().map(|r| r.record_id.clone()));
            sections.push(ContextSection {
                kind: SectionKind::InstanceCases,
                title: format!("Cases: {name} ({id})"),
                body,
                provenance,
            });
        }
    }

    match provider.fetch(query) {
        Ok(snippets) if snippets.is_empty() => {}
        Ok(snippets) => sections.push(ContextSection {
            kind: SectionKind::ExternalEvidence,
            title: "External evidence".into(),
            body: snippets
                .iter()
                .map(|s| format!("- {}: {} <{}> ({})", s.title, s.body, s.source_uri, s.retrieved_at.to_rfc3339()))
                .collect::<Vec<_>>()
                .join("\n"),
            provenance: snippets.iter().map(|s| s.source_uri.clone()).collect(),
        }),
        Err(e) => {
            log::warn!("{e}");
            sections.push(ContextSection {
                kind: SectionKind::ExternalEvidence,
                title: "External evidence".into(),
                body: format!("{EVIDENCE_UNAVAILABLE}: {e}"),
                provenance: Vec::new(),
            });
        }
    }
    ContextDocument { sections }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> KnowledgeGraph {
        KnowledgeGraph::from_jsonl(include_str!("../../tests/fixtures/three_concepts.jsonl")).unwrap()
    }

    fn id(s: &str) -> ConceptId {
        s.parse().unwrap()
    }

    fn snippet(title: &str) -> EvidenceSnippet {
        EvidenceSnippet {
            title: title.into(),
            body: format!("{title} body"),
            source_uri: format!("https://example.org/{title}"),
            retrieved_at: "2024-01-01T00:00:00Z".parse().unwrap(),
        }
    }

    #[derive(Debug)]
    struct Failing;
    impl EvidenceProvider for Failing {
        fn fetch(&self, _q: &str) -> Result<Vec<EvidenceSnippet>, EvidenceError> {
            Err(EvidenceError("timeout".into()))
        }
    }

    #[test]
    fn sections_per_concept() {
        let g = graph();
        let doc = assemble_context(&[id("ORPHA:324")], &g, &NullProvider, "fabry");
        let kinds: Vec<SectionKind> = doc.sections.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, [SectionKind::Taxonomy, SectionKind::ClinicalFeatures, SectionKind::InstanceCases]);
        assert_eq!(doc.sections[0].body, "Rare inborn error of metabolism > Lysosomal storage disease");
        let clinical = &doc.sections[1].body;
        assert!(clinical.find("angiokeratoma").unwrap() < clinical.find("proteinuria").unwrap());
    }

    #[test]
    fn concept_without_profile_has_no_clinical_section() {
        let src = r#"{"layer":"concept","id":"ORPHA:1","name":"alpha"}"#;
        let g = KnowledgeGraph::from_jsonl(src).unwrap();
        let doc = assemble_context(&[id("ORPHA:1")], &g, &NullProvider, "alpha");
        assert!(doc.sections.is_empty());
    }

    #[test]
    fn evidence_passthrough_in_provider_order() {
        let g = graph();
        let mut p = FileEvidenceProvider::default();
        p.insert("Fabry  disease", vec![snippet("b"), snippet("a")]);
        let doc = assemble_context(&[], &g, &p, "fabry disease");
        assert_eq!(doc.sections.len(), 1);
        assert_eq!(doc.sections[0].provenance, ["https://example.org/b", "https://example.org/a"]);
        let reparsed = FileEvidenceProvider::parse(&p.to_json()).unwrap();
        assert_eq!(reparsed.fetch("FABRY DISEASE").unwrap().len(), 2);
    }

    #[test]
    fn provider_failure_is_isolated() {
        let g = graph();
        let doc = assemble_context(&[id("ORPHA:558")], &g, &Failing, "q");
        assert!(doc.sections.last().unwrap().body.starts_with(EVIDENCE_UNAVAILABLE));
    }

    #[test]
    fn cited_ids_exist() {
        let g = graph();
        let ids: Vec<ConceptId> = g.concepts().iter().map(|c| c.primary_id.clone()).collect();
        let doc = assemble_context(&ids, &g, &NullProvider, "q");
        for s in &doc.sections {
            let cited: ConceptId = s.provenance[0].parse().unwrap();
            assert!(g.concept(&cited).is_some());
        }
    }
}
