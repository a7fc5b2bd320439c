//! Line-oriented graph file reader.
//!
//! One JSON object per line, discriminated by `layer`. Blank lines and lines
//! starting with `#` are ignored. Records may appear in any order: the first
//! pass collects them, the second resolves and checks references.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use super::{
    Alias, ClinicalProfile, Concept, Feature, GraphError, InstanceRecord, KnowledgeGraph, LayerLinks,
    TaxonomyNode,
};
use crate::id::{ConceptId, Namespace};

pub const DEFAULT_CANDIDATE_CAP: usize = 200;

#[derive(Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
enum Record {
    Concept(ConceptRecord),
    Taxonomy(TaxonomyRecord),
    Clinical(ClinicalRecord),
    Instance(InstanceRecordRaw),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AliasRecord {
    text: String,
    #[serde(default = "undetermined")]
    lang: String,
    weight: f64,
    #[serde(default)]
    source: String,
}

fn undetermined() -> String {
    "und".to_string()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConceptRecord {
    id: String,
    name: String,
    #[serde(default)]
    cross_refs: Vec<String>,
    #[serde(default)]
    aliases: Vec<AliasRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyRecord {
    id: String,
    label: String,
    #[serde(default)]
    parent: Option<String>,
    /// Defaults to the parent's family, or the node's own id at a root.
    #[serde(default)]
    family: Option<String>,
    #[serde(default)]
    members: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRecord {
    text: String,
    weight: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClinicalRecord {
    id: String,
    concept: String,
    #[serde(default)]
    phenotypes: Vec<String>,
    #[serde(default)]
    features: Vec<FeatureRecord>,
    #[serde(default)]
    criteria: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecordRaw {
    id: String,
    concept: String,
    #[serde(default)]
    case: String,
    #[serde(default)]
    subtype: Option<String>,
    #[serde(default)]
    pathway: Vec<String>,
    #[serde(default)]
    genes: Vec<String>,
}

fn parse_id(line: usize, field: &'static str, raw: &str) -> Result<ConceptId, GraphError> {
    raw.parse().map_err(|e: crate::id::IdError| GraphError::InvalidField {
        line,
        field,
        message: e.to_string(),
    })
}

fn nonempty(line: usize, field: &'static str, value: &str) -> Result<(), GraphError> {
    if value.trim().is_empty() {
        return Err(GraphError::InvalidField {
            line,
            field,
            message: "must not be empty".into(),
        });
    }
    Ok(())
}

fn unit_weight(line: usize, field: &'static str, w: f64) -> Result<(), GraphError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(GraphError::InvalidField {
            line,
            field,
            message: format!("weight {w} outside [0, 1]"),
        });
    }
    Ok(())
}

impl KnowledgeGraph {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&source)
    }

    pub fn from_jsonl(source: &str) -> Result<Self, GraphError> {
        let mut concepts: Vec<(usize, ConceptRecord)> = Vec::new();
        let mut taxonomy: Vec<(usize, TaxonomyRecord)> = Vec::new();
        let mut clinical: Vec<(usize, ClinicalRecord)> = Vec::new();
        let mut instances: Vec<(usize, InstanceRecordRaw)> = Vec::new();

        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let record: Record = serde_json::from_str(trimmed).map_err(|e| GraphError::Malformed {
                line,
                message: e.to_string(),
            })?;
            match record {
                Record::Concept(r) => concepts.push((line, r)),
                Record::Taxonomy(r) => taxonomy.push((line, r)),
                Record::Clinical(r) => clinical.push((line, r)),
                Record::Instance(r) => instances.push((line, r)),
            }
        }
        if concepts.is_empty() {
            return Err(GraphError::Empty);
        }

        let mut built: BTreeMap<ConceptId, (usize, Concept)> = BTreeMap::new();
        let mut claimed: HashMap<ConceptId, ConceptId> = HashMap::new();
        for (line, r) in concepts {
            let concept = build_concept(line, r)?;
            if let Some((first_line, _)) = built.get(&concept.primary_id) {
                return Err(GraphError::Duplicate {
                    line,
                    kind: "concept",
                    id: concept.primary_id.to_string(),
                    first_line: *first_line,
                });
            }
            built.insert(concept.primary_id.clone(), (line, concept));
        }
        // codes are claimed after all primaries are known so that a cross
        // reference naming another concept's primary id is caught regardless
        // of record order
        for id in built.keys() {
            claimed.insert(id.clone(), id.clone());
        }
        for (id, (line, concept)) in built.iter() {
            for xref in &concept.cross_refs {
                if let Some(owner) = claimed.get(xref) {
                    return Err(GraphError::Conflict {
                        line: *line,
                        message: format!("code {xref} of concept {id} is already claimed by {owner}"),
                    });
                }
                claimed.insert(xref.clone(), id.clone());
            }
        }

        let taxonomy = build_taxonomy(taxonomy, &mut built)?;
        let clinical = build_clinical(clinical, &mut built)?;
        let instances = build_instances(instances, &mut built)?;

        let mut graph = KnowledgeGraph {
            concepts: built.into_values().map(|(_, c)| c).collect(),
            taxonomy,
            clinical,
            instances,
            code_index: HashMap::new(),
            name_index: HashMap::new(),
            token_index: HashMap::new(),
        };
        graph.build_indexes();
        Ok(graph)
    }
}

fn build_concept(line: usize, r: ConceptRecord) -> Result<Concept, GraphError> {
    let primary_id = parse_id(line, "id", &r.id)?;
    nonempty(line, "name", &r.name)?;
    let mut cross_refs = BTreeSet::new();
    for raw in &r.cross_refs {
        let xref = parse_id(line, "cross_refs", raw)?;
        if xref == primary_id {
            return Err(GraphError::InvalidField {
                line,
                field: "cross_refs",
                message: format!("{xref} repeats the primary id"),
            });
        }
        if !cross_refs.insert(xref.clone()) {
            return Err(GraphError::InvalidField {
                line,
                field: "cross_refs",
                message: format!("{xref} listed twice"),
            });
        }
    }
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut aliases = Vec::with_capacity(r.aliases.len());
    for a in r.aliases {
        nonempty(line, "aliases.text", &a.text)?;
        unit_weight(line, "aliases.weight", a.weight)?;
        let key = (a.lang.to_lowercase(), a.text.trim().to_lowercase());
        if !seen.insert(key) {
            return Err(GraphError::InvalidField {
                line,
                field: "aliases.text",
                message: format!("alias `{}` repeated for language {}", a.text, a.lang),
            });
        }
        aliases.push(Alias {
            text: a.text,
            language: a.lang,
            authority_weight: a.weight,
            source: a.source,
        });
    }
    Ok(Concept {
        primary_id,
        cross_refs,
        standard_name: r.name,
        aliases,
        links: LayerLinks::default(),
    })
}

fn concept_mut<'a>(
    built: &'a mut BTreeMap<ConceptId, (usize, Concept)>,
    line: usize,
    from: &str,
    id: &ConceptId,
) -> Result<&'a mut Concept, GraphError> {
    built
        .get_mut(id)
        .map(|(_, c)| c)
        .ok_or_else(|| GraphError::Dangling {
            line,
            from: from.to_string(),
            kind: "concept",
            to: id.to_string(),
        })
}

fn build_taxonomy(
    records: Vec<(usize, TaxonomyRecord)>,
    built: &mut BTreeMap<ConceptId, (usize, Concept)>,
) -> Result<BTreeMap<String, TaxonomyNode>, GraphError> {
    let mut raw: BTreeMap<String, (usize, TaxonomyRecord)> = BTreeMap::new();
    for (line, r) in records {
        nonempty(line, "id", &r.id)?;
        nonempty(line, "label", &r.label)?;
        if let Some((first_line, _)) = raw.get(&r.id) {
            return Err(GraphError::Duplicate {
                line,
                kind: "taxonomy node",
                id: r.id,
                first_line: *first_line,
            });
        }
        raw.insert(r.id.clone(), (line, r));
    }

    for (id, (line, r)) in &raw {
        if let Some(parent) = &r.parent {
            if !raw.contains_key(parent) {
                return Err(GraphError::Dangling {
                    line: *line,
                    from: format!("taxonomy node {id}"),
                    kind: "taxonomy node",
                    to: parent.clone(),
                });
            }
        }
    }

    // walk each node to its root; a walk longer than the node count is a cycle
    let mut families: BTreeMap<String, String> = BTreeMap::new();
    for (id, (line, _)) in &raw {
        let mut chain = vec![id.as_str()];
        let mut cursor = id.as_str();
        let family = loop {
            let (_, node) = &raw[cursor];
            if let Some(f) = &node.family {
                break f.clone();
            }
            match &node.parent {
                None => break cursor.to_string(),
                Some(p) => {
                    if chain.len() > raw.len() {
                        return Err(GraphError::Conflict {
                            line: *line,
                            message: format!("taxonomy cycle through node {id}"),
                        });
                    }
                    cursor = p;
                    chain.push(cursor);
                }
            }
        };
        families.insert(id.clone(), family);
    }
    // explicit families can short-circuit the walk above; check the forest
    // property separately
    for (id, (line, _)) in &raw {
        let mut cursor = raw[id].1.parent.as_deref();
        let mut steps = 0;
        while let Some(p) = cursor {
            steps += 1;
            if steps > raw.len() {
                return Err(GraphError::Conflict {
                    line: *line,
                    message: format!("taxonomy cycle through node {id}"),
                });
            }
            cursor = raw[p].1.parent.as_deref();
        }
    }

    let mut nodes = BTreeMap::new();
    for (id, (line, r)) in raw {
        let from = format!("taxonomy node {id}");
        let mut members = BTreeSet::new();
        for m in &r.members {
            let cid = parse_id(line, "members", m)?;
            let concept = concept_mut(built, line, &from, &cid)?;
            if let Some(other) = &concept.links.taxonomy {
                if other != &id {
                    return Err(GraphError::Conflict {
                        line,
                        message: format!("concept {cid} is a member of taxonomy nodes {other} and {id}"),
                    });
                }
            }
            concept.links.taxonomy = Some(id.clone());
            members.insert(cid);
        }
        let family_id = families.remove(&id).unwrap_or_else(|| id.clone());
        nodes.insert(
            id.clone(),
            TaxonomyNode {
                node_id: id,
                label: r.label,
                parent: r.parent,
                family_id,
                member_concepts: members,
            },
        );
    }
    Ok(nodes)
}

fn build_clinical(
    records: Vec<(usize, ClinicalRecord)>,
    built: &mut BTreeMap<ConceptId, (usize, Concept)>,
) -> Result<BTreeMap<String, ClinicalProfile>, GraphError> {
    let mut profiles: BTreeMap<String, ClinicalProfile> = BTreeMap::new();
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (line, r) in records {
        nonempty(line, "id", &r.id)?;
        if let Some(first_line) = lines.get(&r.id) {
            return Err(GraphError::Duplicate {
                line,
                kind: "clinical profile",
                id: r.id,
                first_line: *first_line,
            });
        }
        let concept = parse_id(line, "concept", &r.concept)?;
        let mut phenotypes = BTreeSet::new();
        for p in &r.phenotypes {
            let pid = parse_id(line, "phenotypes", p)?;
            if pid.namespace() != Namespace::Hpo {
                return Err(GraphError::InvalidField {
                    line,
                    field: "phenotypes",
                    message: format!("{pid} is not an HPO term"),
                });
            }
            phenotypes.insert(pid);
        }
        let mut features = Vec::with_capacity(r.features.len());
        for f in r.features {
            nonempty(line, "features.text", &f.text)?;
            unit_weight(line, "features.weight", f.weight)?;
            features.push(Feature {
                text: f.text,
                weight: f.weight,
            });
        }
        let from = format!("clinical profile {}", r.id);
        let owner = concept_mut(built, line, &from, &concept)?;
        if let Some(other) = &owner.links.clinical {
            return Err(GraphError::Conflict {
                line,
                message: format!("concept {concept} already has clinical profile {other}"),
            });
        }
        owner.links.clinical = Some(r.id.clone());
        lines.insert(r.id.clone(), line);
        profiles.insert(
            r.id.clone(),
            ClinicalProfile {
                profile_id: r.id,
                concept,
                phenotypes,
                features,
                diagnostic_criteria: r.criteria,
            },
        );
    }
    Ok(profiles)
}

fn build_instances(
    records: Vec<(usize, InstanceRecordRaw)>,
    built: &mut BTreeMap<ConceptId, (usize, Concept)>,
) -> Result<BTreeMap<String, InstanceRecord>, GraphError> {
    let mut instances: BTreeMap<String, InstanceRecord> = BTreeMap::new();
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (line, r) in records {
        nonempty(line, "id", &r.id)?;
        if let Some(first_line) = lines.get(&r.id) {
            return Err(GraphError::Duplicate {
                line,
                kind: "instance record",
                id: r.id,
                first_line: *first_line,
            });
        }
        let concept = parse_id(line, "concept", &r.concept)?;
        let mut gene_links = BTreeSet::new();
        for g in &r.genes {
            let gid = parse_id(line, "genes", g)?;
            if gid.namespace() != Namespace::Gene {
                return Err(GraphError::InvalidField {
                    line,
                    field: "genes",
                    message: format!("{gid} is not a GENE id"),
                });
            }
            gene_links.insert(gid);
        }
        let from = format!("instance record {}", r.id);
        concept_mut(built, line, &from, &concept)?.links.instances.push(r.id.clone());
        lines.insert(r.id.clone(), line);
        instances.insert(
            r.id.clone(),
            InstanceRecord {
                record_id: r.id,
                concept,
                case_text: r.case,
                subtype: r.subtype,
                diagnostic_pathway: r.pathway,
                gene_links,
            },
        );
    }
    for (_, concept) in built.values_mut() {
        concept.links.instances.sort();
    }
    Ok(instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MARFAN: &str = r#"{"layer":"concept","id":"ORPHA:558","name":"Marfan syndrome"}"#;

    fn err(source: &str) -> GraphError {
        KnowledgeGraph::from_jsonl(source).unwrap_err()
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(err(""), GraphError::Empty));
        assert_eq!(err("# only a comment\n\n").to_string(), "empty graph");
    }

    #[test]
    fn bad_omim_syntax_names_line_and_field() {
        let src = format!(
            "{MARFAN}\n{}",
            r#"{"layer":"concept","id":"ORPHA:324","name":"Fabry disease","cross_refs":["OMIM:12345"]}"#
        );
        let e = err(&src);
        assert_eq!(e.line(), Some(2));
        let msg = e.to_string();
        assert!(msg.contains("cross_refs") && msg.contains("12345"), "{msg}");
    }

    #[test]
    fn malformed_json_names_line() {
        let e = err(&format!("{MARFAN}\n{{\"layer\":\"concept\",\"id\":\"ORPHA:1\"}}"));
        assert_eq!(e.line(), Some(2));
        assert!(e.to_string().contains("name"), "{e}");
        assert!(matches!(err("{\"layer\":\"bogus\"}"), GraphError::Malformed { line: 1, .. }));
    }

    #[test]
    fn duplicate_primary_id() {
        let e = err(&format!("{MARFAN}\n{MARFAN}"));
        assert!(matches!(e, GraphError::Duplicate { line: 2, first_line: 1, .. }), "{e}");
    }

    #[test]
    fn dangling_member_names_both_ids() {
        let src = format!("{MARFAN}\n{}", r#"{"layer":"taxonomy","id":"T1","label":"x","members":["ORPHA:9"]}"#);
        let msg = err(&src).to_string();
        assert!(msg.contains("T1") && msg.contains("ORPHA:9"), "{msg}");
    }

    #[test]
    fn dangling_parent() {
        let src = format!("{MARFAN}\n{}", r#"{"layer":"taxonomy","id":"T1","label":"x","parent":"T0"}"#);
        assert!(matches!(err(&src), GraphError::Dangling { line: 2, .. }));
    }

    #[test]
    fn taxonomy_cycle_is_rejected() {
        let src = format!(
            "{MARFAN}\n{}\n{}",
            r#"{"layer":"taxonomy","id":"A","label":"a","parent":"B","family":"F"}"#,
            r#"{"layer":"taxonomy","id":"B","label":"b","parent":"A"}"#
        );
        assert!(err(&src).to_string().contains("cycle"));
    }

    #[test]
    fn cross_ref_may_not_repeat_primary_or_collide() {
        let src = r#"{"layer":"concept","id":"ORPHA:558","name":"M","cross_refs":["ORPHA:558"]}"#;
        assert!(matches!(err(src), GraphError::InvalidField { field: "cross_refs", .. }));
        let src = format!(
            "{}\n{}",
            r#"{"layer":"concept","id":"ORPHA:1","name":"A","cross_refs":["OMIM:100000"]}"#,
            r#"{"layer":"concept","id":"ORPHA:2","name":"B","cross_refs":["OMIM:100000"]}"#
        );
        assert!(matches!(err(&src), GraphError::Conflict { .. }));
    }

    #[test]
    fn alias_rules() {
        let src = r#"{"layer":"concept","id":"ORPHA:1","name":"A","aliases":[{"text":"x","weight":1.5}]}"#;
        assert!(matches!(err(src), GraphError::InvalidField { field: "aliases.weight", .. }));
        let src = r#"{"layer":"concept","id":"ORPHA:1","name":"A","aliases":[{"text":"Ab","lang":"en","weight":0.5},{"text":"aB","lang":"en","weight":0.5}]}"#;
        assert!(matches!(err(src), GraphError::InvalidField { field: "aliases.text", .. }));
        // same text in another language is fine
        let src = r#"{"layer":"concept","id":"ORPHA:1","name":"A","aliases":[{"text":"Ab","lang":"en","weight":0.5},{"text":"Ab","lang":"de","weight":0.5}]}"#;
        assert!(KnowledgeGraph::from_jsonl(src).is_ok());
    }

    #[test]
    fn phenotypes_must_be_hpo_and_genes_gene() {
        let src = format!(
            "{MARFAN}\n{}",
            r#"{"layer":"clinical","id":"C","concept":"ORPHA:558","phenotypes":["OMIM:154700"]}"#
        );
        assert!(matches!(err(&src), GraphError::InvalidField { field: "phenotypes", .. }));
        let src = format!(
            "{MARFAN}\n{}",
            r#"{"layer":"instance","id":"I","concept":"ORPHA:558","genes":["HP:0000001"]}"#
        );
        assert!(matches!(err(&src), GraphError::InvalidField { field: "genes", .. }));
    }

    #[test]
    fn records_are_order_independent() {
        let a = format!(
            "{}\n{MARFAN}",
            r#"{"layer":"taxonomy","id":"T","label":"t","members":["ORPHA:558"]}"#
        );
        let g = KnowledgeGraph::from_jsonl(&a).unwrap();
        assert_eq!(g.concepts()[0].links.taxonomy.as_deref(), Some("T"));
    }

    #[test]
    fn family_defaults_to_root() {
        let src = format!(
            "{MARFAN}\n{}\n{}\n{}",
            r#"{"layer":"taxonomy","id":"R","label":"r"}"#,
            r#"{"layer":"taxonomy","id":"C1","label":"c","parent":"R"}"#,
            r#"{"layer":"taxonomy","id":"C2","label":"c","parent":"C1","members":["ORPHA:558"]}"#
        );
        let g = KnowledgeGraph::from_jsonl(&src).unwrap();
        assert_eq!(g.taxonomy_node("C2").unwrap().family_id, "R");
    }
}
