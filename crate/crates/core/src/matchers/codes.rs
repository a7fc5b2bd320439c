//! Standardized identifier extraction from free text.

use std::sync::LazyLock;

use regex::Regex;

use crate::id::{ConceptId, Namespace};

struct Pattern {
    namespace: Namespace,
    regex: Regex,
}

static PATTERNS: LazyLock<Vec<Pattern>> = LazyLock::new(|| {
    let p = |namespace, re: &str| Pattern {
        namespace,
        regex: Regex::new(re).expect("static pattern"),
    };
    vec![
        p(Namespace::Orpha, r"(?i)\bORPHA(?:NET)?\s*[:_]?\s*(\d+)\b"),
        p(Namespace::Hpo, r"(?i)\bHP\s*:\s*(\d{7})\b"),
        p(Namespace::Omim, r"(?i)\b(?:OMIM|MIM)\s*[:#]?\s*#?\s*(\d{6})\b"),
        p(Namespace::Icd11, r"(?i)\bICD-?11\s*:?\s*([0-9A-Z][A-Z][0-9A-Z]{2}(?:\.[0-9A-Z]{1,4})?)\b"),
        // a bare ICD-10 code must be uppercase; with an explicit cue any case is accepted
        p(Namespace::Icd10, r"(?i:\bICD-?10\s*:?\s*)([A-Za-z]\d{2}(?:\.[0-9A-Za-z]{1,4})?)\b"),
        p(Namespace::Icd10, r"\b([A-Z]\d{2}(?:\.[0-9A-Z]{1,4})?)\b"),
        p(Namespace::Gene, r"(?i)\bGENE\s*:\s*([A-Z0-9][A-Z0-9-]*)"),
    ]
});

static GENE_SYMBOL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[A-Z][A-Z0-9]*[A-Z0-9](?:-[A-Z0-9]+)?\b").expect("static pattern"));

/// Every standardized code mentioned in `text`, deduplicated, in order of
/// first appearance.
///
/// Recognised forms: `ORPHA:558`, `HP:0001250`, six-digit OMIM numbers with
/// an `OMIM`/`MIM` cue, ICD-10 codes (`E75.2`, optionally cued with
/// `ICD-10`), cued ICD-11 codes and cued gene symbols (`GENE:GLA`).
pub fn extract_codes(text: &str) -> Vec<ConceptId> {
    let mut hits: Vec<(usize, usize, ConceptId)> = Vec::new();
    for pattern in PATTERNS.iter() {
        for caps in pattern.regex.captures_iter(text) {
            let whole = caps.get(0).expect("group 0");
            let code = caps.get(1).expect("group 1").as_str();
            if let Ok(id) = ConceptId::new(pattern.namespace, code) {
                hits.push((whole.start(), whole.end(), id));
            }
        }
    }
    // earliest first; at equal starts the longer (more specific) match wins
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out: Vec<ConceptId> = Vec::new();
    let mut covered = 0;
    for (start, end, id) in hits {
        if start < covered {
            continue;
        }
        covered = end;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

/// Gene mentions: explicit `GENE:` codes plus bare uppercase symbols such as
/// `GLA` or `C9ORF72`.
///
/// Bare symbols are over-inclusive by nature (`DNA`, `ALS`); callers are
/// expected to intersect the result with genes they actually know.
pub fn gene_mentions(text: &str) -> Vec<ConceptId> {
    let mut out: Vec<ConceptId> = extract_codes(text)
        .into_iter()
        .filter(|c| c.namespace() == Namespace::Gene)
        .collect();
    for m in GENE_SYMBOL.find_iter(text) {
        // skip the namespace prefixes of codes themselves
        let after = &text[m.end()..];
        if after.starts_with(':') {
            continue;
        }
        if let Ok(id) = ConceptId::new(Namespace::Gene, m.as_str()) {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}
