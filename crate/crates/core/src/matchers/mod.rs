//! The four complementary matchers: standardized code, compound term,
//! biomedical variant and multilingual similarity.
//!
//! Each matcher compares a [`QueryTerm`] against a [`Concept`] and yields a
//! [`MatchScore`] in `[0, 1]` together with a short evidence trail.

pub mod codes;
pub mod phonetic;
pub mod segment;
pub mod similarity;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codes::{extract_codes, gene_mentions};
pub use phonetic::{translit_similarity, PhoneticTable};
pub use segment::{Lexicon, SemanticUnit, Segmenter, UnitKind};
pub use similarity::{
    abbr_similarity, bigram_dice, char_similarity, partial_similarity, semantic_similarity, unit_similarity,
    SimilarityProvider, TrigramCosine,
};

use crate::id::ConceptId;
use crate::kg::Concept;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("unsegmentable term")]
    UnsegmentableTerm,
    #[error("combination weights must be non-negative with a positive sum")]
    InvalidWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Code,
    Term,
    Variant,
    Multilingual,
}

impl MatchMethod {
    pub const ALL: [MatchMethod; 4] = [
        MatchMethod::Code,
        MatchMethod::Term,
        MatchMethod::Variant,
        MatchMethod::Multilingual,
    ];
}

impl fmt::Display for MatchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMethod::Code => "code",
            MatchMethod::Term => "term",
            MatchMethod::Variant => "variant",
            MatchMethod::Multilingual => "multilingual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchScore {
    pub value: f64,
    pub method: MatchMethod,
    pub evidence: Vec<String>,
}

impl MatchScore {
    fn new(method: MatchMethod, value: f64, evidence: Vec<String>) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            method,
            evidence,
        }
    }

    fn zero(method: MatchMethod) -> Self {
        Self::new(method, 0.0, Vec::new())
    }
}

/// A query prepared for matching.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryTerm {
    pub raw_text: String,
    pub language: String,
    pub tokens: Vec<String>,
    /// Tokens joined by single spaces.
    pub normalized: String,
    pub extracted_codes: Vec<ConceptId>,
    pub semantic_units: Vec<SemanticUnit>,
}

impl QueryTerm {
    pub fn new(raw_text: &str, language: &str, segmenter: &Segmenter) -> Self {
        let tokens = text::tokenize(raw_text);
        let semantic_units = segmenter.segment_tokens(&tokens);
        Self {
            raw_text: raw_text.to_string(),
            language: language.to_string(),
            normalized: tokens.join(" "),
            extracted_codes: extract_codes(raw_text),
            semantic_units,
            tokens,
        }
    }
}

/// Compound-term score between two segmented terms:
///
/// ```text
/// Σ_i Σ_j c(S_i, T_j) · w(S_i) · w(T_j)  /  (Σ_i w(S_i) · Σ_j w(T_j))
/// ```
///
/// with `c` the graded [`unit_similarity`].
pub fn term_match(source: &[SemanticUnit], target: &[SemanticUnit]) -> Result<MatchScore, MatchError> {
    if source.is_empty() || target.is_empty() {
        return Err(MatchError::UnsegmentableTerm);
    }
    let src: Vec<String> = source.iter().map(|u| text::normalize(&u.text)).collect();
    let tgt: Vec<String> = target.iter().map(|u| text::normalize(&u.text)).collect();
    let mut numerator = 0.0;
    for (s, su) in src.iter().zip(source) {
        for (t, tu) in tgt.iter().zip(target) {
            numerator += similarity::text_unit_similarity(s, t) * su.weight * tu.weight;
        }
    }
    let ws: f64 = source.iter().map(|u| u.weight).sum();
    let wt: f64 = target.iter().map(|u| u.weight).sum();
    let denominator = ws * wt;
    let value = if denominator > 0.0 { numerator / denominator } else { 0.0 };
    Ok(MatchScore::new(MatchMethod::Term, value, Vec::new()))
}

/// Weights of the multilingual combination, in the order
/// transliteration, character, embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct CombineWeights([f64; 3]);

impl TryFrom<[f64; 3]> for CombineWeights {
    type Error = MatchError;
    fn try_from(raw: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(raw)
    }
}

impl From<CombineWeights> for [f64; 3] {
    fn from(w: CombineWeights) -> Self {
        w.0
    }
}

impl Default for CombineWeights {
    fn default() -> Self {
        Self([1.0 / 3.0; 3])
    }
}

impl CombineWeights {
    /// Normalizes to a convex combination.
    pub fn new(raw: [f64; 3]) -> Result<Self, MatchError> {
        let sum: f64 = raw.iter().sum();
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
            return Err(MatchError::InvalidWeights);
        }
        Ok(Self(raw.map(|w| w / sum)))
    }

    pub fn get(&self) -> [f64; 3] {
        self.0
    }

    pub fn combine(&self, translit: f64, chars: f64, embedding: f64) -> f64 {
        let [a, b, c] = self.0;
        (a * translit + b * chars + c * embedding).clamp(0.0, 1.0)
    }
}

/// Component scores of a variant match against one name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantComponents {
    pub abbreviation: f64,
    pub partial: f64,
    pub semantic: f64,
}

/// Component scores of a multilingual match against one name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultilingualComponents {
    pub transliteration: f64,
    pub character: f64,
    pub embedding: f64,
}

/// The matcher suite together with its shared resources.
#[derive(Debug, Clone)]
pub struct Matchers {
    pub segmenter: Segmenter,
    pub phonetic: PhoneticTable,
    pub semantic: Arc<dyn SimilarityProvider>,
    pub combine: CombineWeights,
}

impl Default for Matchers {
    fn default() -> Self {
        Self::new(Segmenter::default())
    }
}

impl Matchers {
    pub fn new(segmenter: Segmenter) -> Self {
        Self {
            segmenter,
            phonetic: PhoneticTable::default(),
            semantic: Arc::new(TrigramCosine),
            combine: CombineWeights::default(),
        }
    }

    pub fn query(&self, raw_text: &str, language: &str) -> QueryTerm {
        QueryTerm::new(raw_text, language, &self.segmenter)
    }

    /// Standardized code matching: 1.0 on a shared code, 0.8 on a standard
    /// name match, otherwise the authority-weighted count of matching
    /// aliases, clamped to 1.
    pub fn code_match(&self, source: &QueryTerm, target: &Concept) -> MatchScore {
        if let Some(code) = source.extracted_codes.iter().find(|c| target.has_code(c)) {
            return MatchScore::new(MatchMethod::Code, 1.0, vec![format!("code {code}")]);
        }
        if source.normalized.is_empty() {
            return MatchScore::zero(MatchMethod::Code);
        }
        if text::normalize(&target.standard_name) == source.normalized {
            return MatchScore::new(MatchMethod::Code, 0.8, vec!["standard name".into()]);
        }
        let mut sum = 0.0;
        let mut evidence = Vec::new();
        for alias in &target.aliases {
            if text::normalize(&alias.text) == source.normalized {
                sum += alias.authority_weight;
                evidence.push(format!("alias `{}` ({})", alias.text, alias.authority_weight));
            }
        }
        MatchScore::new(MatchMethod::Code, sum, evidence)
    }

    /// Compound-term matching against the best of the concept's names.
    pub fn term_match(&self, source: &QueryTerm, target: &Concept) -> MatchScore {
        let mut best = MatchScore::zero(MatchMethod::Term);
        for name in target.names() {
            let units = self.segmenter.segment(name);
            if let Ok(score) = term_match(&source.semantic_units, &units) {
                if score.value > best.value {
                    best = MatchScore::new(MatchMethod::Term, score.value, vec![format!("name `{name}`")]);
                }
            }
        }
        best
    }

    /// The three variant components for one pair of texts.
    pub fn variant_components(&self, source: &str, name: &str) -> VariantComponents {
        let (ts, tn) = (text::tokenize(source), text::tokenize(name));
        VariantComponents {
            abbreviation: similarity::abbr_tokens(&ts, &tn),
            partial: similarity::partial_tokens(&ts, &tn),
            semantic: self.semantic.similarity(&ts.join(" "), &tn.join(" ")).clamp(0.0, 1.0),
        }
    }

    /// Variant matching: the largest of abbreviation, partial and semantic
    /// similarity over all of the concept's names.
    pub fn variant_match(&self, source: &QueryTerm, target: &Concept) -> MatchScore {
        let mut best = MatchScore::zero(MatchMethod::Variant);
        for name in target.names() {
            let c = self.variant_components(&source.raw_text, name);
            let (label, value) = [("abbreviation", c.abbreviation), ("partial", c.partial), ("semantic", c.semantic)]
                .into_iter()
                .fold(("abbreviation", f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
            if value > best.value {
                best = MatchScore::new(MatchMethod::Variant, value, vec![format!("{label} vs `{name}`")]);
            }
        }
        best
    }

    pub fn multilingual_components(&self, source: &str, name: &str) -> MultilingualComponents {
        let ns = text::normalize(source);
        self.components_with_key(&ns, &self.phonetic.key(&ns), name)
    }

    fn components_with_key(&self, ns: &str, source_key: &str, name: &str) -> MultilingualComponents {
        let nn = text::normalize(name);
        MultilingualComponents {
            transliteration: phonetic::key_similarity(source_key, &self.phonetic.key(&nn)),
            character: similarity::char_normalized(ns, &nn),
            embedding: self.semantic.similarity(ns, &nn).clamp(0.0, 1.0),
        }
    }

    /// Multilingual matching: convex combination of transliteration,
    /// character and embedding similarity against the best-scoring name.
    pub fn multilingual_match(&self, source: &QueryTerm, target: &Concept) -> MatchScore {
        let ns = text::normalize(&source.raw_text);
        let source_key = self.phonetic.key(&ns);
        let mut best = MatchScore::zero(MatchMethod::Multilingual);
        for name in target.names() {
            let c = self.components_with_key(&ns, &source_key, name);
            let value = self.combine.combine(c.transliteration, c.character, c.embedding);
            if value > best.value {
                best = MatchScore::new(
                    MatchMethod::Multilingual,
                    value,
                    vec![format!(
                        "`{name}`: trans {:.3} char {:.3} emb {:.3}",
                        c.transliteration, c.character, c.embedding
                    )],
                );
            }
        }
        best
    }

    pub fn run(&self, method: MatchMethod, source: &QueryTerm, target: &Concept) -> MatchScore {
        match method {
            MatchMethod::Code => self.code_match(source, target),
            MatchMethod::Term => self.term_match(source, target),
            MatchMethod::Variant => self.variant_match(source, target),
            MatchMethod::Multilingual => self.multilingual_match(source, target),
        }
    }
}
