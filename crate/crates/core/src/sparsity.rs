//! Adaptive sparsity: how many concepts a query is allowed to activate.
//!
//! Query complexity is a weighted sum of four bounded factors (length,
//! terminology density, semantic complexity, multi-system involvement); the
//! activation count scales with complexity and graph size, clamped to
//! `[k_min, k_max]`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matchers::{QueryTerm, UnitKind};
use crate::text;

const SHIPPED_ORGAN_SYSTEMS: &str = include_str!("../data/organ_systems.toml");

/// Tokens at which the length factor saturates.
pub const LENGTH_SATURATION: f64 = 50.0;
/// Clauses at which the clause part of semantic complexity saturates.
pub const CLAUSE_SATURATION: f64 = 4.0;

const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "while", "whereas", "although", "though", "because", "et", "ou", "mais", "und",
    "oder", "aber", "pero",
];

static SENTENCE_BREAK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.;!?]+(?:\s|$)").expect("static pattern"));

#[derive(Debug, Error, PartialEq)]
pub enum SparsityError {
    #[error("k_min must be at least 1")]
    ZeroKMin,
    #[error("k_min {k_min} exceeds k_max {k_max}")]
    KRange { k_min: usize, k_max: usize },
    #[error("alpha must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("complexity weights must be non-negative with a positive sum")]
    Weights,
    #[error("organ-system table: {0}")]
    OrganTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSparsity", into = "RawSparsity")]
pub struct SparsityConfig {
    k_min: usize,
    k_max: usize,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSparsity {
    k_min: usize,
    k_max: usize,
    alpha: f64,
}

impl TryFrom<RawSparsity> for SparsityConfig {
    type Error = SparsityError;
    fn try_from(r: RawSparsity) -> Result<Self, Self::Error> {
        SparsityConfig::new(r.k_min, r.k_max, r.alpha)
    }
}

impl From<SparsityConfig> for RawSparsity {
    fn from(c: SparsityConfig) -> Self {
        RawSparsity {
            k_min: c.k_min,
            k_max: c.k_max,
            alpha: c.alpha,
        }
    }
}

impl Default for SparsityConfig {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 20,
            alpha: 0.002,
        }
    }
}

impl SparsityConfig {
    pub fn new(k_min: usize, k_max: usize, alpha: f64) -> Result<Self, SparsityError> {
        if k_min == 0 {
            return Err(SparsityError::ZeroKMin);
        }
        if k_min > k_max {
            return Err(SparsityError::KRange { k_min, k_max });
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(SparsityError::Alpha(alpha));
        }
        Ok(Self { k_min, k_max, alpha })
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Adaptive activation count: `max(k_min, min(k_max, round(α·|C|·complexity)))`
/// with round-half-up.
pub fn adaptive_k(config: &SparsityConfig, concept_count: usize, complexity_total: f64) -> usize {
    let complexity = if complexity_total.is_nan() { 0.0 } else { complexity_total.clamp(0.0, 1.0) };
    let raw = config.alpha * concept_count as f64 * complexity;
    let rounded = (raw + 0.5).floor();
    // beyond k_max the exact integer no longer matters
    let k = if rounded >= config.k_max as f64 { config.k_max } else { rounded as usize };
    k.clamp(config.k_min, config.k_max)
}

/// Weights of the length, terminology-density, semantic-complexity and
/// multi-system factors. Always sums to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ComplexityWeights([f64; 4]);

impl Default for ComplexityWeights {
    fn default() -> Self {
        Self([0.25; 4])
    }
}

impl TryFrom<[f64; 4]> for ComplexityWeights {
    type Error = SparsityError;
    fn try_from(raw: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(raw)
    }
}

impl From<ComplexityWeights> for [f64; 4] {
    fn from(w: ComplexityWeights) -> Self {
        w.0
    }
}

impl ComplexityWeights {
    pub fn new(raw: [f64; 4]) -> Result<Self, SparsityError> {
        let sum: f64 = raw.iter().sum();
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
            return Err(SparsityError::Weights);
        }
        Ok(Self(raw.map(|w| w / sum)))
    }

    pub fn get(&self) -> [f64; 4] {
        self.0
    }

    pub fn combine(&self, factors: [f64; 4]) -> f64 {
        self.0.iter().zip(factors).map(|(b, f)| b * f).sum::<f64>().clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityBreakdown {
    pub length_factor: f64,
    pub term_density: f64,
    pub semantic_complexity: f64,
    pub multisystem_factor: f64,
    pub total: f64,
}

impl ComplexityBreakdown {
    pub fn factors(&self) -> [f64; 4] {
        [
            self.length_factor,
            self.term_density,
            self.semantic_complexity,
            self.multisystem_factor,
        ]
    }
}

/// Body-system keyword table.
#[derive(Debug, Clone)]
pub struct OrganSystems {
    categories: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct OrganFile {
    categories: BTreeMap<String, Vec<String>>,
}

impl Default for OrganSystems {
    fn default() -> Self {
        Self::parse(SHIPPED_ORGAN_SYSTEMS).expect("shipped organ-system table is well formed")
    }
}

impl OrganSystems {
    pub fn parse(source: &str) -> Result<Self, SparsityError> {
        let file: OrganFile = toml::from_str(source).map_err(|e| SparsityError::OrganTable(e.to_string()))?;
        if file.categories.is_empty() {
            return Err(SparsityError::OrganTable("no categories".into()));
        }
        let categories = file
            .categories
            .into_iter()
            .map(|(name, kws)| (name, kws.iter().map(|k| text::normalize(k)).filter(|k| !k.is_empty()).collect()))
            .collect();
        Ok(Self { categories })
    }

    pub fn from_file(path: &Path) -> Result<Self, SparsityError> {
        let source = std::fs::read_to_string(path).map_err(|e| SparsityError::OrganTable(e.to_string()))?;
        Self::parse(&source)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Categories with at least one keyword among `tokens`.
    pub fn systems_hit<'a>(&'a self, tokens: &[String]) -> BTreeSet<&'a str> {
        self.categories
            .iter()
            .filter(|(_, kws)| {
                kws.iter().any(|kw| {
                    tokens.iter().any(|t| {
                        if kw.chars().count() >= 4 {
                            t.starts_with(kw.as_str())
                        } else {
                            t == kw
                        }
                    })
                })
            })
            .map(|(name, _)| name.as_str())
            .collect()
    }
}

/// Number of clauses: sentence pieces further split at conjunctions,
/// counting only pieces that contain a token.
pub fn clause_count(raw_text: &str) -> usize {
    SENTENCE_BREAK
        .split(raw_text)
        .map(|sentence| {
            let tokens = text::tokenize(sentence);
            tokens
                .split(|t| CONJUNCTIONS.contains(&t.as_str()))
                .filter(|run| !run.is_empty())
                .count()
        })
        .sum()
}

/// Complexity of a prepared query. Terminology density counts the tokens
/// covered by lexicon units of the query's segmentation.
pub fn complexity(query: &QueryTerm, weights: &ComplexityWeights, systems: &OrganSystems) -> ComplexityBreakdown {
    let n = query.tokens.len();
    if n == 0 {
        return ComplexityBreakdown {
            length_factor: 0.0,
            term_density: 0.0,
            semantic_complexity: 0.0,
            multisystem_factor: 0.0,
            total: 0.0,
        };
    }
    let length_factor = (n as f64 / LENGTH_SATURATION).min(1.0);
    let lexicon_tokens: usize = query
        .semantic_units
        .iter()
        .filter(|u| u.kind == UnitKind::Lexicon)
        .map(|u| u.token_len())
        .sum();
    let term_density = (lexicon_tokens as f64 / n as f64).min(1.0);
    let distinct = query.tokens.iter().collect::<BTreeSet<_>>().len();
    let distinct_ratio = distinct as f64 / n as f64;
    let semantic_complexity = distinct_ratio * (clause_count(&query.raw_text) as f64 / CLAUSE_SATURATION).min(1.0);
    let multisystem_factor = (systems.systems_hit(&query.tokens).len() as f64 / systems.len() as f64).min(1.0);
    let factors = [length_factor, term_density, semantic_complexity, multisystem_factor];
    ComplexityBreakdown {
        length_factor,
        term_density,
        semantic_complexity,
        multisystem_factor,
        total: weights.combine(factors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matchers::{Lexicon, Segmenter};
    use crate::text::Stopwords;

    fn query(text: &str, lexicon: &[&str]) -> QueryTerm {
        let seg = Segmenter::new(lexicon.iter().copied().collect::<Lexicon>(), Stopwords::default());
        QueryTerm::new(text, "en", &seg)
    }

    #[test]
    fn empty_query_is_zero() {
        let c = complexity(&query("", &[]), &ComplexityWeights::default(), &OrganSystems::default());
        assert_eq!(c.factors(), [0.0; 4]);
        assert_eq!(c.total, 0.0);
    }

    #[test]
    fn saturated_query_is_one() {
        // 60 distinct lexicon tokens, 6 clauses, one keyword per body system
        let systems = [
            "seizure", "cardiac", "pulmonary", "hepatic", "renal", "myopathy", "rash", "anemia", "diabetes", "retina",
        ];
        let mut words: Vec<String> = systems.iter().map(|s| s.to_string()).collect();
        words.extend((0..50).map(|i| format!("term{i}")));
        let lexicon: Vec<&str> = words.iter().map(String::as_str).collect();
        let text = words.chunks(10).map(|c| c.join(" ")).collect::<Vec<_>>().join(". ");
        let c = complexity(&query(&text, &lexicon), &ComplexityWeights::default(), &OrganSystems::default());
        assert_eq!(c.factors(), [1.0; 4]);
        assert_eq!(c.total, 1.0);
    }

    #[test]
    fn weighted_sum_of_factors() {
        let w = ComplexityWeights::default();
        assert!((w.combine([0.4, 0.5, 0.2, 0.1]) - 0.3).abs() < 1e-12);
        let w = ComplexityWeights::new([2.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(w.get(), [0.5, 0.0, 0.0, 0.5]);
        assert!(ComplexityWeights::new([0.0; 4]).is_err());
    }

    #[test]
    fn clauses_split_on_sentences_and_conjunctions() {
        assert_eq!(clause_count(""), 0);
        assert_eq!(clause_count("seizures and ataxia. Coded E75.2; onset at 3"), 4);
        assert_eq!(clause_count("and and"), 0);
    }

    #[test]
    fn short_keywords_match_exactly() {
        let s = OrganSystems::default();
        assert!(s.systems_hit(&["early".to_string()]).is_empty());
        assert_eq!(s.systems_hit(&["ear".to_string()]).len(), 1);
        assert_eq!(s.systems_hit(&["cardiomyopathy".to_string(), "cardiac".to_string()]).len(), 1);
    }

    #[test]
    fn adaptive_k_clamps_and_rounds() {
        let cfg = SparsityConfig::default();
        assert_eq!(adaptive_k(&cfg, 10_000, 0.0), 3);
        assert_eq!(adaptive_k(&cfg, 10_000, 1.0), 20);
        assert_eq!(adaptive_k(&cfg, 10_000, 0.5), 10);
        // 0.002 · 1000 · 0.75 = 1.5 rounds half up to 2, then clamps to k_min 1
        let wide = SparsityConfig::new(1, 20, 0.002).unwrap();
        assert_eq!(adaptive_k(&wide, 1000, 0.75), 2);
        assert_eq!(adaptive_k(&wide, 1000, 0.7), 1);
        assert_eq!(adaptive_k(&cfg, usize::MAX, 1.0), 20);
    }

    #[test]
    fn sparsity_config_validation() {
        assert_eq!(SparsityConfig::new(0, 3, 0.1), Err(SparsityError::ZeroKMin));
        assert!(matches!(SparsityConfig::new(5, 3, 0.1), Err(SparsityError::KRange { .. })));
        assert!(SparsityConfig::new(1, 3, 0.0).is_err());
        assert!(SparsityConfig::new(1, 3, f64::NAN).is_err());
    }
}
