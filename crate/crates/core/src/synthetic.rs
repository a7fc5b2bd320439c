//! Seeded synthetic knowledge graphs with all three layers populated, plus
//! matching query corpora. Used by tests and benchmarks.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::eval::CorpusCase;
use crate::text;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr", "gl", "pl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "n", "r", "s", "l", "x", "m"];
const SUFFIXES: &[&str] = &["syndrome", "disease", "dystrophy", "deficiency", "anomaly", "disorder"];
const ROOT_LABELS: &[&str] = &[
    "Rare neurological disease",
    "Rare metabolic disease",
    "Rare connective tissue disease",
    "Rare renal disease",
    "Rare hematologic disease",
];
const PHENOTYPES: &[&str] = &[
    "HP:0001250", "HP:0001251", "HP:0001252", "HP:0001324", "HP:0001083", "HP:0001166", "HP:0002650",
    "HP:0000093", "HP:0001014", "HP:0002240", "HP:0001744", "HP:0001903", "HP:0000518", "HP:0000365",
    "HP:0001638", "HP:0004322",
];
const FEATURES: &[&str] = &[
    "progressive muscle weakness",
    "recurrent seizures",
    "lens dislocation",
    "enlarged liver",
    "bone pain",
    "chronic fatigue",
    "hearing loss",
    "skin lesions",
    "joint laxity",
    "kidney stones",
    "visual impairment",
    "developmental regression",
    "cardiac arrhythmia",
    "frequent infections",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub concepts: usize,
    pub roots: usize,
    pub families_per_root: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            concepts: 50,
            roots: 3,
            families_per_root: 2,
            seed: 7,
        }
    }
}

/// One generated concept and the identifiers it was given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticConcept {
    pub orpha: String,
    pub omim: String,
    pub icd10: String,
    pub name: String,
    pub aliases: Vec<String>,
    pub gene: String,
}

#[derive(Debug, Clone)]
pub struct SyntheticGraph {
    pub concepts: Vec<SyntheticConcept>,
    pub jsonl: String,
}

struct NameGen {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl NameGen {
    fn pick<'a>(&mut self, pool: &[&'a str]) -> &'a str {
        pool[self.rng.random_range(0..pool.len())]
    }

    fn word(&mut self) -> String {
        let syllables = self.rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(self.pick(ONSETS));
            w.push_str(self.pick(VOWELS));
        }
        w.push_str(self.pick(CODAS));
        let mut chars = w.chars();
        let first = chars.next().expect("nonempty").to_ascii_uppercase();
        std::iter::once(first).chain(chars).collect()
    }

    /// A name whose normalized form and stem were never produced before.
    fn fresh(&mut self, make: impl Fn(&str, &str) -> String) -> String {
        loop {
            let stem = self.word();
            let suffix = self.pick(SUFFIXES);
            let name = make(&stem, suffix);
            let key = text::normalize(&name);
            let stem_key = text::normalize(&stem);
            if !self.used.contains(&key) && !self.used.contains(&stem_key) {
                self.used.insert(key);
                self.used.insert(stem_key);
                return name;
            }
        }
    }

    fn gene(&mut self) -> String {
        loop {
            let letters: String = (0..3).map(|_| (b'A' + self.rng.random_range(0..26u8)) as char).collect();
            let sym = format!("{letters}{}", self.rng.random_range(1..10));
            if self.used.insert(sym.clone()) {
                return sym;
            }
        }
    }

    fn weight(&mut self) -> f64 {
        self.rng.random_range(3..=10) as f64 / 10.0
    }
}

/// Distinct ICD-10 style code for the `i`-th concept; unique below 260 000.
fn icd10_code(i: usize) -> String {
    let letter = (b'A' + (i / 10_000 % 26) as u8) as char;
    format!("ICD10:{letter}{:02}.{:02}", i / 100 % 100, i % 100)
}

/// Generates a graph. Identical specs give identical output.
pub fn generate(spec: &SyntheticSpec) -> SyntheticGraph {
    let mut g = NameGen {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        used: HashSet::new(),
    };
    let roots = spec.roots.clamp(1, ROOT_LABELS.len());
    let families = roots * spec.families_per_root.max(1);
    let mut lines = Vec::new();
    let mut concepts = Vec::new();

    for i in 0..spec.concepts {
        let name = g.fresh(|stem, suffix| format!("{stem} {suffix}"));
        let alias_en = g.fresh(|stem, suffix| format!("{stem}-{} {suffix}", name[..1].to_lowercase()));
        let alias_fr = g.fresh(|stem, _| format!("maladie de {stem}"));
        let c = SyntheticConcept {
            orpha: format!("ORPHA:{}", 90000 + i),
            omim: format!("OMIM:{}", 600000 + i),
            icd10: icd10_code(i),
            name,
            aliases: vec![alias_en, alias_fr],
            gene: g.gene(),
        };
        let w_en = g.weight();
        let w_fr = g.weight();
        lines.push(json!({
            "layer": "concept",
            "id": c.orpha,
            "name": c.name,
            "cross_refs": [c.omim, c.icd10],
            "aliases": [
                {"text": c.aliases[0], "lang": "en", "weight": w_en, "source": "synthetic"},
                {"text": c.aliases[1], "lang": "fr", "weight": w_fr, "source": "synthetic"},
            ],
        }));
        concepts.push(c);
    }

    for (r, label) in ROOT_LABELS.iter().take(roots).enumerate() {
        lines.push(json!({"layer": "taxonomy", "id": format!("R{r}"), "label": label}));
    }
    for f in 0..families {
        let members: Vec<&str> = concepts
            .iter()
            .enumerate()
            .filter(|(i, _)| i % families == f)
            .map(|(_, c)| c.orpha.as_str())
            .collect();
        lines.push(json!({
            "layer": "taxonomy",
            "id": format!("F{f}"),
            "label": format!("{} group {}", ROOT_LABELS[f % roots], f / roots + 1),
            "parent": format!("R{}", f % roots),
            "members": members,
        }));
    }

    for (i, c) in concepts.iter().enumerate() {
        let a = g.rng.random_range(0..PHENOTYPES.len());
        let b = (a + 1 + g.rng.random_range(0..PHENOTYPES.len() - 1)) % PHENOTYPES.len();
        let mut features = Vec::new();
        let start = g.rng.random_range(0..FEATURES.len());
        for k in 0..3 {
            let weight = g.weight();
            features.push(json!({"text": FEATURES[(start + k * 5) % FEATURES.len()], "weight": weight}));
        }
        lines.push(json!({
            "layer": "clinical",
            "id": format!("CP-{i}"),
            "concept": c.orpha,
            "phenotypes": [PHENOTYPES[a], PHENOTYPES[b]],
            "features": features,
            "criteria": [format!("molecular confirmation in {}", c.gene)],
        }));
        lines.push(json!({
            "layer": "instance",
            "id": format!("IR-{i}"),
            "concept": c.orpha,
            "case": format!("Patient with {} confirmed by {} sequencing.", c.name, c.gene),
            "pathway": ["clinical examination", "gene panel"],
            "genes": [format!("GENE:{}", c.gene)],
        }));
    }

    let jsonl = lines.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("\n") + "\n";
    SyntheticGraph { concepts, jsonl }
}

impl SyntheticGraph {
    /// `count` cases alternating between a name or alias of a concept
    /// (category "name") and one of its codes (category "code").
    pub fn exact_queries(&self, count: usize) -> Vec<CorpusCase> {
        let n = self.concepts.len().max(1);
        (0..count)
            .map(|i| {
                let c = &self.concepts[(i * 7) % n];
                let (question, category) = if i % 2 == 0 {
                    let names = [&c.name, &c.aliases[0], &c.aliases[1]];
                    (names[(i / 2) % 3].clone(), "name")
                } else {
                    let codes = [&c.orpha, &c.omim, &c.icd10];
                    (codes[(i / 2) % 3].clone(), "code")
                };
                CorpusCase {
                    case_id: format!("q{:02}", i + 1),
                    question,
                    gold_concepts: [c.orpha.parse().expect("generated id")].into(),
                    category: Some(category.into()),
                    language: None,
                }
            })
            .collect()
    }
}
