//! Phonetic keys for cross-script and cross-spelling comparison.
//!
//! A key is built in two steps: romanize through the grapheme table (longest
//! grapheme first), then fold each word to its consonant skeleton (first
//! letter kept, later vowels dropped, repeated letters collapsed).

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use super::similarity::bigram_dice;
use crate::text;

const SHIPPED_TABLE: &str = include_str!("../../data/phonetic.tsv");

#[derive(Debug, Error)]
#[error("phonetic table line {line}: expected `grapheme<TAB>key`")]
pub struct PhoneticTableError {
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct PhoneticTable {
    rules: HashMap<String, String>,
    longest: usize,
}

impl Default for PhoneticTable {
    fn default() -> Self {
        Self::parse(SHIPPED_TABLE).expect("shipped phonetic table is well formed")
    }
}

impl PhoneticTable {
    pub fn parse(source: &str) -> Result<Self, PhoneticTableError> {
        let mut rules = HashMap::new();
        let mut longest = 0;
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (grapheme, key) = line.split_once('\t').ok_or(PhoneticTableError { line: i + 1 })?;
            let grapheme = grapheme.trim().to_lowercase();
            if grapheme.is_empty() {
                return Err(PhoneticTableError { line: i + 1 });
            }
            longest = longest.max(grapheme.chars().count());
            rules.insert(grapheme, key.trim().to_lowercase());
        }
        Ok(Self { rules, longest })
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let source = std::fs::read_to_string(path)?;
        Self::parse(&source).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Romanized form of a normalized word.
    fn romanize(&self, word: &str) -> String {
        let bounds: Vec<usize> = word.char_indices().map(|(b, _)| b).chain([word.len()]).collect();
        let chars = bounds.len() - 1;
        let mut out = String::with_capacity(word.len());
        let mut i = 0;
        while i < chars {
            let span = self.longest.min(chars - i);
            let hit = (1..=span)
                .rev()
                .find_map(|len| self.rules.get(&word[bounds[i]..bounds[i + len]]).map(|k| (len, k)));
            match hit {
                Some((len, key)) => {
                    out.push_str(key);
                    i += len;
                }
                None => {
                    out.push_str(&word[bounds[i]..bounds[i + 1]]);
                    i += 1;
                }
            }
        }
        out
    }

    /// Phonetic key of arbitrary text: one skeleton per normalized token,
    /// joined by spaces.
    pub fn key(&self, input: &str) -> String {
        text::tokenize(input)
            .iter()
            .map(|w| skeleton(&self.romanize(w)))
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Dice over bigrams of the two phonetic keys; 1.0 when the keys agree.
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        key_similarity(&self.key(a), &self.key(b))
    }
}

/// Similarity of two precomputed keys.
pub fn key_similarity(ka: &str, kb: &str) -> f64 {
    if ka == kb {
        return 1.0;
    }
    bigram_dice(ka, kb)
}

fn skeleton(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut last: Option<char> = None;
    for (i, c) in word.chars().enumerate() {
        if i > 0 && matches!(c, 'a' | 'e' | 'i' | 'o' | 'u') {
            continue;
        }
        if last != Some(c) {
            out.push(c);
        }
        last = Some(c);
    }
    out
}

/// Transliteration similarity with the shipped table.
pub fn translit_similarity(a: &str, b: &str) -> f64 {
    static TABLE: std::sync::LazyLock<PhoneticTable> = std::sync::LazyLock::new(PhoneticTable::default);
    TABLE.similarity(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_fold_scripts_together() {
        let t = PhoneticTable::default();
        assert_eq!(t.key("Huntington"), "hntngtn");
        assert_eq!(t.key("Хантингтон"), "hntngtn");
        assert_eq!(t.key("Wilson"), "vlsn");
        assert_eq!(t.key("Вильсон"), "vlsn");
        assert_eq!(t.key("Niemann-Pick"), "nmn-pk");
        assert_eq!(t.key("Ниманна-Пика"), "nmn-pk");
    }

    #[test]
    fn identical_and_disjoint() {
        assert_eq!(translit_similarity("pompe disease", "pompe disease"), 1.0);
        assert_eq!(translit_similarity("bbbb", "tttt"), 0.0);
    }

    #[test]
    fn malformed_table_line() {
        assert_eq!(PhoneticTable::parse("ph\tf\nbad\n").unwrap_err().line, 2);
        let t = PhoneticTable::parse("ъ\t\n").unwrap();
        assert_eq!(t.key("аъб"), "аб");
    }
}
