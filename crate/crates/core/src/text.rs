//! Text normalization shared by the index, the matchers and the complexity
//! estimator.
//!
//! Normalization is NFKC, lowercase, punctuation removed except hyphens and
//! apostrophes that sit between two word characters, then split on
//! whitespace. Apostrophes are dropped in place (`crohn's` becomes `crohns`),
//! every other punctuation mark acts as a token boundary.

use std::collections::HashSet;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

const SHIPPED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

fn is_hyphen(c: char) -> bool {
    matches!(c, '-' | '\u{2010}' | '\u{2011}')
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

/// Splits `text` into normalized tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let folded: Vec<char> = text.nfkc().collect::<String>().to_lowercase().chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in folded.iter().enumerate() {
        let next_is_word = folded.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_hyphen(c) && !current.is_empty() && next_is_word {
            current.push('-');
        } else if is_apostrophe(c) && !current.is_empty() && next_is_word {
            continue;
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Normalized form of a whole string: its tokens joined by single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Reads a one-term-per-line file. Blank lines and `#` comments are skipped.
pub(crate) fn term_lines(source: &str) -> impl Iterator<Item = &str> {
    source
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// A set of normalized stopwords.
#[derive(Debug, Clone)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(SHIPPED_STOPWORDS)
    }
}

impl Stopwords {
    pub fn parse(source: &str) -> Self {
        let words = term_lines(source).map(normalize).filter(|w| !w.is_empty()).collect();
        Self { words }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn empty() -> Self {
        Self { words: HashSet::new() }
    }

    /// `token` must already be normalized.
    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        assert_eq!(tokenize("Fabry disease, (type I)."), ["fabry", "disease", "type", "i"]);
    }

    #[test]
    fn intra_token_hyphen_is_kept() {
        assert_eq!(tokenize("Niemann-Pick - type C-"), ["niemann-pick", "type", "c"]);
    }

    #[test]
    fn apostrophe_joins() {
        assert_eq!(tokenize("Crohn's disease"), ["crohns", "disease"]);
    }

    #[test]
    fn nfkc_folds_compatibility_forms() {
        // fullwidth letters and the "ﬁ" ligature
        assert_eq!(tokenize("ＡＬＳ ﬁbrosis"), ["als", "fibrosis"]);
    }

    #[test]
    fn code_punctuation_splits() {
        assert_eq!(tokenize("ORPHA:558"), ["orpha", "558"]);
    }

    #[test]
    fn shipped_stopwords_are_loaded() {
        let sw = Stopwords::default();
        assert!(sw.contains("the"));
        assert!(sw.contains("und"));
        assert!(!sw.contains("sclerosis"));
        assert!(sw.len() > 150);
    }
}
