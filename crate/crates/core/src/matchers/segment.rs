//! Compound terminology segmentation.
//!
//! Greedy longest match over a lexicon of (usually multiword) terms; tokens
//! not covered by a lexicon term become single-token units.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;

use crate::text::{self, Stopwords};

pub const LEXICON_UNIT_WEIGHT: f64 = 1.0;
pub const TOKEN_UNIT_WEIGHT: f64 = 0.5;
pub const STOPWORD_UNIT_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Lexicon,
    Token,
    Stopword,
}

/// A weighted span of a segmented term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemanticUnit {
    pub text: String,
    pub weight: f64,
    pub kind: UnitKind,
}

impl SemanticUnit {
    /// Number of tokens the unit spans.
    pub fn token_len(&self) -> usize {
        self.text.split(' ').count()
    }
}

/// Normalized terms, each stored as space-joined tokens.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    terms: HashSet<String>,
    max_tokens: usize,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: &str) {
        let tokens = text::tokenize(term);
        if tokens.is_empty() {
            return;
        }
        self.max_tokens = self.max_tokens.max(tokens.len());
        self.terms.insert(tokens.join(" "));
    }

    pub fn parse(source: &str) -> Self {
        let mut lex = Self::new();
        lex.extend(text::term_lines(source));
        lex
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    /// `normalized` must be space-joined normalized tokens.
    pub fn contains(&self, normalized: &str) -> bool {
        self.terms.contains(normalized)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }
}

impl<'a> Extend<&'a str> for Lexicon {
    fn extend<I: IntoIterator<Item = &'a str>>(&mut self, iter: I) {
        for term in iter {
            self.insert(term);
        }
    }
}

impl<'a> FromIterator<&'a str> for Lexicon {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let mut lex = Self::new();
        lex.extend(iter);
        lex
    }
}

#[derive(Debug, Clone, Default)]
pub struct Segmenter {
    pub lexicon: Lexicon,
    pub stopwords: Stopwords,
}

impl Segmenter {
    pub fn new(lexicon: Lexicon, stopwords: Stopwords) -> Self {
        Self { lexicon, stopwords }
    }

    pub fn segment(&self, text: &str) -> Vec<SemanticUnit> {
        self.segment_tokens(&text::tokenize(text))
    }

    /// Segments already-normalized tokens.
    pub fn segment_tokens(&self, tokens: &[String]) -> Vec<SemanticUnit> {
        let mut units = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = self.lexicon.max_tokens().min(tokens.len() - i);
            let hit = (1..=longest).rev().find_map(|len| {
                let candidate = tokens[i..i + len].join(" ");
                self.lexicon.contains(&candidate).then_some((len, candidate))
            });
            match hit {
                Some((len, text)) => {
                    units.push(SemanticUnit {
                        text,
                        weight: LEXICON_UNIT_WEIGHT,
                        kind: UnitKind::Lexicon,
                    });
                    i += len;
                }
                None => {
                    let token = &tokens[i];
                    let (weight, kind) = if self.stopwords.contains(token) {
                        (STOPWORD_UNIT_WEIGHT, UnitKind::Stopword)
                    } else {
                        (TOKEN_UNIT_WEIGHT, UnitKind::Token)
                    };
                    units.push(SemanticUnit {
                        text: token.clone(),
                        weight,
                        kind,
                    });
                    i += 1;
                }
            }
        }
        units
    }
}
