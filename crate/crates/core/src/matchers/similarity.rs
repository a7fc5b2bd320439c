//! String similarity primitives. Every function returns a value in `[0, 1]`
//! and compares normalized text, so case and punctuation never matter.
//!
//! The symmetric primitives (unit, semantic, character, transliteration)
//! use integer counts internally so that swapping arguments gives a
//! bit-identical result.

use std::collections::BTreeSet;

use super::segment::SemanticUnit;
use crate::text;

/// Character bigrams of `s`.
pub(crate) fn bigrams(s: &str) -> Vec<(char, char)> {
    let chars: Vec<char> = s.chars().collect();
    chars.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Size of the multiset intersection of two sorted slices.
fn sorted_intersection<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Dice coefficient over character-bigram multisets: `2|A∩B| / (|A|+|B|)`.
/// Zero when either side has no bigram.
pub fn bigram_dice(a: &str, b: &str) -> f64 {
    let mut x = bigrams(a);
    let mut y = bigrams(b);
    if x.is_empty() || y.is_empty() {
        return 0.0;
    }
    x.sort_unstable();
    y.sort_unstable();
    let shared = sorted_intersection(&x, &y);
    (2 * shared) as f64 / (x.len() + y.len()) as f64
}

/// Matching degree between two semantic units.
pub fn unit_similarity(a: &SemanticUnit, b: &SemanticUnit) -> f64 {
    text_unit_similarity(&text::normalize(&a.text), &text::normalize(&b.text))
}

pub(crate) fn text_unit_similarity(a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    if a.chars().count() < 2 || b.chars().count() < 2 {
        return 0.0;
    }
    bigram_dice(a, b)
}

/// Abbreviation similarity.
///
/// One side must be a single token and the other at least two tokens.
/// Scores 1.0 when the single token, uppercased, equals the initials of the
/// longer side's tokens, 0.8 when it is a subsequence of those initials of
/// at least two letters, otherwise 0.
pub fn abbr_similarity(a: &str, b: &str) -> f64 {
    let ta = text::tokenize(a);
    let tb = text::tokenize(b);
    abbr_tokens(&ta, &tb)
}

pub(crate) fn abbr_tokens(ta: &[String], tb: &[String]) -> f64 {
    let (short, long) = match (ta.len(), tb.len()) {
        (1, n) if n >= 2 => (&ta[0], tb),
        (n, 1) if n >= 2 => (&tb[0], ta),
        _ => return 0.0,
    };
    let short: Vec<char> = short.to_uppercase().chars().collect();
    let initials: Vec<char> = long
        .iter()
        .filter_map(|t| t.chars().next())
        .flat_map(char::to_uppercase)
        .collect();
    if short == initials {
        return 1.0;
    }
    if short.len() >= 2 && is_subsequence(&short, &initials) {
        return 0.8;
    }
    0.0
}

fn is_subsequence(needle: &[char], hay: &[char]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|c| it.any(|h| h == c))
}

/// Shared distinct tokens over the distinct-token count of the shorter side.
pub fn partial_similarity(a: &str, b: &str) -> f64 {
    partial_tokens(&text::tokenize(a), &text::tokenize(b))
}

pub(crate) fn partial_tokens(ta: &[String], tb: &[String]) -> f64 {
    let sa: BTreeSet<&str> = ta.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = tb.iter().map(String::as_str).collect();
    let shorter = sa.len().min(sb.len());
    if shorter == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / shorter as f64
}

/// Semantic-equivalence scorer. The shipped implementation is a
/// character-trigram cosine; a learned embedding can be plugged in instead.
pub trait SimilarityProvider: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Similarity of two normalized strings, in `[0, 1]`.
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Cosine of character-trigram count vectors over `" " + text + " "`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramCosine;

pub(crate) fn trigram_counts(s: &str) -> Vec<([char; 3], u64)> {
    let padded: Vec<char> = std::iter::once(' ').chain(s.chars()).chain(std::iter::once(' ')).collect();
    let mut grams: Vec<[char; 3]> = padded.windows(3).map(|w| [w[0], w[1], w[2]]).collect();
    grams.sort_unstable();
    let mut counts: Vec<([char; 3], u64)> = Vec::new();
    for g in grams {
        match counts.last_mut() {
            Some((last, n)) if *last == g => *n += 1,
            _ => counts.push((g, 1)),
        }
    }
    counts
}

impl SimilarityProvider for TrigramCosine {
    fn name(&self) -> &'static str {
        "trigram-cosine"
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        let x = trigram_counts(a);
        let y = trigram_counts(b);
        let (mut i, mut j, mut dot) = (0, 0, 0u64);
        while i < x.len() && j < y.len() {
            match x[i].0.cmp(&y[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += x[i].1 * y[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let nx: u64 = x.iter().map(|(_, n)| n * n).sum();
        let ny: u64 = y.iter().map(|(_, n)| n * n).sum();
        if dot == 0 || nx == 0 || ny == 0 {
            return 0.0;
        }
        (dot as f64 / ((nx * ny) as f64).sqrt()).clamp(0.0, 1.0)
    }
}

/// Semantic similarity with the shipped trigram-cosine provider.
pub fn semantic_similarity(a: &str, b: &str) -> f64 {
    TrigramCosine.similarity(&text::normalize(a), &text::normalize(b))
}

/// One minus the Levenshtein distance over the longer length.
pub fn char_similarity(a: &str, b: &str) -> f64 {
    char_normalized(&text::normalize(a), &text::normalize(b))
}

pub(crate) fn char_normalized(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b).clamp(0.0, 1.0)
}
