//! Standardized concept identifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Coding system a [`ConceptId`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Namespace {
    Orpha,
    Icd10,
    Icd11,
    Omim,
    Hpo,
    Gene,
    Local,
}

impl Namespace {
    pub const ALL: [Namespace; 7] = [
        Namespace::Orpha,
        Namespace::Icd10,
        Namespace::Icd11,
        Namespace::Omim,
        Namespace::Hpo,
        Namespace::Gene,
        Namespace::Local,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Namespace::Orpha => "ORPHA",
            Namespace::Icd10 => "ICD10",
            Namespace::Icd11 => "ICD11",
            Namespace::Omim => "OMIM",
            Namespace::Hpo => "HP",
            Namespace::Gene => "GENE",
            Namespace::Local => "LOCAL",
        }
    }

    fn from_prefix(prefix: &str) -> Option<Self> {
        Some(match prefix.to_ascii_uppercase().as_str() {
            "ORPHA" | "ORPHANET" => Namespace::Orpha,
            "ICD10" | "ICD-10" => Namespace::Icd10,
            "ICD11" | "ICD-11" => Namespace::Icd11,
            "OMIM" | "MIM" => Namespace::Omim,
            "HP" | "HPO" => Namespace::Hpo,
            "GENE" => Namespace::Gene,
            "LOCAL" => Namespace::Local,
            _ => return None,
        })
    }

    /// Checks a canonical (trimmed, uppercased) code against this
    /// namespace's syntax.
    fn accepts(self, code: &str) -> bool {
        let b = code.as_bytes();
        let digits = |s: &[u8]| !s.is_empty() && s.iter().all(u8::is_ascii_digit);
        let alnum = |c: &u8| c.is_ascii_uppercase() || c.is_ascii_digit();
        let suffix_ok = |rest: &[u8]| match rest {
            [] => true,
            [b'.', tail @ ..] => (1..=4).contains(&tail.len()) && tail.iter().all(alnum),
            _ => false,
        };
        match self {
            Namespace::Orpha => digits(b),
            Namespace::Omim => b.len() == 6 && digits(b),
            Namespace::Icd10 => {
                b.len() >= 3 && b[0].is_ascii_uppercase() && digits(&b[1..3]) && suffix_ok(&b[3..])
            }
            Namespace::Icd11 => {
                b.len() >= 4
                    && alnum(&b[0])
                    && b[1].is_ascii_uppercase()
                    && b[2..4].iter().all(alnum)
                    && suffix_ok(&b[4..])
            }
            Namespace::Hpo => b.len() == 10 && b.starts_with(b"HP:") && digits(&b[3..]),
            Namespace::Gene => {
                !b.is_empty() && alnum(&b[0]) && b.iter().all(|c| alnum(c) || *c == b'-')
            }
            Namespace::Local => !code.is_empty() && !code.chars().any(char::is_whitespace),
        }
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("identifier `{0}` has no recognised namespace prefix")]
    UnknownNamespace(String),
    #[error("code `{code}` does not match {namespace} syntax")]
    Syntax { namespace: Namespace, code: String },
}

/// A namespaced identifier such as `ORPHA:558`, `OMIM:154700` or
/// `HP:0001250`.
///
/// Codes are stored trimmed and uppercased so equality, hashing and ordering
/// are case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId {
    namespace: Namespace,
    code: String,
}

impl ConceptId {
    pub fn new(namespace: Namespace, code: &str) -> Result<Self, IdError> {
        let mut code = code.trim().to_uppercase();
        if namespace == Namespace::Hpo && !code.starts_with("HP:") {
            code = format!("HP:{code}");
        }
        if !namespace.accepts(&code) {
            return Err(IdError::Syntax { namespace, code });
        }
        Ok(Self { namespace, code })
    }

    pub fn namespace(&self) -> Namespace {
        self.namespace
    }

    pub fn code(&self) -> &str {
        &self.code
    }
}

impl FromStr for ConceptId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (prefix, rest) = s
            .split_once(':')
            .ok_or_else(|| IdError::UnknownNamespace(s.to_string()))?;
        let namespace =
            Namespace::from_prefix(prefix.trim()).ok_or_else(|| IdError::UnknownNamespace(s.to_string()))?;
        match namespace {
            // `HP:0001250` carries the prefix inside the code; `HPO:HP:0001250` too.
            Namespace::Hpo if prefix.eq_ignore_ascii_case("HP") => ConceptId::new(namespace, s),
            _ => ConceptId::new(namespace, rest),
        }
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.namespace {
            Namespace::Hpo => f.write_str(&self.code),
            ns => write!(f, "{}:{}", ns.prefix(), self.code),
        }
    }
}

impl Serialize for ConceptId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConceptId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ConceptId {
        s.parse().unwrap()
    }

    #[test]
    fn parses_each_namespace() {
        assert_eq!(id("ORPHA:558").namespace(), Namespace::Orpha);
        assert_eq!(id("orphanet:558"), id("ORPHA:558"));
        assert_eq!(id("OMIM:154700").code(), "154700");
        assert_eq!(id("ICD10:E75.2").namespace(), Namespace::Icd10);
        assert_eq!(id("ICD-11:5C56.0").namespace(), Namespace::Icd11);
        assert_eq!(id("HP:0001250").to_string(), "HP:0001250");
        assert_eq!(id("hpo:HP:0001250"), id("HP:0001250"));
        assert_eq!(id("GENE:gla").to_string(), "GENE:GLA");
        assert_eq!(id("LOCAL:x-1").namespace(), Namespace::Local);
    }

    #[test]
    fn equality_ignores_case_and_padding() {
        assert_eq!(id(" icd10:e75.2 "), id("ICD10:E75.2"));
    }

    #[test]
    fn rejects_bad_syntax() {
        assert!(matches!("OMIM:12345".parse::<ConceptId>(), Err(IdError::Syntax { .. })));
        assert!("ORPHA:55a".parse::<ConceptId>().is_err());
        assert!("ICD10:E7".parse::<ConceptId>().is_err());
        assert!("ICD10:E75.23456".parse::<ConceptId>().is_err());
        assert!("HP:000125".parse::<ConceptId>().is_err());
        assert!("GENE:GL A".parse::<ConceptId>().is_err());
        assert!("LOCAL:".parse::<ConceptId>().is_err());
        assert!(matches!("FOO:1".parse::<ConceptId>(), Err(IdError::UnknownNamespace(_))));
        assert!("558".parse::<ConceptId>().is_err());
    }

    #[test]
    fn serde_uses_display_form() {
        let json = serde_json::to_string(&id("omim:154700")).unwrap();
        assert_eq!(json, "\"OMIM:154700\"");
        let back: ConceptId = serde_json::from_str(&json).unwrap();
        assert_eq!(back, id("OMIM:154700"));
    }
}
