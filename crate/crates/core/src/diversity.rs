//! Session-level diversity control.
//!
//! Concepts activated earlier in a session have their scores multiplied by
//! the diversity factor λ when they come up again, and each activation is
//! reported with a diversity score `1 − |active ∩ used| / |active|`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::ConceptId;

pub const DEFAULT_LAMBDA_RD: f64 = 0.7;

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("diversity undefined on empty activation")]
    EmptyActivation,
    #[error("diversity factor {0} outside [0, 1]")]
    InvalidLambda(f64),
    #[error("session file {path}: {message}")]
    SessionFile { path: String, message: String },
}

/// Concepts used so far in a session plus the diversity factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHistory {
    lambda_rd: f64,
    used_concepts: BTreeSet<ConceptId>,
}

impl Default for SessionHistory {
    fn default() -> Self {
        Self {
            lambda_rd: DEFAULT_LAMBDA_RD,
            used_concepts: BTreeSet::new(),
        }
    }
}

impl SessionHistory {
    pub fn new(lambda_rd: f64) -> Result<Self, DiversityError> {
        if !(0.0..=1.0).contains(&lambda_rd) {
            return Err(DiversityError::InvalidLambda(lambda_rd));
        }
        Ok(Self {
            lambda_rd,
            used_concepts: BTreeSet::new(),
        })
    }

    pub fn lambda_rd(&self) -> f64 {
        self.lambda_rd
    }

    pub fn used_concepts(&self) -> &BTreeSet<ConceptId> {
        &self.used_concepts
    }

    pub fn contains(&self, concept: &ConceptId) -> bool {
        self.used_concepts.contains(concept)
    }

    /// Scales `score` by λ when `concept` was used before; otherwise returns
    /// it unchanged.
    pub fn adjust_score(&self, score: f64, concept: &ConceptId) -> f64 {
        if self.contains(concept) {
            self.lambda_rd * score
        } else {
            score
        }
    }

    pub fn diversity(&self, active: &BTreeSet<ConceptId>) -> Result<DiversityReport, DiversityError> {
        if active.is_empty() {
            return Err(DiversityError::EmptyActivation);
        }
        let overlap: BTreeSet<ConceptId> = active.intersection(&self.used_concepts).cloned().collect();
        Ok(DiversityReport {
            score: 1.0 - overlap.len() as f64 / active.len() as f64,
            active: active.clone(),
            overlap,
        })
    }

    /// Adds `activated` to the used set.
    pub fn record<'a>(&mut self, activated: impl IntoIterator<Item = &'a ConceptId>) {
        self.used_concepts.extend(activated.into_iter().cloned());
    }

    pub fn load(path: &Path) -> Result<Self, DiversityError> {
        let err = |message: String| DiversityError::SessionFile {
            path: path.display().to_string(),
            message,
        };
        let raw = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let history: SessionHistory = serde_json::from_str(&raw).map_err(|e| err(e.to_string()))?;
        if !(0.0..=1.0).contains(&history.lambda_rd) {
            return Err(DiversityError::InvalidLambda(history.lambda_rd));
        }
        Ok(history)
    }

    pub fn save(&self, path: &Path) -> Result<(), DiversityError> {
        let body = serde_json::to_string_pretty(self).expect("history serializes");
        std::fs::write(path, body + "\n").map_err(|e| DiversityError::SessionFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Diversity of one activation relative to the session history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityReport {
    pub score: f64,
    pub active: BTreeSet<ConceptId>,
    pub overlap: BTreeSet<ConceptId>,
}

impl DiversityReport {
    /// Report for an activation with nothing in it.
    pub fn vacuous() -> Self {
        Self {
            score: 1.0,
            active: BTreeSet::new(),
            overlap: BTreeSet::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> ConceptId {
        s.parse().unwrap()
    }

    fn set(ids: &[&str]) -> BTreeSet<ConceptId> {
        ids.iter().map(|s| id(s)).collect()
    }

    #[test]
    fn adjust_used_and_unused() {
        let mut h = SessionHistory::new(0.5).unwrap();
        h.record(&set(&["ORPHA:1"]));
        assert_eq!(h.adjust_score(0.8, &id("ORPHA:1")), 0.4);
        assert_eq!(h.adjust_score(0.8, &id("ORPHA:2")), 0.8);
        let mut identity = SessionHistory::new(1.0).unwrap();
        identity.record(&set(&["ORPHA:1"]));
        assert_eq!(identity.adjust_score(0.37, &id("ORPHA:1")), 0.37);
    }

    #[test]
    fn diversity_cases() {
        let mut h = SessionHistory::default();
        h.record(&set(&["ORPHA:1", "ORPHA:2"]));
        assert_eq!(h.diversity(&set(&["ORPHA:3", "ORPHA:4"])).unwrap().score, 1.0);
        assert_eq!(h.diversity(&set(&["ORPHA:1", "ORPHA:2"])).unwrap().score, 0.0);
        let half = h.diversity(&set(&["ORPHA:1", "ORPHA:2", "ORPHA:3", "ORPHA:4"])).unwrap();
        assert_eq!(half.score, 0.5);
        assert_eq!(half.overlap, set(&["ORPHA:1", "ORPHA:2"]));
        assert!(matches!(h.diversity(&BTreeSet::new()), Err(DiversityError::EmptyActivation)));
    }

    #[test]
    fn record_is_a_union() {
        let mut h = SessionHistory::default();
        h.record(&set(&["ORPHA:1"]));
        assert!(h.contains(&id("ORPHA:1")));
        let once = h.clone();
        h.record(&set(&["ORPHA:1"]));
        assert_eq!(h, once);
        h.record(&set(&["ORPHA:2"]));
        assert_eq!(h.used_concepts(), &set(&["ORPHA:1", "ORPHA:2"]));
    }

    #[test]
    fn lambda_bounds() {
        assert!(SessionHistory::new(1.2).is_err());
        assert!(SessionHistory::new(-0.1).is_err());
    }

    #[test]
    fn session_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let mut h = SessionHistory::new(0.5).unwrap();
        h.record(&set(&["ORPHA:558", "OMIM:154700"]));
        h.save(&path).unwrap();
        assert_eq!(SessionHistory::load(&path).unwrap(), h);
        std::fs::write(&path, "{\"lambda_rd\": 3.0, \"used_concepts\": []}").unwrap();
        assert!(SessionHistory::load(&path).is_err());
    }
}
