//! Engine configuration, read from TOML. Every field has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diversity::DEFAULT_LAMBDA_RD;
use crate::kg::DEFAULT_CANDIDATE_CAP;
use crate::matchers::{CombineWeights, MatchMethod};
use crate::sparsity::{ComplexityWeights, SparsityConfig};

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "RAREKG_CONFIG";
pub const DEFAULT_ACTIVATION_THRESHOLD: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    File { path: String, message: String },
    #[error("all matchers are disabled")]
    NoMatcher,
    #[error("{field} must lie in [0, 1], got {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("candidate_cap must be at least 1")]
    ZeroCandidateCap,
    #[error("resource {path}: {message}")]
    Resource { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodWeights {
    pub code: f64,
    pub term: f64,
    pub variant: f64,
    pub multilingual: f64,
}

impl Default for MethodWeights {
    fn default() -> Self {
        Self {
            code: 1.0,
            term: 0.9,
            variant: 0.85,
            multilingual: 0.8,
        }
    }
}

impl MethodWeights {
    pub fn get(&self, method: MatchMethod) -> f64 {
        match method {
            MatchMethod::Code => self.code,
            MatchMethod::Term => self.term,
            MatchMethod::Variant => self.variant,
            MatchMethod::Multilingual => self.multilingual,
        }
    }
}

/// Per-matcher and per-mechanism switches, for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Switches {
    pub code: bool,
    pub term: bool,
    pub variant: bool,
    pub multilingual: bool,
    pub diversity: bool,
    pub fallback: bool,
}

impl Default for Switches {
    fn default() -> Self {
        Self {
            code: true,
            term: true,
            variant: true,
            multilingual: true,
            diversity: true,
            fallback: true,
        }
    }
}

impl Switches {
    pub fn enabled(&self, method: MatchMethod) -> bool {
        match method {
            MatchMethod::Code => self.code,
            MatchMethod::Term => self.term,
            MatchMethod::Variant => self.variant,
            MatchMethod::Multilingual => self.multilingual,
        }
    }

    pub fn set(&mut self, method: MatchMethod, on: bool) {
        match method {
            MatchMethod::Code => self.code = on,
            MatchMethod::Term => self.term = on,
            MatchMethod::Variant => self.variant = on,
            MatchMethod::Multilingual => self.multilingual = on,
        }
    }

    pub fn enabled_methods(&self) -> Vec<MatchMethod> {
        MatchMethod::ALL.into_iter().filter(|m| self.enabled(*m)).collect()
    }
}

/// Optional overrides for the shipped resource files. Relative paths are
/// resolved against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resources {
    /// Extra terminology, one term per line, added to the segmentation lexicon.
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub phonetic_table: Option<PathBuf>,
    pub organ_systems: Option<PathBuf>,
    pub phenotype_lexicon: Option<PathBuf>,
    /// JSON file of canned evidence keyed by query hash.
    pub evidence: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub activation_threshold: f64,
    pub lambda_rd: f64,
    pub candidate_cap: usize,
    pub method_weights: MethodWeights,
    pub multilingual_weights: CombineWeights,
    pub complexity_weights: ComplexityWeights,
    pub sparsity: SparsityConfig,
    pub switches: Switches,
    pub resources: Resources,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            activation_threshold: DEFAULT_ACTIVATION_THRESHOLD,
            lambda_rd: DEFAULT_LAMBDA_RD,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            method_weights: MethodWeights::default(),
            multilingual_weights: CombineWeights::default(),
            complexity_weights: ComplexityWeights::default(),
            sparsity: SparsityConfig::default(),
            switches: Switches::default(),
            resources: Resources::default(),
        }
    }
}

fn unit_interval(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field, value })
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.switches.enabled_methods().is_empty() {
            return Err(ConfigError::NoMatcher);
        }
        unit_interval("activation_threshold", self.activation_threshold)?;
        unit_interval("lambda_rd", self.lambda_rd)?;
        let w = &self.method_weights;
        unit_interval("method_weights.code", w.code)?;
        unit_interval("method_weights.term", w.term)?;
        unit_interval("method_weights.variant", w.variant)?;
        unit_interval("method_weights.multilingual", w.multilingual)?;
        if self.candidate_cap == 0 {
            return Err(ConfigError::ZeroCandidateCap);
        }
        Ok(())
    }

    pub fn from_toml(source: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(source).map_err(|e| ConfigError::File {
            path: "<inline>".into(),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::File {
            path: path.display().to_string(),
            message,
        };
        let source = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut config: Self = toml::from_str(&source).map_err(|e| err(e.message().to_string()))?;
        config.validate()?;
        if let Some(dir) = path.parent() {
            config.resources.rebase(dir);
        }
        Ok(config)
    }

    /// Explicit path first, then the environment variable, then defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl Resources {
    fn rebase(&mut self, dir: &Path) {
        for slot in [
            &mut self.lexicon,
            &mut self.stopwords,
            &mut self.phonetic_table,
            &mut self.organ_systems,
            &mut self.phenotype_lexicon,
            &mut self.evidence,
        ] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = EngineConfig::default();
        assert_eq!(EngineConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(EngineConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn partial_override() {
        let c = EngineConfig::from_toml("lambda_rd = 0.5\n[switches]\ncode = false\n[sparsity]\nk_min = 1\nk_max = 5\nalpha = 0.01\n").unwrap();
        assert_eq!(c.lambda_rd, 0.5);
        assert!(!c.switches.code && c.switches.term);
        assert_eq!(c.sparsity.k_max(), 5);
        assert_eq!(c.method_weights, MethodWeights::default());
    }

    #[test]
    fn rejects_bad_values() {
        let off = "[switches]\ncode = false\nterm = false\nvariant = false\nmultilingual = false\n";
        assert!(matches!(EngineConfig::from_toml(off), Err(ConfigError::NoMatcher)));
        assert!(EngineConfig::from_toml("activation_threshold = 1.5").is_err());
        assert!(EngineConfig::from_toml("[sparsity]\nk_min = 9\nk_max = 3\nalpha = 0.1").is_err());
        assert!(EngineConfig::from_toml("complexity_weights = [0, 0, 0, 0]").is_err());
        assert!(EngineConfig::from_toml("unknown_key = 1").is_err());
    }

    #[test]
    fn relative_resources_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("engine.toml");
        std::fs::write(&path, "[resources]\nlexicon = \"terms.txt\"\n").unwrap();
        let c = EngineConfig::load(&path).unwrap();
        assert_eq!(c.resources.lexicon.unwrap(), dir.path().join("terms.txt"));
    }
}
