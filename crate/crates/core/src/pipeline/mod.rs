//! End-to-end activation.

pub mod config;
pub mod context;
pub mod engine;

pub use config::{ConfigError, EngineConfig, MethodWeights, Resources, Switches, CONFIG_ENV};
pub use context::{
    assemble_context, ContextDocument, ContextSection, EvidenceError, EvidenceProvider, EvidenceSnippet,
    FileEvidenceProvider, NullProvider, SectionKind,
};
pub use engine::{
    combine_scores, rank_order, select_top_k, ActivationResult, ActivationScoreEntry, Engine, EngineError,
    EntryOrigin, Explanation,
};
