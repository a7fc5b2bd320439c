//! Concept sparse activation for rare-disease queries over a three-layer
//! knowledge graph.

pub mod diversity;
pub mod eval;
pub mod fallback;
pub mod id;
pub mod kg;
pub mod matchers;
pub mod pipeline;
pub mod sparsity;
pub mod synthetic;
pub mod text;

pub use diversity::{DiversityError, DiversityReport, SessionHistory};
pub use eval::{Averaging, EvalError, Metrics, MetricsReport, Predictor};
pub use fallback::{FallbackError, FallbackLevel, FallbackResolver, FallbackResult, PhenotypeLexicon};
pub use id::{ConceptId, IdError, Namespace};
pub use kg::{Concept, GraphError, KnowledgeGraph};
pub use pipeline::{ActivationResult, Engine, EngineConfig, EngineError};
pub use sparsity::{ComplexityBreakdown, ComplexityWeights, OrganSystems, SparsityConfig, SparsityError};
