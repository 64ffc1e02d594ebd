//! Deterministic generation of temporally grounded gameplay QA datasets.
//!
//! The pipeline runs from event logs to evaluated predictions:
//!
//! 1. [`simulator`] produces (or ingests) timestamped gameplay sessions;
//! 2. [`sampler`] cuts a 3-6 s clip around each target event and assigns the
//!    NT / ET / HT temporal subset;
//! 3. [`generator`] forms semantic chunks, filters them through the
//!    brute-force [`oracle`], and realizes them with [`template`]s and the
//!    [`lexicon`];
//! 4. [`dataset`] caps duplicates, splits per subset and reports statistics;
//! 5. [`eval`] scores predictions and the trivial baselines.
//!
//! [`attention`] is a standalone numeric reference for the video attention
//! models, checked by invariants rather than trained.
//!
//! ```
//! use forge::{generator, simulator, GenerationConfig, Lexicon, SimulatorConfig, TemplatePool};
//!
//! let config = SimulatorConfig { duration_ms: 20_000, ..SimulatorConfig::default() };
//! let sessions = simulator::simulate_batch(&config, 1, 2).unwrap();
//! let pairs = generator::generate(
//!     &sessions,
//!     &TemplatePool::default_pool(),
//!     &Lexicon::default_mario(),
//!     &GenerationConfig::default(),
//! )
//! .unwrap();
//! assert!(!pairs.is_empty());
//! ```

pub mod attention;
pub mod chunk;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod generator;
pub mod jsonl;
pub mod lexicon;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod simulator;
pub mod surface;
pub mod template;

pub use chunk::{EventPattern, Predicate, QuestionType, Relation, SemanticChunk, TemporalConstraint};
pub use dataset::{Dataset, SplitName};
pub use error::{ForgeError, Result};
pub use generator::{GenerationConfig, QaPair};
pub use lexicon::Lexicon;
pub use model::{Clip, EntityId, Event, EventType, GameplaySession, MarioState, Role, StageType, StateInterval};
pub use sampler::Subset;
pub use simulator::SimulatorConfig;
pub use template::{Template, TemplatePool};
