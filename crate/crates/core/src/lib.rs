//! Kinship-logic corpus generation, proof construction, natural-language
//! templating and proof verification.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod kinship;
pub mod proof;
pub mod rules;
pub mod story;
pub mod templates;

pub use corpus::{Block, FlatRecord, OverlapReport, Record, RecordEntity, RenderPlan};
pub use error::{Error, Result};
pub use eval::{FailureReason, GenMode, Generation, GradeOptions, Grounding, MetricsTable, MfrBaseline, Verdict};
pub use kinship::{Entity, EntityId, Fact, Gender, ProofStep, RelationKind, SurfaceFact, SurfaceStep};
pub use proof::{Proof, ProofSet, Strategy};
pub use rules::{RuleBase, RuleTable, Violation};
pub use story::{Example, Generator, NamePool, Naming, Query, SplitManifest, SplitOptions, SplitPlan, Splits};
pub use templates::{StoryTemplates, TemplateSet};
