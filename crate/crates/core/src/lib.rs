//! Chase-based reasoning over existential rules with a streaming, query-driven
//! engine.

pub mod analysis;
pub mod chase;
pub mod error;
pub mod firing;
pub mod homomorphism;
pub mod instance;
pub mod model;
pub mod nulls;
pub mod parser;
pub mod query;
pub mod stream;

pub use analysis::{classify_program, FragmentReport, Position};
pub use chase::{chase_batch, chase_resumed, ChaseConfig, ChaseResult, Routing, Variant};
pub use error::{ChaseError, IngestError, ModelError, ParseError};
pub use firing::{FiringKind, HeadCheck};
pub use instance::{freeze_instance, Instance};
pub use model::{Atom, Fact, Program, Symbol, Term, Tgd};
pub use parser::{parse_facts, parse_program, parse_query};
pub use query::{answer, bcq_entails, Answer, Bcq, Engine};
pub use stream::{chase_s, StreamConfig, StreamOutcome, StreamRouting};
