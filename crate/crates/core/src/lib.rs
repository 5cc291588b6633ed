//! Consistency harness for generative games.
//!
//! The crate bundles three deterministic reference games (Traveler, Pong and
//! Pac-Man), the explicit map and score-ledger modules that keep a frame
//! generator spatially and numerically consistent, generator wrappers that
//! inject controlled inconsistencies, the consistency metrics (SpaCon,
//! NumCon, ActAcc) and the episode dataset tooling built on top of them.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod frame;
pub mod generators;
pub mod glyphs;
pub mod metrics;
pub mod numeric;
pub mod policy;
pub mod seed;
pub mod spatial;

pub use engine::{Action, EngineConfig, EngineState, GameId, PaddleMove, StepOutcome};
pub use error::{Error, Result};
pub use frame::{Frame, Rgb};
pub use generators::{GeneratorHandle, GeneratorKind, GeneratorSpec, TraceEntry};
pub use metrics::{evaluate, MetricReport};
pub use numeric::ScoreRecord;
pub use spatial::{MatchConfig, MatchResult, WorldMap};
