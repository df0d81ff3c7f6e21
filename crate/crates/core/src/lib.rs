//! A deterministic simulator of a community of virtual research labs.
//!
//! Labs are particles in a bounded claim space. Each iteration they move
//! under a three-factor swarm update (or explore), publish claims, collect
//! citation-style votes from a shared reviewer pool, and live or die by a
//! rank-based budget. Everything is seeded and replayable from the event log.

// `!(x > 0.0)` style checks reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behaviors;
pub mod config;
pub mod engine;
pub mod error;
pub mod events;
pub mod landscape;
pub mod lifecycle;
pub mod metrics;
pub mod pareto;
pub mod registry;
pub mod replay;
pub mod review;
pub mod rng;
pub mod runner;

pub use behaviors::{
    Action, ActionKind, BehaviorCatalog, DefaultBehavior, GreedyBehavior, LabBehavior, Snapshot,
};
pub use config::{load_config, ConfigDocument, RunConfig};
pub use engine::{Coefficients, SwarmParams};
pub use error::{Error, Result};
pub use events::{EventKind, RunEvent};
pub use landscape::{make_landscape, Bounds, Landscape, LandscapeKind};
pub use lifecycle::LifecycleParams;
pub use metrics::IterationMetrics;
pub use registry::{Best, LabId, LabState, Position, Registry, Score, Velocity};
pub use replay::{replay, ReplayReport};
pub use review::{FitnessMode, ReviewParams, VoteTally};
pub use runner::{
    run, run_in_dir, run_in_memory, IterationReport, RunStatus, RunSummary, Simulation,
};
