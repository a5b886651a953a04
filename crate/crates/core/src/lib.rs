//! Parallel, time-stepped simulation engine for large populations of mobile,
//! interacting entities, with adaptive entity migration between logical
//! processes and multi-level model refinement of dense regions.
//!
//! The engine's core guarantee is sequential equivalence: for a fixed
//! scenario and seed, the final state digest is bit-identical whatever the
//! number of logical processes and whether migration is enabled.

pub mod config;
pub mod digest;
pub mod entity;
pub mod error;
pub mod event;
pub mod geom;
pub mod harness;
pub mod kernel;
pub mod migration;
pub mod mobility;
pub mod models;
pub mod multilevel;
pub mod partition;
pub mod pubsub;
pub mod radio;
pub mod rng;
pub mod runtime;
pub mod time;

pub use config::ScenarioConfig;
pub use digest::{RunDigest, DIGEST_ALGO};
pub use error::{SimError, SimResult};
pub use runtime::{run, RunOutcome};
