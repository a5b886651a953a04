//! Error types shared across the engine.

use crate::event::EntityId;
use crate::time::SimTime;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event scheduled in the past: event time {event} < now {now} (model bug)")]
    EventInPast { event: SimTime, now: SimTime },

    #[error("unknown entity {0} (routing table corruption)")]
    UnknownEntity(EntityId),

    #[error("barrier timeout at step {step} on lp {lp} (deadlock or bug)")]
    BarrierTimeout { lp: u32, step: u64 },

    #[error("stale routing table at step {step}: lp {lp} saw version {seen}, expected {expected}")]
    StaleRouting { lp: u32, step: u64, seen: u64, expected: u64 },

    #[error("refinement requested off a coarse boundary at {0}")]
    MidStepRefinement(SimTime),

    #[error("coarsening requested off a coarse boundary at {0}")]
    MidStepCoarsening(SimTime),

    #[error("product {product} not in inventory of {producer}")]
    NotInInventory { producer: EntityId, product: u16 },

    #[error("guidance requires both parties inside the same refined region ({consumer}, {producer})")]
    NotCoLocated { consumer: EntityId, producer: EntityId },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("scenario validation error for key `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("worker panicked at step {step}: {message}")]
    WorkerFailed { step: u64, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type SimResult<T> = Result<T, SimError>;
