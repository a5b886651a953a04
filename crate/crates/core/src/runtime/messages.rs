//! Messages exchanged between LP workers and with the collector.

use crate::entity::EntityState;
use crate::event::{EntityId, Event, RegionId};
use crate::migration::MigrationDecision;
use crate::pubsub::SubUpdate;
use crate::time::SimTime;
use serde::Serialize;

/// End-Of-Step control message, one per (LP, step). Carries no model data,
/// only control: an audit checksum of the step's outbound event stream,
/// replicated-index updates, per-region resident counts and migration
/// proposals needed to make the boundary decisions identical everywhere.
#[derive(Clone, Debug)]
pub struct EosMessage {
    pub sender_lp: u32,
    pub step: u64,
    /// XOR of the checksums of every event this LP routed this step
    /// (local and remote alike), so the global XOR is partition-independent.
    pub checksum: u64,
    pub table_version: u64,
    /// Hosted entities inside each configured region's bounds, by region
    /// index.
    pub region_counts: Vec<u32>,
    pub sub_updates: Vec<SubUpdate>,
    pub proposals: Vec<MigrationDecision>,
}

/// Second barrier phase: migration execution. Every LP broadcasts its moves
/// (so all routing tables update identically) and sends full entity
/// transfers to the new owners only.
#[derive(Clone, Debug, Default)]
pub struct BatchMsg {
    pub sender_lp: u32,
    pub step: u64,
    /// (entity, to_lp) moves initiated by the sender this boundary.
    pub moves: Vec<(EntityId, u32)>,
    /// Transfers addressed to the receiving LP.
    pub transfers: Vec<EntityTransfer>,
}

/// Complete migratable state of one entity: semantic state, its pending
/// events and the scheduling sidecar that must follow it but stays out of
/// the digest.
#[derive(Clone, Debug)]
pub struct EntityTransfer {
    pub state: EntityState,
    pub pending: Vec<Event>,
    pub last_migration: u64,
}

#[derive(Debug)]
pub enum PeerMsg {
    Events { from_lp: u32, step: u64, events: Vec<Event> },
    Eos(EosMessage),
    Batch(BatchMsg),
}

/// One processed-event trace record (verbosity = full).
#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub step: u64,
    pub phase: u32,
    pub kind: &'static str,
    pub src: u32,
    pub dst: String,
    pub seq: u64,
    pub payload: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct MigrationRecord {
    pub step: u64,
    pub entity: u32,
    pub from: u32,
    pub to: u32,
    pub affinity: f64,
    /// "affinity" for adaptive moves, "colocation" for refined-region moves.
    pub reason: &'static str,
    pub hosted_before: Vec<i64>,
    pub hosted_after: Vec<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionRecord {
    pub step: u64,
    pub region_id: RegionId,
    pub action: &'static str,
    pub residents: u32,
    pub trigger: u32,
}

/// Per-step report from one worker to the collector.
#[derive(Debug)]
pub struct StepReport {
    pub lp: u32,
    pub step: u64,
    pub events_processed: u64,
    pub local_sends: u64,
    pub remote_sends: u64,
    pub barrier_wait_fraction: f64,
    pub step_wall_ms: f64,
    pub eos_checksum: u64,
    pub trace: Vec<TraceRecord>,
    pub migrations: Vec<MigrationRecord>,
    pub regions: Vec<RegionRecord>,
    /// Fine steps executed this coarse step per region homed here.
    pub fine_steps: Vec<(RegionId, u32)>,
    pub cross_level_deliveries: u64,
    pub cross_level_violations: u64,
    /// Total population seen by this LP's routing table (boundary audit).
    pub hosted: u64,
}

#[derive(Debug)]
pub struct FinalReport {
    pub lp: u32,
    pub clock: SimTime,
    pub entities: Vec<EntityState>,
    pub undelivered: Vec<Event>,
    pub sent_total: u64,
    pub delivered_total: u64,
    pub late_deliveries: u64,
    pub max_step_skew: u64,
}

#[derive(Debug)]
pub enum Report {
    Step(StepReport),
    Final(FinalReport),
    Fatal { lp: u32, step: u64, message: String },
}
