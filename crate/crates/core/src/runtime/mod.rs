//! Parallel runtime: spawns one worker thread per logical process, seeds
//! them with a deterministic initial partition, and folds their reports into
//! a run outcome whose digest is independent of the LP count.

pub mod messages;
mod worker;

use crate::config::ScenarioConfig;
use crate::digest::{state_digest, RunDigest};
use crate::error::{SimError, SimResult};
use crate::event::{Event, RegionId};
use crate::kernel::PendingEventList;
use crate::models::build_population;
use crate::multilevel::{lift_entity, RegionState};
use crate::partition::partition_entities;
use crate::pubsub::SubIndex;
use crate::time::SimTime;
use crossbeam_channel::unbounded;
use messages::{MigrationRecord, PeerMsg, RegionRecord, Report, TraceRecord};
use std::collections::BTreeMap;
use std::sync::atomic::AtomicU64;
use std::sync::Arc;
use worker::{LpWorker, WorkerSeed};

/// One row of per-step, per-LP statistics.
#[derive(Clone, Debug)]
pub struct StepRow {
    pub step: u64,
    pub lp: u32,
    pub events_processed: u64,
    pub local_sends: u64,
    pub remote_sends: u64,
    pub barrier_wait_fraction: f64,
    pub step_wall_ms: f64,
    pub checksum: u64,
    pub hosted: u64,
    pub fine_steps: Vec<(RegionId, u32)>,
    pub cross_level_deliveries: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunTotals {
    pub entities: u64,
    pub initial_events: u64,
    pub sent: u64,
    pub delivered: u64,
    pub undelivered: u64,
    pub max_step_skew: u64,
}

/// Everything a finished run produces, in memory. The harness decides what
/// to persist.
pub struct RunOutcome {
    pub digest: RunDigest,
    pub clock: SimTime,
    pub steps: Vec<StepRow>,
    /// Global event-stream checksum per step (xor over LPs), for localizing
    /// the first divergent step between two runs.
    pub step_checksums: Vec<u64>,
    pub trace: Vec<TraceRecord>,
    pub migrations: Vec<MigrationRecord>,
    pub regions: Vec<RegionRecord>,
    pub totals: RunTotals,
}

/// Run a scenario to completion and return the outcome.
pub fn run(cfg: &ScenarioConfig) -> SimResult<RunOutcome> {
    cfg.validate()?;
    let n_lps = cfg.n_lps;
    let total_steps = cfg.total_coarse_steps;

    let model = build_population(cfg);
    let entity_count = model.entities.len() as u64;
    let initial_events = model.events.len() as u64;

    let mut sub_index = SubIndex::new();
    let mut initial_subs = model.sub_updates;
    sub_index.apply(&mut initial_subs);

    let positions: Vec<_> = model.entities.iter().map(|e| (e.id, e.position)).collect();
    let mut routing = partition_entities(&positions, n_lps, cfg.partition, cfg.area.rect());

    // Regions scheduled refined from step 0 start refined, with their
    // residents placed directly on the home LP.
    let mut regions: Vec<RegionState> = cfg
        .multilevel
        .regions
        .iter()
        .map(|r| RegionState::new(r.spec(), n_lps))
        .collect();
    if !cfg.multilevel.enabled {
        regions.clear();
    }
    let mut entities = model.entities;
    for r in &mut regions {
        if r.spec.schedule.is_some_and(|(at, _)| at == 0) {
            r.level = 1;
            for e in entities.iter_mut() {
                if r.spec.bounds.contains(e.position) {
                    routing.set(e.id, r.home_lp);
                    lift_entity(e, r.spec.id);
                }
            }
        }
    }

    // Distribute entities and seed events by ownership.
    let mut hosted: Vec<BTreeMap<_, _>> = (0..n_lps).map(|_| BTreeMap::new()).collect();
    for e in entities {
        let lp = routing.lp_of(e.id)?;
        hosted[lp as usize].insert(e.id, e);
    }
    let mut pending: Vec<PendingEventList> = (0..n_lps).map(|_| PendingEventList::new()).collect();
    for ev in model.events {
        let lp = match ev.dst.entity() {
            Some(id) => routing.lp_of(id)?,
            None => routing.lp_of(ev.src)?,
        };
        pending[lp as usize].schedule(ev, SimTime::ZERO)?;
    }

    let board: Arc<Vec<AtomicU64>> =
        Arc::new((0..n_lps).map(|_| AtomicU64::new(0)).collect());
    let (report_tx, report_rx) = unbounded::<Report>();
    let mut txs = Vec::with_capacity(n_lps as usize);
    let mut rxs = Vec::with_capacity(n_lps as usize);
    for _ in 0..n_lps {
        let (tx, rx) = unbounded::<PeerMsg>();
        txs.push(tx);
        rxs.push(rx);
    }

    let mut handles = Vec::new();
    let mut pending_iter = pending.into_iter();
    let mut hosted_iter = hosted.into_iter();
    for (lp, rx) in rxs.into_iter().enumerate() {
        let seed = WorkerSeed {
            lp: lp as u32,
            hosted: hosted_iter.next().unwrap(),
            pending: pending_iter.next().unwrap(),
            routing: routing.clone(),
            sub_index: sub_index.clone(),
            regions: regions.clone(),
            rx,
            txs: txs.clone(),
            report: report_tx.clone(),
            board: Arc::clone(&board),
        };
        let worker = LpWorker::new(cfg.clone(), seed);
        handles.push(
            std::thread::Builder::new()
                .name(format!("lp-{lp}"))
                .spawn(move || worker.run())
                .expect("spawn worker"),
        );
    }
    drop(report_tx);
    drop(txs);

    // Collect until every worker has sent its terminal report.
    let mut steps: Vec<StepRow> = Vec::new();
    let mut trace = Vec::new();
    let mut migrations = Vec::new();
    let mut region_records = Vec::new();
    let mut finals = Vec::new();
    let mut fatal: Option<SimError> = None;
    let mut terminal = 0u32;
    while terminal < n_lps {
        let report = match report_rx.recv() {
            Ok(r) => r,
            Err(_) => break, // all senders gone
        };
        match report {
            Report::Step(s) => {
                steps.push(StepRow {
                    step: s.step,
                    lp: s.lp,
                    events_processed: s.events_processed,
                    local_sends: s.local_sends,
                    remote_sends: s.remote_sends,
                    barrier_wait_fraction: s.barrier_wait_fraction,
                    step_wall_ms: s.step_wall_ms,
                    checksum: s.eos_checksum,
                    hosted: s.hosted,
                    fine_steps: s.fine_steps,
                    cross_level_deliveries: s.cross_level_deliveries,
                });
                trace.extend(s.trace);
                migrations.extend(s.migrations);
                region_records.extend(s.regions);
            }
            Report::Final(f) => {
                finals.push(f);
                terminal += 1;
            }
            Report::Fatal { lp, step, message } => {
                eprintln!("lp {lp} failed at step {step}: {message}");
                if fatal.is_none() {
                    fatal = Some(SimError::WorkerFailed {
                        step,
                        message: format!("lp {lp}: {message}"),
                    });
                }
                terminal += 1;
            }
        }
    }
    for h in handles {
        let _ = h.join();
    }
    if let Some(e) = fatal {
        return Err(e);
    }

    steps.sort_by_key(|r| (r.step, r.lp));
    trace.sort_by_key(|t| (t.step, t.phase, t.src, t.seq));
    migrations.sort_by_key(|m| (m.step, m.entity));
    region_records.sort_by_key(|r| (r.step, r.region_id));

    let mut step_checksums = vec![0u64; total_steps as usize];
    for r in &steps {
        step_checksums[r.step as usize] ^= r.checksum;
    }

    let clock = SimTime::coarse(total_steps);
    let mut all_entities = Vec::new();
    let mut undelivered = Vec::new();
    let mut totals = RunTotals {
        entities: entity_count,
        initial_events,
        ..RunTotals::default()
    };
    for f in &finals {
        totals.sent += f.sent_total;
        totals.delivered += f.delivered_total;
        totals.max_step_skew = totals.max_step_skew.max(f.max_step_skew);
    }
    for f in finals {
        all_entities.extend(f.entities);
        undelivered.extend(f.undelivered);
    }
    totals.undelivered = undelivered.len() as u64;
    let entity_refs: Vec<&_> = all_entities.iter().collect();
    let event_refs: Vec<&Event> = undelivered.iter().collect();
    let digest = state_digest(&entity_refs, clock, &event_refs);

    Ok(RunOutcome {
        digest,
        clock,
        steps,
        step_checksums,
        trace,
        migrations,
        regions: region_records,
        totals,
    })
}
