//! One logical process: hosts a disjoint set of entities and advances them
//! through time-stepped coarse steps with two barrier phases per step.
//!
//! Phase A exchanges model events and end-of-step control data; after it,
//! every LP computes the same refinement and migration decisions from the
//! same inputs. Phase B executes the migration batch. All cross-LP state
//! (routing table, subscription index, region levels) is replicated and
//! mutated only by these deterministic boundary actions, which is what makes
//! the final state independent of the LP count.

use super::messages::*;
use crate::config::{ScenarioConfig, TraceLevel};
use crate::entity::{EntityState, Role};
use crate::error::{SimError, SimResult};
use crate::event::{Dst, EntityId, Event, EventKey, FrameTopic, Payload, RegionId};
use crate::geom::Vec2;
use crate::kernel::PendingEventList;
use crate::migration::{
    apply_load_guard, evaluate_migrations, InteractionWindow, MigrationParams,
};
use crate::mobility::{fine_position, Trajectory};
use crate::models::{guide_to_producer, handle_event, BehaviorOutput, Emit, ModelParams};
use crate::multilevel::{
    check_refinement_triggers, coarsen_region, drop_entity, lift_entity, refine_region,
    RegionAction, RegionState,
};
use crate::partition::RoutingTable;
use crate::pubsub::{SubIndex, SubUpdate};
use crate::radio::{epidemic_relay, NeighborIndex};
use crate::rng::EntityRng;
use crate::time::SimTime;
use crossbeam_channel::{Receiver, Sender};
use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Next fine time inside a window, or the closing boundary.
fn fine_successor(now: SimTime, ratio: u32) -> SimTime {
    if now.phase + 1 < ratio {
        SimTime::fine(now.coarse, now.phase + 1)
    } else {
        SimTime::coarse(now.coarse + 1)
    }
}

fn dst_label(dst: &Dst) -> String {
    match dst {
        Dst::Entity(id) => id.0.to_string(),
        Dst::Topic(t) => format!("topic:{}", t.code()),
    }
}

pub struct LpWorker {
    lp: u32,
    n_lps: u32,
    cfg: ScenarioConfig,
    params: ModelParams,
    mig: MigrationParams,
    hosted: BTreeMap<EntityId, EntityState>,
    pending: PendingEventList,
    routing: RoutingTable,
    sub_index: SubIndex,
    regions: Vec<RegionState>,
    windows: HashMap<EntityId, InteractionWindow>,
    /// Scheduling sidecar: last boundary at which an entity arrived here.
    /// Travels with transfers but never enters the state digest.
    last_migration: HashMap<EntityId, u64>,
    rx: Receiver<PeerMsg>,
    txs: Vec<Sender<PeerMsg>>,
    report: Sender<Report>,
    /// One slot per LP holding its current coarse step, for the skew audit.
    board: Arc<Vec<AtomicU64>>,
    buffered: Vec<PeerMsg>,
    chaos: EntityRng,

    // Per-step scratch, reset at each step start.
    outbox: Vec<Vec<Event>>,
    /// Residents of each refined region homed here, sorted by id.
    residents: BTreeMap<RegionId, Vec<EntityId>>,
    /// In-window event queues for the current step, one per hosted region.
    fine: BTreeMap<RegionId, BTreeMap<EventKey, Event>>,
    step_checksum: u64,
    step_sub_updates: Vec<SubUpdate>,
    step_sends: HashMap<EntityId, Vec<u32>>,
    local_sends: u64,
    remote_sends: u64,
    delivered: u64,
    cross_deliveries: u64,
    fine_steps: Vec<(RegionId, u32)>,
    trace: Vec<TraceRecord>,
    migrations: Vec<MigrationRecord>,
    region_records: Vec<RegionRecord>,

    // Run totals.
    sent_total: u64,
    delivered_total: u64,
    max_skew: u64,
}

pub struct WorkerSeed {
    pub lp: u32,
    pub hosted: BTreeMap<EntityId, EntityState>,
    pub pending: PendingEventList,
    pub routing: RoutingTable,
    pub sub_index: SubIndex,
    pub regions: Vec<RegionState>,
    pub rx: Receiver<PeerMsg>,
    pub txs: Vec<Sender<PeerMsg>>,
    pub report: Sender<Report>,
    pub board: Arc<Vec<AtomicU64>>,
}

impl LpWorker {
    pub fn new(cfg: ScenarioConfig, seed: WorkerSeed) -> Self {
        let n_lps = cfg.n_lps;
        let params = ModelParams::from_config(&cfg);
        let mig = cfg.migration.params();
        let chaos = EntityRng::new(cfg.seed ^ 0xC4A0_55AA, seed.lp);
        LpWorker {
            lp: seed.lp,
            n_lps,
            cfg,
            params,
            mig,
            hosted: seed.hosted,
            pending: seed.pending,
            routing: seed.routing,
            sub_index: seed.sub_index,
            regions: seed.regions,
            windows: HashMap::new(),
            last_migration: HashMap::new(),
            rx: seed.rx,
            txs: seed.txs,
            report: seed.report,
            board: seed.board,
            buffered: Vec::new(),
            chaos,
            outbox: (0..n_lps).map(|_| Vec::new()).collect(),
            residents: BTreeMap::new(),
            fine: BTreeMap::new(),
            step_checksum: 0,
            step_sub_updates: Vec::new(),
            step_sends: HashMap::new(),
            local_sends: 0,
            remote_sends: 0,
            delivered: 0,
            cross_deliveries: 0,
            fine_steps: Vec::new(),
            trace: Vec::new(),
            migrations: Vec::new(),
            region_records: Vec::new(),
            sent_total: 0,
            delivered_total: 0,
            max_skew: 0,
        }
    }

    pub fn run(mut self) {
        let total = self.cfg.total_coarse_steps;
        for step in 0..total {
            if let Err(e) = self.step(step) {
                let _ = self.report.send(Report::Fatal {
                    lp: self.lp,
                    step,
                    message: e.to_string(),
                });
                return;
            }
        }
        let clock = SimTime::coarse(total);
        self.pending.assert_no_past(clock);
        let entities: Vec<EntityState> = std::mem::take(&mut self.hosted).into_values().collect();
        let undelivered = self.pending.drain_all();
        let _ = self.report.send(Report::Final(FinalReport {
            lp: self.lp,
            clock,
            entities,
            undelivered,
            sent_total: self.sent_total,
            delivered_total: self.delivered_total,
            late_deliveries: 0,
            max_step_skew: self.max_skew,
        }));
    }

    fn step(&mut self, step: u64) -> SimResult<()> {
        let t0 = Instant::now();
        self.board[self.lp as usize].store(step, Ordering::SeqCst);
        self.observe_skew(step)?;
        self.reset_scratch();
        self.snapshot_residents();

        let events = self.pending.take_coarse_step(step);
        let (coarse_events, publications) = self.sort_step_events(step, events)?;

        self.assign_guidance()?;
        self.coarse_pass(step, coarse_events)?;
        self.resolve_publications(step, publications)?;
        self.fine_windows(step)?;

        let barrier_wait = self.boundary(step)?;
        let wall = t0.elapsed();
        let wait_fraction = if wall.as_secs_f64() > 0.0 {
            (barrier_wait.as_secs_f64() / wall.as_secs_f64()).min(1.0)
        } else {
            0.0
        };
        self.delivered_total += self.delivered;
        let report = StepReport {
            lp: self.lp,
            step,
            events_processed: self.delivered,
            local_sends: self.local_sends,
            remote_sends: self.remote_sends,
            barrier_wait_fraction: wait_fraction,
            step_wall_ms: wall.as_secs_f64() * 1e3,
            eos_checksum: self.step_checksum,
            trace: std::mem::take(&mut self.trace),
            migrations: std::mem::take(&mut self.migrations),
            regions: std::mem::take(&mut self.region_records),
            fine_steps: std::mem::take(&mut self.fine_steps),
            cross_level_deliveries: self.cross_deliveries,
            cross_level_violations: 0,
            hosted: self.hosted.len() as u64,
        };
        self.report
            .send(Report::Step(report))
            .map_err(|_| SimError::WorkerFailed { step, message: "collector gone".into() })?;
        Ok(())
    }

    fn reset_scratch(&mut self) {
        for o in &mut self.outbox {
            o.clear();
        }
        self.fine.clear();
        self.step_checksum = 0;
        self.step_sub_updates.clear();
        self.step_sends.clear();
        self.local_sends = 0;
        self.remote_sends = 0;
        self.delivered = 0;
        self.cross_deliveries = 0;
    }

    /// Freeze the resident sets for this step; lifts and drops only happen at
    /// boundaries, so the sets are stable for the whole step.
    fn snapshot_residents(&mut self) {
        self.residents.clear();
        for r in &self.regions {
            if r.level == 1 && r.home_lp == self.lp {
                self.residents.insert(r.spec.id, Vec::new());
            }
        }
        if self.residents.is_empty() {
            return;
        }
        for (id, e) in &self.hosted {
            if e.level == 1 {
                if let Some(list) = e.region.and_then(|r| self.residents.get_mut(&r)) {
                    list.push(*id);
                }
            }
        }
        for rid in self.residents.keys().copied().collect::<Vec<_>>() {
            self.fine.insert(rid, BTreeMap::new());
        }
    }

    fn is_resident(&self, rid: RegionId, id: EntityId) -> bool {
        self.residents.get(&rid).is_some_and(|v| v.binary_search(&id).is_ok())
    }

    /// Split the step's events into the coarse phase-0 batch, the publication
    /// batch, and per-region fine queues.
    fn sort_step_events(
        &mut self,
        step: u64,
        events: Vec<Event>,
    ) -> SimResult<(Vec<Event>, Vec<Event>)> {
        let mut coarse = Vec::new();
        let mut pubs = Vec::new();
        for ev in events {
            match ev.dst {
                Dst::Topic(_) => pubs.push(ev),
                Dst::Entity(id) => {
                    let region = self.hosted.get(&id).and_then(|e| {
                        if e.level == 1 {
                            e.region
                        } else {
                            None
                        }
                    });
                    match region {
                        Some(rid) if self.fine.contains_key(&rid) => {
                            self.fine.get_mut(&rid).unwrap().insert(ev.key(), ev);
                        }
                        _ => {
                            if ev.time.phase != 0 {
                                return Err(SimError::WorkerFailed {
                                    step,
                                    message: format!(
                                        "fine-phase event {:?} addressed to coarse entity {id:?}",
                                        ev.time
                                    ),
                                });
                            }
                            coarse.push(ev);
                        }
                    }
                }
            }
        }
        Ok((coarse, pubs))
    }

    /// Refined-market guidance: at the start of a step, each resident consumer
    /// heads for the co-resident producer of the lowest product it both wants
    /// and knows an offer for.
    fn assign_guidance(&mut self) -> SimResult<()> {
        let mut guided: Vec<(EntityId, EntityId)> = Vec::new();
        for (rid, residents) in &self.residents {
            for id in residents {
                let c = &self.hosted[id];
                if c.role != Role::Consumer {
                    continue;
                }
                // known_offers iterates in product order: first hit is lowest.
                for (product, producer) in &c.known_offers {
                    if c.interests.contains(product) && self.is_resident(*rid, *producer) {
                        guided.push((*id, *producer));
                        break;
                    }
                }
            }
        }
        for (cid, pid) in guided {
            let wp = guide_to_producer(&self.hosted[&cid], &self.hosted[&pid])?;
            self.hosted.get_mut(&cid).unwrap().waypoint = Some(wp);
        }
        Ok(())
    }

    /// Level-0 deliveries at phase 0, in key order.
    fn coarse_pass(&mut self, step: u64, events: Vec<Event>) -> SimResult<()> {
        for ev in events {
            let id = ev.dst.entity().unwrap();
            let mut e = self.hosted.remove(&id).ok_or(SimError::UnknownEntity(id))?;
            let out = handle_event(&mut e, &ev, ev.time, &self.params, true);
            self.delivered += 1;
            self.trace_event(&ev, format!("{:?}", ev.payload));
            self.route_behavior(&mut e, ev.time, None, out, step)?;
            self.hosted.insert(id, e);
        }
        Ok(())
    }

    /// Resolve topic-addressed publications against the replicated index.
    /// Runs on the publisher's LP so the notification sequence numbers come
    /// from the publisher's own counter.
    fn resolve_publications(&mut self, step: u64, pubs: Vec<Event>) -> SimResult<()> {
        for ev in pubs {
            let Payload::Publication { topic, origin_x, origin_y } = ev.payload else {
                return Err(SimError::WorkerFailed {
                    step,
                    message: "topic-addressed event without publication payload".into(),
                });
            };
            let recipients = self.sub_index.publish(topic, Vec2::new(origin_x, origin_y));
            let mut p = self.hosted.remove(&ev.src).ok_or(SimError::UnknownEntity(ev.src))?;
            self.delivered += 1;
            self.trace_event(&ev, format!("fanout={}", recipients.len()));
            let product = topic.product.unwrap_or(0);
            for r in recipients {
                let n = Event {
                    time: SimTime::coarse(step + 1),
                    src: p.id,
                    dst: Dst::Entity(r),
                    payload: Payload::Notification { product, producer: p.id },
                    seq: p.next_seq(),
                };
                self.route_event(n, step, None)?;
            }
            self.hosted.insert(p.id, p);
        }
        Ok(())
    }

    /// Run the fine window of every refined region homed here.
    fn fine_windows(&mut self, step: u64) -> SimResult<()> {
        let regions: Vec<(RegionId, u32)> = self
            .regions
            .iter()
            .filter(|r| r.level == 1 && r.home_lp == self.lp)
            .map(|r| (r.spec.id, r.spec.ratio))
            .collect();
        for (rid, ratio) in regions {
            self.run_window(step, rid, ratio)?;
            self.fine_steps.push((rid, ratio));
        }
        Ok(())
    }

    fn run_window(&mut self, step: u64, rid: RegionId, ratio: u32) -> SimResult<()> {
        let residents = self.residents.get(&rid).cloned().unwrap_or_default();
        let radio = self.cfg.radio;
        let mut trajectories: HashMap<EntityId, Trajectory> = HashMap::new();
        for phase in 0..ratio {
            let now = SimTime::fine(step, phase);
            let index = if radio.enabled {
                Some(NeighborIndex::build(
                    residents.iter().map(|id| (*id, self.hosted[id].position)),
                    radio.range,
                ))
            } else {
                None
            };
            // Deliveries for this phase, in key order.
            let lo = EventKey { time: now, dst: 0, src: 0, seq: 0 };
            let hi = EventKey { time: fine_successor(now, u32::MAX), dst: 0, src: 0, seq: 0 };
            let keys: Vec<EventKey> = self
                .fine
                .get(&rid)
                .unwrap()
                .range(lo..hi)
                .map(|(k, _)| *k)
                .collect();
            for k in keys {
                let ev = self.fine.get_mut(&rid).unwrap().remove(&k).unwrap();
                let id = ev.dst.entity().unwrap();
                let mut e = self.hosted.remove(&id).ok_or(SimError::UnknownEntity(id))?;
                self.delivered += 1;
                if let Payload::Frame { origin, msg_seq, topic, hop, ttl } = ev.payload {
                    let neighbors = index
                        .as_ref()
                        .map(|i| i.neighbors(id, e.position))
                        .unwrap_or_default();
                    let outcome = epidemic_relay(
                        &mut e,
                        origin,
                        msg_seq,
                        topic,
                        hop,
                        ttl,
                        &neighbors,
                        radio.frame_budget,
                    );
                    self.trace_event(
                        &ev,
                        format!(
                            "origin={} msg={} hop={} accepted={} delivered={}",
                            origin.0, msg_seq, hop, outcome.accepted, outcome.delivered_to_app
                        ),
                    );
                    for n in outcome.forwards {
                        let f = Event {
                            time: fine_successor(now, ratio),
                            src: e.id,
                            dst: Dst::Entity(n),
                            payload: Payload::Frame {
                                origin,
                                msg_seq,
                                topic,
                                hop: hop + 1,
                                ttl,
                            },
                            seq: e.next_seq(),
                        };
                        self.route_event(f, step, Some(rid))?;
                    }
                } else {
                    let out = handle_event(&mut e, &ev, now, &self.params, false);
                    self.trace_event(&ev, format!("{:?}", ev.payload));
                    if let Some(t) = out.trajectory {
                        trajectories.insert(id, t);
                    }
                    self.route_behavior(&mut e, now, Some((rid, ratio)), out, step)?;
                }
                self.hosted.insert(id, e);
            }
            // Resident producers may originate one dissemination message per
            // refined step, at the first phase.
            if phase == 0 && radio.enabled && radio.advisory_prob > 0.0 {
                for id in &residents {
                    let mut e = self.hosted.remove(id).unwrap();
                    if e.role == Role::Producer
                        && !e.inventory.is_empty()
                        && e.rng.chance(radio.advisory_prob)
                    {
                        let product =
                            e.inventory[e.rng.next_below(e.inventory.len() as u64) as usize];
                        let msg_seq = e.next_msg_seq();
                        let ttl = radio.ttl_hops();
                        let neighbors = index
                            .as_ref()
                            .map(|i| i.neighbors(*id, e.position))
                            .unwrap_or_default();
                        let outcome = epidemic_relay(
                            &mut e,
                            *id,
                            msg_seq,
                            FrameTopic::Product(product),
                            0,
                            ttl,
                            &neighbors,
                            radio.frame_budget,
                        );
                        let origination = Event {
                            time: now,
                            src: *id,
                            dst: Dst::Entity(*id),
                            payload: Payload::Frame {
                                origin: *id,
                                msg_seq,
                                topic: FrameTopic::Product(product),
                                hop: 0,
                                ttl,
                            },
                            seq: e.event_seq,
                        };
                        self.trace_event(
                            &origination,
                            format!(
                                "origin={} msg={} hop=0 accepted={} delivered={}",
                                id.0, msg_seq, outcome.accepted, outcome.delivered_to_app
                            ),
                        );
                        for n in outcome.forwards {
                            let f = Event {
                                time: fine_successor(now, ratio),
                                src: e.id,
                                dst: Dst::Entity(n),
                                payload: Payload::Frame {
                                    origin: *id,
                                    msg_seq,
                                    topic: FrameTopic::Product(product),
                                    hop: 1,
                                    ttl,
                                },
                                seq: e.next_seq(),
                            };
                            self.route_event(f, step, Some(rid))?;
                        }
                    }
                    self.hosted.insert(*id, e);
                }
            }
            // Advance resident positions by one fine increment, in id order.
            for id in &residents {
                if let Some(t) = trajectories.get(id) {
                    self.hosted.get_mut(id).unwrap().position = fine_position(t, phase, ratio);
                }
            }
        }
        debug_assert!(
            self.fine.get(&rid).is_none_or(|q| q.is_empty()),
            "fine queue not drained for region {rid}"
        );
        Ok(())
    }

    /// Timestamp and route everything a behavior wants to do.
    fn route_behavior(
        &mut self,
        e: &mut EntityState,
        now: SimTime,
        window: Option<(RegionId, u32)>,
        out: BehaviorOutput,
        step: u64,
    ) -> SimResult<()> {
        self.step_sub_updates.extend(out.sub_updates);
        for emit in out.emits {
            match emit {
                Emit::SelfAt { step: s, payload } => {
                    let ev = Event {
                        time: SimTime::coarse(s),
                        src: e.id,
                        dst: Dst::Entity(e.id),
                        payload,
                        seq: e.next_seq(),
                    };
                    self.route_event(ev, step, None)?;
                }
                Emit::ToEntity { dst, payload } => {
                    let (time, region) = match window {
                        Some((rid, ratio)) if self.is_resident(rid, dst) => {
                            let t = fine_successor(now, ratio);
                            (t, if t.coarse == step { Some(rid) } else { None })
                        }
                        Some(_) => {
                            // Resident talking to the coarse world: gate to
                            // the next boundary.
                            self.cross_deliveries += 1;
                            (SimTime::coarse(now.coarse + 1), None)
                        }
                        None => (SimTime::coarse(now.coarse + 1), None),
                    };
                    let ev = Event {
                        time,
                        src: e.id,
                        dst: Dst::Entity(dst),
                        payload,
                        seq: e.next_seq(),
                    };
                    self.route_event(ev, step, region)?;
                }
                Emit::Publish { topic } => {
                    let ev = Event {
                        time: SimTime::coarse(now.coarse + 1),
                        src: e.id,
                        dst: Dst::Topic(topic),
                        payload: Payload::Publication {
                            topic,
                            origin_x: e.position.x,
                            origin_y: e.position.y,
                        },
                        seq: e.next_seq(),
                    };
                    self.route_event(ev, step, None)?;
                }
            }
        }
        Ok(())
    }

    /// Deliver a freshly created event to its owner: local pending list, the
    /// current fine queue, or a peer outbox. Every created event enters the
    /// step checksum exactly once, here.
    fn route_event(&mut self, ev: Event, step: u64, window: Option<RegionId>) -> SimResult<()> {
        self.step_checksum ^= ev.checksum();
        self.sent_total += 1;
        let owner = match ev.dst {
            Dst::Entity(id) => self.routing.lp_of(id)?,
            // Publications stay with their publisher.
            Dst::Topic(_) => self.lp,
        };
        if let Dst::Entity(dst) = ev.dst {
            if dst != ev.src {
                let n = self.n_lps as usize;
                let counts = self.step_sends.entry(ev.src).or_insert_with(|| vec![0; n]);
                counts[owner as usize] += 1;
            }
        }
        if owner == self.lp {
            self.local_sends += 1;
            if ev.time.coarse == step {
                let rid = window.ok_or_else(|| SimError::WorkerFailed {
                    step,
                    message: "same-step event emitted outside a fine window".into(),
                })?;
                self.fine.get_mut(&rid).unwrap().insert(ev.key(), ev);
            } else {
                self.pending.schedule(ev, SimTime::coarse(step))?;
            }
        } else {
            self.remote_sends += 1;
            self.outbox[owner as usize].push(ev);
        }
        Ok(())
    }

    fn trace_event(&mut self, ev: &Event, payload: String) {
        if self.cfg.trace != TraceLevel::Full {
            return;
        }
        self.trace.push(TraceRecord {
            step: ev.time.coarse,
            phase: ev.time.phase,
            kind: ev.kind().name(),
            src: ev.src.0,
            dst: dst_label(&ev.dst),
            seq: ev.seq,
            payload,
        });
    }

    fn chaos_delay(&mut self) {
        if self.cfg.debug.inject_delays && self.cfg.debug.max_delay_ms > 0 {
            let ms = self.chaos.next_below(self.cfg.debug.max_delay_ms + 1);
            if ms > 0 {
                std::thread::sleep(Duration::from_millis(ms));
            }
        }
    }

    fn observe_skew(&mut self, step: u64) -> SimResult<()> {
        if self.n_lps == 1 {
            return Ok(());
        }
        let vals: Vec<u64> =
            self.board.iter().map(|s| s.load(Ordering::SeqCst)).collect();
        let max = *vals.iter().max().unwrap();
        let min = *vals.iter().min().unwrap();
        // Steps before any peer has stored its first value read as 0, which
        // is correct: everyone starts at step 0.
        let skew = max - min;
        self.max_skew = self.max_skew.max(skew);
        if skew > 1 {
            return Err(SimError::WorkerFailed {
                step,
                message: format!("step skew {skew} exceeds the barrier bound of 1"),
            });
        }
        Ok(())
    }

    /// Two-phase end-of-step barrier. Returns total wall time spent waiting.
    fn boundary(&mut self, step: u64) -> SimResult<Duration> {
        let boundary_time = SimTime::coarse(step + 1);
        self.chaos_delay();

        // Phase A: events + end-of-step control.
        for lp in 0..self.n_lps {
            if lp == self.lp {
                continue;
            }
            let events = std::mem::take(&mut self.outbox[lp as usize]);
            self.txs[lp as usize]
                .send(PeerMsg::Events { from_lp: self.lp, step, events })
                .map_err(|_| SimError::WorkerFailed { step, message: "peer gone".into() })?;
        }
        let region_counts: Vec<u32> = self
            .regions
            .iter()
            .map(|r| {
                self.hosted.values().filter(|e| r.spec.bounds.contains(e.position)).count() as u32
            })
            .collect();
        self.roll_windows(step);
        let proposals = self.propose_migrations(step);
        let my_eos = EosMessage {
            sender_lp: self.lp,
            step,
            checksum: self.step_checksum,
            table_version: self.routing.version,
            region_counts: region_counts.clone(),
            sub_updates: std::mem::take(&mut self.step_sub_updates),
            proposals,
        };
        self.chaos_delay();
        for lp in 0..self.n_lps {
            if lp == self.lp {
                continue;
            }
            self.txs[lp as usize]
                .send(PeerMsg::Eos(my_eos.clone()))
                .map_err(|_| SimError::WorkerFailed { step, message: "peer gone".into() })?;
        }

        let wait_a = Instant::now();
        let mut all_eos = self.barrier_a(step)?;
        let mut waited = wait_a.elapsed();
        all_eos.push(my_eos);
        all_eos.sort_by_key(|m| m.sender_lp);

        // Routing-table consistency audit.
        for m in &all_eos {
            if m.table_version != self.routing.version {
                return Err(SimError::StaleRouting {
                    lp: m.sender_lp,
                    step,
                    seen: m.table_version,
                    expected: self.routing.version,
                });
            }
        }

        // Identical boundary decisions on every LP, from identical inputs.
        let mut updates: Vec<SubUpdate> = Vec::new();
        let mut totals = vec![0u32; self.regions.len()];
        let mut proposals = Vec::new();
        for m in &mut all_eos {
            updates.append(&mut m.sub_updates);
            for (t, c) in totals.iter_mut().zip(&m.region_counts) {
                *t += *c;
            }
            proposals.append(&mut m.proposals);
        }
        self.sub_index.apply(&mut updates);
        self.apply_region_triggers(step, &totals, boundary_time)?;

        let counts_before: Vec<i64> =
            self.routing.counts(self.n_lps).iter().map(|&c| c as i64).collect();
        let mut counts = counts_before.clone();
        let accepted = if self.cfg.migration.enabled {
            apply_load_guard(proposals, &mut counts, self.mig.load_guard)
        } else {
            Vec::new()
        };

        // My outgoing moves: accepted adaptive proposals plus forced
        // co-location of residents into their region's home LP.
        let mut my_moves: Vec<(EntityId, u32, f64, &'static str)> = accepted
            .iter()
            .filter(|d| d.from_lp == self.lp)
            .map(|d| (d.entity, d.to_lp, d.affinity, "affinity"))
            .collect();
        for r in &self.regions {
            if r.level == 1 && r.home_lp != self.lp {
                for (id, e) in &self.hosted {
                    if r.spec.bounds.contains(e.position) {
                        my_moves.push((*id, r.home_lp, 1.0, "colocation"));
                    }
                }
            }
        }
        my_moves.sort_by_key(|(id, ..)| *id);
        my_moves.dedup_by_key(|(id, ..)| *id);

        // Phase B: migration batches. Moves go to everyone; each transfer
        // only to its receiving LP.
        let moves: Vec<(EntityId, u32)> = my_moves.iter().map(|(id, to, ..)| (*id, *to)).collect();
        let mut batches: Vec<BatchMsg> = (0..self.n_lps)
            .map(|_| BatchMsg { sender_lp: self.lp, step, moves: moves.clone(), transfers: Vec::new() })
            .collect();
        for &(id, to, affinity, reason) in &my_moves {
            let state = self.hosted.remove(&id).ok_or(SimError::UnknownEntity(id))?;
            let pending = self.pending.extract_for_entity(id);
            let last_migration = self.last_migration.remove(&id).unwrap_or(0);
            self.windows.remove(&id);
            batches[to as usize].transfers.push(EntityTransfer {
                state,
                pending,
                last_migration,
            });
            self.migrations.push(MigrationRecord {
                step: step + 1,
                entity: id.0,
                from: self.lp,
                to,
                affinity,
                reason,
                hosted_before: counts_before.clone(),
                hosted_after: counts.clone(),
            });
        }
        self.chaos_delay();
        for lp in 0..self.n_lps {
            if lp == self.lp {
                continue;
            }
            let batch = std::mem::replace(
                &mut batches[lp as usize],
                BatchMsg { sender_lp: self.lp, step, moves: Vec::new(), transfers: Vec::new() },
            );
            self.txs[lp as usize]
                .send(PeerMsg::Batch(batch))
                .map_err(|_| SimError::WorkerFailed { step, message: "peer gone".into() })?;
        }

        let wait_b = Instant::now();
        let peer_batches = self.barrier_b(step)?;
        waited += wait_b.elapsed();

        // Apply the union of all moves in entity order; the table version
        // advances exactly once per boundary on every LP.
        let mut all_moves = moves;
        let mut transfers = Vec::new();
        for mut b in peer_batches {
            all_moves.append(&mut b.moves);
            transfers.append(&mut b.transfers);
        }
        all_moves.sort_by_key(|(id, _)| *id);
        for (id, lp) in &all_moves {
            self.routing.set(*id, *lp);
        }
        self.routing.version += 1;
        for t in transfers {
            let id = t.state.id;
            self.last_migration.insert(id, step + 1);
            self.hosted.insert(id, t.state);
            for ev in t.pending {
                self.pending.schedule(ev, boundary_time)?;
            }
        }

        self.lift_and_drop();
        Ok(waited)
    }

    fn roll_windows(&mut self, step: u64) {
        let n = self.n_lps as usize;
        for (id, sends) in self.step_sends.drain() {
            self.windows
                .entry(id)
                .or_insert_with(|| InteractionWindow::new(n))
                .roll(step, sends);
        }
        for w in self.windows.values_mut() {
            w.prune(step, self.mig.window);
        }
    }

    fn propose_migrations(&mut self, step: u64) -> Vec<crate::migration::MigrationDecision> {
        if !self.cfg.migration.enabled
            || self.n_lps < 2
            || !(step + 1).is_multiple_of(self.mig.interval as u64)
        {
            return Vec::new();
        }
        let pin_regions: Vec<&RegionState> =
            if self.cfg.multilevel.enabled { self.regions.iter().collect() } else { Vec::new() };
        let hysteresis = self.mig.hysteresis as u64;
        let candidates = self.hosted.values().filter_map(|e| {
            // Entities inside a declared region stay put: refinement owns
            // their placement.
            if pin_regions.iter().any(|r| r.spec.bounds.contains(e.position)) {
                return None;
            }
            if let Some(last) = self.last_migration.get(&e.id) {
                if step + 1 < last + hysteresis {
                    return None;
                }
            }
            self.windows.get(&e.id).map(|w| (e.id, w))
        });
        evaluate_migrations(candidates, self.lp, &self.mig, step + 1)
    }

    fn apply_region_triggers(
        &mut self,
        step: u64,
        totals: &[u32],
        boundary_time: SimTime,
    ) -> SimResult<()> {
        let inputs: Vec<_> = self
            .regions
            .iter()
            .zip(totals)
            .map(|(r, &t)| (r.spec.clone(), r.level, t))
            .collect();
        let actions = check_refinement_triggers(&inputs, step + 1);
        for a in actions {
            let (id, name) = match a {
                RegionAction::Refine(id) => (id, "refine"),
                RegionAction::Coarsen(id) => (id, "coarsen"),
            };
            let idx = self.regions.iter().position(|r| r.spec.id == id).unwrap();
            match a {
                RegionAction::Refine(_) => refine_region(&mut self.regions[idx], boundary_time)?,
                RegionAction::Coarsen(_) => coarsen_region(&mut self.regions[idx], boundary_time)?,
            }
            if self.regions[idx].home_lp == self.lp {
                self.region_records.push(RegionRecord {
                    step: step + 1,
                    region_id: id,
                    action: name,
                    residents: totals[idx],
                    trigger: match a {
                        RegionAction::Refine(_) => self.regions[idx].spec.theta_hi,
                        RegionAction::Coarsen(_) => self.regions[idx].spec.theta_lo,
                    },
                });
            }
        }
        Ok(())
    }

    /// Post-boundary level maintenance: residents that left their region (or
    /// whose region coarsened) drop to level 0; entities standing inside a
    /// refined region homed here are lifted.
    fn lift_and_drop(&mut self) {
        for e in self.hosted.values_mut() {
            if e.level == 1 {
                let keep = e.region.is_some_and(|rid| {
                    self.regions
                        .iter()
                        .find(|r| r.spec.id == rid)
                        .is_some_and(|r| r.level == 1 && r.spec.bounds.contains(e.position))
                });
                if !keep {
                    drop_entity(e);
                }
            }
        }
        for r in &self.regions {
            if r.level == 1 && r.home_lp == self.lp {
                for e in self.hosted.values_mut() {
                    if e.level == 0 && r.spec.bounds.contains(e.position) {
                        lift_entity(e, r.spec.id);
                    }
                }
            }
        }
    }

    /// Wait for every peer's Events and EOS for this step. Migration batches
    /// that race ahead are buffered for phase B.
    fn barrier_a(&mut self, step: u64) -> SimResult<Vec<EosMessage>> {
        let mut eos = Vec::new();
        let mut events_from = vec![false; self.n_lps as usize];
        events_from[self.lp as usize] = true;
        let timeout = Duration::from_millis(self.cfg.limits.barrier_timeout_ms);
        let mut backlog: Vec<PeerMsg> = std::mem::take(&mut self.buffered);
        backlog.reverse(); // pop() restores arrival order
        loop {
            if eos.len() == self.n_lps as usize - 1 && events_from.iter().all(|b| *b) {
                return Ok(eos);
            }
            let msg = match backlog.pop() {
                Some(m) => m,
                None => self
                    .rx
                    .recv_timeout(timeout)
                    .map_err(|_| SimError::BarrierTimeout { lp: self.lp, step })?,
            };
            match msg {
                PeerMsg::Events { from_lp, step: s, events } if s == step => {
                    for ev in events {
                        self.pending.schedule(ev, SimTime::coarse(step + 1))?;
                    }
                    events_from[from_lp as usize] = true;
                }
                PeerMsg::Eos(m) if m.step == step => eos.push(m),
                other => self.buffered.push(other),
            }
        }
    }

    /// Wait for every peer's migration batch. Next-step events and EOS from
    /// fast peers are accepted (their timestamps are beyond the next step's
    /// horizon) or buffered.
    fn barrier_b(&mut self, step: u64) -> SimResult<Vec<BatchMsg>> {
        let mut batches = Vec::new();
        let timeout = Duration::from_millis(self.cfg.limits.barrier_timeout_ms);
        let mut backlog: Vec<PeerMsg> = std::mem::take(&mut self.buffered);
        backlog.reverse();
        loop {
            if batches.len() == self.n_lps as usize - 1 {
                return Ok(batches);
            }
            let msg = match backlog.pop() {
                Some(m) => m,
                None => self
                    .rx
                    .recv_timeout(timeout)
                    .map_err(|_| SimError::BarrierTimeout { lp: self.lp, step })?,
            };
            match msg {
                PeerMsg::Batch(b) if b.step == step => batches.push(b),
                other => self.buffered.push(other),
            }
        }
    }
}
