//! Smart-territory scenario: entity behaviors and population construction.
//!
//! Behaviors are pure functions of the entity's own state and the delivered
//! event; everything an entity wants to do to the outside world is returned
//! as emission intents that the runtime timestamps according to the lookahead
//! and cross-level gating rules. This keeps behaviors oblivious to
//! partitioning, which is what makes parallel runs equal sequential ones.

use crate::config::ScenarioConfig;
use crate::entity::{EntityState, Role};
use crate::error::{SimError, SimResult};
use crate::event::{Dst, EntityId, Event, Payload, ProductId, Topic};
use crate::geom::{Rect, Vec2};
use crate::mobility::{plan_coarse_move, Trajectory};
use crate::pubsub::SubUpdate;
use crate::rng::EntityRng;
use crate::time::SimTime;

/// Outbound intent produced by a behavior; the runtime assigns timestamps.
#[derive(Clone, Debug, PartialEq)]
pub enum Emit {
    /// Entity-to-entity interaction, subject to the one-step lookahead (or
    /// fine-step lookahead when both parties share a refined region).
    ToEntity { dst: EntityId, payload: Payload },
    /// Self-scheduled control event at an explicit future coarse step.
    SelfAt { step: u64, payload: Payload },
    /// Publication into the data-distribution layer.
    Publish { topic: Topic },
}

/// Per-event behavior context and collected effects.
pub struct BehaviorOutput {
    pub emits: Vec<Emit>,
    pub sub_updates: Vec<SubUpdate>,
    /// Set when a resident's move-update was planned but must be applied in
    /// fine increments by the enclosing window.
    pub trajectory: Option<Trajectory>,
}

impl BehaviorOutput {
    fn new() -> Self {
        BehaviorOutput { emits: Vec::new(), sub_updates: Vec::new(), trajectory: None }
    }
}

/// Scenario parameters the behaviors need, extracted once per run.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub area: Rect,
    pub products: u16,
    pub publish_period: u32,
    pub sensor_period: u32,
    pub resubscribe_prob: f64,
    pub ping_prob: f64,
}

impl ModelParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ModelParams {
            area: cfg.area.rect(),
            products: cfg.market.products,
            publish_period: cfg.market.publish_period,
            sensor_period: cfg.market.sensor_period,
            resubscribe_prob: cfg.market.resubscribe_prob,
            ping_prob: cfg.market.ping_prob,
        }
    }
}

/// Publish availability of a product this producer actually stocks.
pub fn producer_publish_availability(p: &EntityState, product: ProductId) -> SimResult<Topic> {
    if !p.inventory.contains(&product) {
        return Err(SimError::NotInInventory { producer: p.id, product });
    }
    Ok(Topic::product(product))
}

/// Guidance inside a refined market region: the consumer's next waypoint is
/// the producer's current (dynamically determined) position.
pub fn guide_to_producer(consumer: &EntityState, producer: &EntityState) -> SimResult<Vec2> {
    if consumer.level != 1 || producer.level != 1 || consumer.region != producer.region {
        return Err(SimError::NotCoLocated { consumer: consumer.id, producer: producer.id });
    }
    Ok(producer.position)
}

/// Deliver one event to its entity. `apply_move` is false inside a fine
/// window, where the planned trajectory is applied in `R` increments instead.
pub fn handle_event(
    e: &mut EntityState,
    ev: &Event,
    now: SimTime,
    params: &ModelParams,
    apply_move: bool,
) -> BehaviorOutput {
    let mut out = BehaviorOutput::new();
    match &ev.payload {
        Payload::Empty => {
            // Per-step tick: move, then maybe rotate an interest.
            let traj = plan_coarse_move(e, params.area);
            if apply_move {
                e.position = traj.end;
            } else {
                out.trajectory = Some(traj);
            }
            if e.role == Role::Consumer && params.resubscribe_prob > 0.0
                && e.rng.chance(params.resubscribe_prob) && !e.interests.is_empty() {
                    rotate_interest(e, params, now, &mut out);
                }
            out.emits.push(Emit::SelfAt { step: now.coarse + 1, payload: Payload::Empty });
        }
        Payload::Notification { product, producer } => {
            if e.interests.contains(product) {
                e.record_offer(*product, *producer);
                let ping = match params.ping_prob {
                    p if p >= 1.0 => true,
                    p if p <= 0.0 => false,
                    p => e.rng.chance(p),
                };
                if ping {
                    out.emits.push(Emit::ToEntity {
                        dst: *producer,
                        payload: Payload::Ping { product: *product },
                    });
                }
            }
        }
        Payload::Ping { product } => {
            e.record_demand(*product);
        }
        Payload::PublishTick => {
            if !e.inventory.is_empty() {
                let idx = e.rng.next_below(e.inventory.len() as u64) as usize;
                let product = e.inventory[idx];
                let topic = producer_publish_availability(e, product)
                    .expect("inventory draw is always stocked");
                out.emits.push(Emit::Publish { topic });
            }
            out.emits.push(Emit::SelfAt {
                step: now.coarse + params.publish_period as u64,
                payload: Payload::PublishTick,
            });
        }
        Payload::SensorTick => {
            let tag = (e.id.0 % params.products as u32) as u16;
            out.emits.push(Emit::Publish { topic: Topic::sensor(tag) });
            out.emits.push(Emit::SelfAt {
                step: now.coarse + params.sensor_period as u64,
                payload: Payload::SensorTick,
            });
        }
        Payload::Frame { origin, msg_seq, topic, .. } => {
            // A frame that survived a coarsening boundary: abstract delivery
            // to the application, no relaying outside a fine window.
            if e.seen.insert(*origin, *msg_seq) {
                if let crate::event::FrameTopic::Product(p) = topic {
                    if e.interests.contains(p) {
                        e.record_offer(*p, *origin);
                    }
                }
            }
        }
        Payload::Publication { .. } => {
            // Topic-addressed; resolved by the runtime, never delivered here.
            debug_assert!(false, "publication delivered to an entity");
        }
    }
    out
}

fn rotate_interest(
    e: &mut EntityState,
    params: &ModelParams,
    now: SimTime,
    out: &mut BehaviorOutput,
) {
    let interests: Vec<ProductId> = e.interests.iter().copied().collect();
    let drop = interests[e.rng.next_below(interests.len() as u64) as usize];
    let add = (e.rng.next_below(params.products as u64)) as u16;
    if add == drop || e.interests.contains(&add) {
        return;
    }
    e.interests.remove(&drop);
    e.interests.insert(add);
    let effective = SimTime::coarse(now.coarse + 1);
    out.sub_updates.push(SubUpdate {
        subscriber: e.id,
        topic: Topic::product(drop),
        region: None,
        add: false,
        seq: e.next_seq(),
        effective,
    });
    out.sub_updates.push(SubUpdate {
        subscriber: e.id,
        topic: Topic::product(add),
        region: None,
        add: true,
        seq: e.next_seq(),
        effective,
    });
}

/// Fully initialized scenario state, identical for every LP count.
pub struct InitialModel {
    pub entities: Vec<EntityState>,
    /// Self-events seeding the per-entity tick chains, scheduled from t=0.
    pub events: Vec<Event>,
    /// Initial consumer subscriptions.
    pub sub_updates: Vec<SubUpdate>,
}

/// Build the population: sensors, then producers, consumers, relays, with
/// ids assigned densely in that order. All draws come from each entity's own
/// stream so the result does not depend on construction order.
pub fn build_population(cfg: &ScenarioConfig) -> InitialModel {
    let area = cfg.area.rect();
    let default_palette: Vec<ProductId> = (0..cfg.market.products).collect();
    let mut entities = Vec::with_capacity(cfg.counts.total() as usize);
    let mut events = Vec::new();
    let mut sub_updates = Vec::new();

    let roles = [
        (Role::Sensor, cfg.counts.sensors),
        (Role::Producer, cfg.counts.producers),
        (Role::Consumer, cfg.counts.consumers),
        (Role::Relay, cfg.counts.relays),
    ];
    let mut next_id = 0u32;
    for (role, count) in roles {
        // Placement overrides claim leading entities of the role, in order.
        let mut overrides: Vec<(&crate::config::PlacementCfg, u32)> = Vec::new();
        for p in cfg.placements.iter().filter(|p| p.role == role) {
            overrides.push((p, p.count));
        }
        let mut ovr_iter = overrides.into_iter();
        let mut current: Option<(&crate::config::PlacementCfg, u32, u32)> = None; // (cfg, left, idx)

        for _ in 0..count {
            let id = EntityId(next_id);
            next_id += 1;
            let rng = EntityRng::new(cfg.seed, id.0);
            let mut e = EntityState::new(id, role, rng, cfg.limits.seen_capacity as usize);

            if current.as_ref().is_none_or(|(_, left, _)| *left == 0) {
                current = ovr_iter.next().map(|(p, c)| (p, c, 0));
            }
            let placement = match &mut current {
                Some((p, left, idx)) if *left > 0 => {
                    *left -= 1;
                    let i = *idx;
                    *idx += 1;
                    Some((*p, i))
                }
                _ => None,
            };

            // Position.
            match placement {
                Some((p, i)) if p.positions.is_some() => {
                    let xy = p.positions.as_ref().unwrap()[i as usize];
                    e.position = Vec2::new(xy[0], xy[1]);
                }
                Some((p, _)) if p.position.is_some() => {
                    let xy = p.position.unwrap();
                    e.position = Vec2::new(xy[0], xy[1]);
                }
                _ => {
                    e.position =
                        Vec2::new(e.rng.range_f64(area.x0, area.x1), e.rng.range_f64(area.y0, area.y1));
                }
            }
            // Speed.
            match placement {
                Some((p, _)) if p.speed.is_some() => e.speed = p.speed.unwrap(),
                _ => {
                    let [lo, hi] = cfg.speed.for_role(role);
                    e.speed = if hi > lo { e.rng.range_f64(lo, hi) } else { lo };
                }
            }
            if let Some((p, _)) = placement {
                if let Some(w) = p.waypoint {
                    e.waypoint = Some(Vec2::new(w[0], w[1]));
                }
                if let Some(b) = p.waypoint_box {
                    e.waypoint_box = Some(Rect::new(b[0], b[1], b[2], b[3]));
                }
            }
            let palette: &[ProductId] = placement
                .and_then(|(p, _)| p.products.as_deref())
                .unwrap_or(&default_palette);

            match role {
                Role::Producer => {
                    let want = (cfg.market.inventory_per_producer as usize).min(palette.len());
                    while e.inventory.len() < want {
                        let p = palette[e.rng.next_below(palette.len() as u64) as usize];
                        if !e.inventory.contains(&p) {
                            e.inventory.push(p);
                        }
                    }
                    e.inventory.sort_unstable();
                    let offset = e.rng.next_below(cfg.market.publish_period as u64);
                    events.push(self_event(&mut e, SimTime::coarse(offset), Payload::PublishTick));
                }
                Role::Consumer => {
                    let want = (cfg.market.interests_per_consumer as usize).min(palette.len());
                    while e.interests.len() < want {
                        let p = palette[e.rng.next_below(palette.len() as u64) as usize];
                        e.interests.insert(p);
                    }
                    for p in e.interests.clone() {
                        sub_updates.push(SubUpdate {
                            subscriber: e.id,
                            topic: Topic::product(p),
                            region: None,
                            add: true,
                            seq: e.next_seq(),
                            effective: SimTime::ZERO,
                        });
                    }
                }
                Role::Sensor => {
                    let offset = e.rng.next_below(cfg.market.sensor_period as u64);
                    events.push(self_event(&mut e, SimTime::coarse(offset), Payload::SensorTick));
                }
                Role::Relay => {}
            }
            // Everyone ticks movement from step 0.
            events.push(self_event(&mut e, SimTime::ZERO, Payload::Empty));
            entities.push(e);
        }
    }
    InitialModel { entities, events, sub_updates }
}

fn self_event(e: &mut EntityState, at: SimTime, payload: Payload) -> Event {
    Event { time: at, src: e.id, dst: Dst::Entity(e.id), payload, seq: e.next_seq() }
}
