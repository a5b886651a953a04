//! Simulated entities: the smallest migratable model components.
//!
//! An entity's full semantic state lives here so that migrating it between
//! logical processes (or lifting it into a refined region) is a plain move of
//! this struct. Random draws come from the entity's own counter-based stream.

use crate::event::{EntityId, ProductId, RegionId};
use crate::geom::{Rect, Vec2};
use crate::rng::EntityRng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

/// Most `known_offers` entries an entity keeps.
pub const KNOWN_OFFER_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sensor,
    Producer,
    Consumer,
    Relay,
}

impl Role {
    pub fn code(&self) -> u8 {
        match self {
            Role::Sensor => 0,
            Role::Producer => 1,
            Role::Consumer => 2,
            Role::Relay => 3,
        }
    }
}

/// Bounded duplicate filter for epidemic dissemination, FIFO eviction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeenSet {
    order: VecDeque<(u32, u32)>,
    #[serde(skip)]
    members: HashSet<(u32, u32)>,
    capacity: usize,
}

impl SeenSet {
    pub fn new(capacity: usize) -> Self {
        SeenSet { order: VecDeque::new(), members: HashSet::new(), capacity }
    }

    /// Rebuild the membership set after deserialization.
    pub fn rebuild(&mut self) {
        self.members = self.order.iter().copied().collect();
    }

    pub fn contains(&self, origin: EntityId, msg_seq: u32) -> bool {
        self.members.contains(&(origin.0, msg_seq))
    }

    /// Record a message id; returns false if it was already present.
    pub fn insert(&mut self, origin: EntityId, msg_seq: u32) -> bool {
        let key = (origin.0, msg_seq);
        if !self.members.insert(key) {
            return false;
        }
        self.order.push_back(key);
        if self.order.len() > self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.members.remove(&old);
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.order.len() as u32).to_le_bytes());
        for (o, s) in &self.order {
            out.extend_from_slice(&o.to_le_bytes());
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityState {
    pub id: EntityId,
    pub role: Role,
    pub position: Vec2,
    /// Meters per coarse step.
    pub speed: f64,
    pub waypoint: Option<Vec2>,
    /// Waypoint draws stay inside this box when set (clustered mobility).
    pub waypoint_box: Option<Rect>,
    pub rng: EntityRng,
    /// Next per-source event sequence number.
    pub event_seq: u64,
    /// Next dissemination message id originated by this entity.
    pub msg_seq: u32,
    /// Products this producer can offer (sorted).
    pub inventory: Vec<ProductId>,
    /// Products this consumer is interested in; mirrors its live subscriptions.
    pub interests: BTreeSet<ProductId>,
    /// Producers this consumer has heard offer a product (bounded).
    pub known_offers: BTreeMap<ProductId, EntityId>,
    /// Demand signal per product seen by a producer (saturating counts).
    pub demand: BTreeMap<ProductId, u32>,
    pub seen: SeenSet,
    /// 0 = coarse model, 1 = resident in a refined region.
    pub level: u8,
    pub region: Option<RegionId>,
}

impl EntityState {
    pub fn new(id: EntityId, role: Role, rng: EntityRng, seen_capacity: usize) -> Self {
        EntityState {
            id,
            role,
            position: Vec2::default(),
            speed: 0.0,
            waypoint: None,
            waypoint_box: None,
            rng,
            event_seq: 0,
            msg_seq: 0,
            inventory: Vec::new(),
            interests: BTreeSet::new(),
            known_offers: BTreeMap::new(),
            demand: BTreeMap::new(),
            seen: SeenSet::new(seen_capacity),
            level: 0,
            region: None,
        }
    }

    pub fn next_seq(&mut self) -> u64 {
        let s = self.event_seq;
        self.event_seq += 1;
        s
    }

    pub fn next_msg_seq(&mut self) -> u32 {
        let s = self.msg_seq;
        self.msg_seq += 1;
        s
    }

    pub fn record_offer(&mut self, product: ProductId, producer: EntityId) {
        self.known_offers.insert(product, producer);
        while self.known_offers.len() > KNOWN_OFFER_CAP {
            let last = *self.known_offers.keys().next_back().unwrap();
            self.known_offers.remove(&last);
        }
    }

    pub fn record_demand(&mut self, product: ProductId) {
        let c = self.demand.entry(product).or_insert(0);
        *c = c.saturating_add(1);
    }

    /// Canonical byte form of the semantic state; the run digest hashes this.
    /// Placement (which LP hosts the entity) is deliberately absent.
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.id.0.to_le_bytes());
        out.push(self.role.code());
        self.position.encode(out);
        out.extend_from_slice(&self.speed.to_bits().to_le_bytes());
        match self.waypoint {
            Some(w) => {
                out.push(1);
                w.encode(out);
            }
            None => out.push(0),
        }
        match self.waypoint_box {
            Some(b) => {
                out.push(1);
                out.extend_from_slice(&b.x0.to_bits().to_le_bytes());
                out.extend_from_slice(&b.y0.to_bits().to_le_bytes());
                out.extend_from_slice(&b.x1.to_bits().to_le_bytes());
                out.extend_from_slice(&b.y1.to_bits().to_le_bytes());
            }
            None => out.push(0),
        }
        self.rng.encode(out);
        out.extend_from_slice(&self.event_seq.to_le_bytes());
        out.extend_from_slice(&self.msg_seq.to_le_bytes());
        out.extend_from_slice(&(self.inventory.len() as u32).to_le_bytes());
        for p in &self.inventory {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&(self.interests.len() as u32).to_le_bytes());
        for p in &self.interests {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&(self.known_offers.len() as u32).to_le_bytes());
        for (p, e) in &self.known_offers {
            out.extend_from_slice(&p.to_le_bytes());
            out.extend_from_slice(&e.0.to_le_bytes());
        }
        out.extend_from_slice(&(self.demand.len() as u32).to_le_bytes());
        for (p, c) in &self.demand {
            out.extend_from_slice(&p.to_le_bytes());
            out.extend_from_slice(&c.to_le_bytes());
        }
        self.seen.encode(out);
        out.push(self.level);
        match self.region {
            Some(r) => {
                out.push(1);
                out.extend_from_slice(&r.to_le_bytes());
            }
            None => out.push(0),
        }
    }
}
