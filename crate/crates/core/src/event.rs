//! Events: the unit of model evolution.
//!
//! Every interaction between simulated entities is a timestamped event. The
//! tuple `(time, dst, src, seq)` is a unique total-order key across the whole
//! run; processing order is non-decreasing in that key.

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type ProductId = u16;
pub type RegionId = u16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TopicKind {
    Product,
    Sensor,
    Advisory,
}

impl TopicKind {
    pub fn code(&self) -> u8 {
        match self {
            TopicKind::Product => 0,
            TopicKind::Sensor => 1,
            TopicKind::Advisory => 2,
        }
    }
}

/// Structured topic key: a kind plus an optional product tag. Subscriptions
/// may additionally carry a region constraint (see `pubsub`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Topic {
    pub kind: TopicKind,
    pub product: Option<ProductId>,
}

impl Topic {
    pub fn product(p: ProductId) -> Self {
        Topic { kind: TopicKind::Product, product: Some(p) }
    }

    pub fn sensor(p: ProductId) -> Self {
        Topic { kind: TopicKind::Sensor, product: Some(p) }
    }

    /// Compact code used for deterministic ordering and encoding.
    pub fn code(&self) -> u32 {
        let prod = match self.product {
            Some(p) => 1u32 << 16 | p as u32,
            None => 0,
        };
        (self.kind.code() as u32) << 24 | prod
    }
}

/// Destination of an event: a specific entity or a topic (fan-out resolved
/// by the publish-subscribe layer on the publisher's logical process).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dst {
    Entity(EntityId),
    Topic(Topic),
}

impl Dst {
    /// Deterministic ordering code: entity ids sort below topics.
    pub fn code(&self) -> u64 {
        match self {
            Dst::Entity(id) => id.0 as u64,
            Dst::Topic(t) => 1u64 << 32 | t.code() as u64,
        }
    }

    pub fn entity(&self) -> Option<EntityId> {
        match self {
            Dst::Entity(id) => Some(*id),
            Dst::Topic(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    MoveUpdate,
    RadioFrame,
    Publication,
    Notification,
    Control,
}

impl EventKind {
    pub fn code(&self) -> u8 {
        match self {
            EventKind::MoveUpdate => 0,
            EventKind::RadioFrame => 1,
            EventKind::Publication => 2,
            EventKind::Notification => 3,
            EventKind::Control => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::MoveUpdate => "move-update",
            EventKind::RadioFrame => "radio-frame",
            EventKind::Publication => "publication",
            EventKind::Notification => "notification",
            EventKind::Control => "control",
        }
    }
}

/// Topic of a disseminated message: a product tag or an advisory class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FrameTopic {
    Product(ProductId),
    Advisory(u8),
}

impl FrameTopic {
    pub fn code(&self) -> u32 {
        match self {
            FrameTopic::Product(p) => *p as u32,
            FrameTopic::Advisory(a) => 1 << 24 | *a as u32,
        }
    }
}

/// Typed payloads with a fixed byte layout per event kind. The byte form is
/// what checksums, digests and traces see.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Empty,
    /// Producer announces availability; origin position feeds region-scoped
    /// subscription matching.
    Publication { topic: Topic, origin_x: f64, origin_y: f64 },
    Notification { product: ProductId, producer: EntityId },
    /// One hop of an epidemic dissemination message.
    Frame { origin: EntityId, msg_seq: u32, topic: FrameTopic, hop: u16, ttl: u16 },
    /// Consumer pings a producer it learned about (demand signal).
    Ping { product: ProductId },
    /// Self-scheduled producer publication tick.
    PublishTick,
    /// Self-scheduled sensor reading tick.
    SensorTick,
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::Empty => EventKind::MoveUpdate,
            Payload::Publication { .. } => EventKind::Publication,
            Payload::Notification { .. } => EventKind::Notification,
            Payload::Frame { .. } => EventKind::RadioFrame,
            Payload::Ping { .. } | Payload::PublishTick | Payload::SensorTick => EventKind::Control,
        }
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        match self {
            Payload::Empty => out.push(0),
            Payload::Publication { topic, origin_x, origin_y } => {
                out.push(1);
                out.extend_from_slice(&topic.code().to_le_bytes());
                out.extend_from_slice(&origin_x.to_bits().to_le_bytes());
                out.extend_from_slice(&origin_y.to_bits().to_le_bytes());
            }
            Payload::Notification { product, producer } => {
                out.push(2);
                out.extend_from_slice(&product.to_le_bytes());
                out.extend_from_slice(&producer.0.to_le_bytes());
            }
            Payload::Frame { origin, msg_seq, topic, hop, ttl } => {
                out.push(3);
                out.extend_from_slice(&origin.0.to_le_bytes());
                out.extend_from_slice(&msg_seq.to_le_bytes());
                out.extend_from_slice(&topic.code().to_le_bytes());
                out.extend_from_slice(&hop.to_le_bytes());
                out.extend_from_slice(&ttl.to_le_bytes());
            }
            Payload::Ping { product } => {
                out.push(4);
                out.extend_from_slice(&product.to_le_bytes());
            }
            Payload::PublishTick => out.push(5),
            Payload::SensorTick => out.push(6),
        }
    }

    pub fn encoded(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(24);
        self.encode(&mut v);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: SimTime,
    pub src: EntityId,
    pub dst: Dst,
    pub payload: Payload,
    /// Per-source monotonically increasing sequence number.
    pub seq: u64,
}

/// Strict total-order key over all events ever created.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventKey {
    pub time: SimTime,
    pub dst: u64,
    pub src: u32,
    pub seq: u64,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    pub fn key(&self) -> EventKey {
        EventKey { time: self.time, dst: self.dst.code(), src: self.src.0, seq: self.seq }
    }

    /// Canonical byte form: key fields then payload. Stable across runs.
    pub fn encode(&self, out: &mut Vec<u8>) {
        self.time.encode(out);
        out.extend_from_slice(&self.dst.code().to_le_bytes());
        out.extend_from_slice(&self.src.0.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(self.kind().code());
        self.payload.encode(out);
    }

    pub fn checksum(&self) -> u64 {
        let mut buf = Vec::with_capacity(64);
        self.encode(&mut buf);
        crate::rng::hash_bytes(&buf)
    }
}
