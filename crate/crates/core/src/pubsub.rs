//! Publish-subscribe data distribution.
//!
//! Matching is topic-keyed exact match (kind + optional product tag) plus an
//! optional region containment test against the publication's origin. The
//! index is replicated on every logical process and mutated only by update
//! records applied in a deterministic order at step boundaries, so any LP can
//! resolve a publication's recipients locally and identically.

use crate::event::{EntityId, ProductId, Topic};
use crate::geom::{Rect, Vec2};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subscription {
    pub subscriber: EntityId,
    pub topic: Topic,
    /// Containment constraint on the publication origin, if any.
    pub region: Option<Rect>,
    pub since: SimTime,
}

/// A pending index mutation, broadcast with the end-of-step exchange and
/// applied by every LP in `(subscriber, topic, seq)` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubUpdate {
    pub subscriber: EntityId,
    pub topic: Topic,
    pub region: Option<Rect>,
    pub add: bool,
    /// Per-subscriber sequence number; disambiguates same-step updates.
    pub seq: u64,
    pub effective: SimTime,
}

impl SubUpdate {
    pub fn order_key(&self) -> (u32, u32, u64) {
        (self.subscriber.0, self.topic.code(), self.seq)
    }
}

/// Per-topic subscriber table: subscriber -> (region constraint, since).
type TopicSubs = BTreeMap<EntityId, (Option<Rect>, SimTime)>;

#[derive(Clone, Debug, Default)]
pub struct SubIndex {
    by_topic: BTreeMap<(u8, Option<ProductId>), TopicSubs>,
}

impl SubIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn live_count(&self) -> usize {
        self.by_topic.values().map(|m| m.len()).sum()
    }

    /// Apply a batch of updates deterministically.
    pub fn apply(&mut self, updates: &mut Vec<SubUpdate>) {
        updates.sort_by_key(|u| u.order_key());
        for u in updates.drain(..) {
            let key = (u.topic.kind.code(), u.topic.product);
            if u.add {
                let entry = self.by_topic.entry(key).or_default();
                // At most one live subscription per (subscriber, topic):
                // re-subscribing refreshes the constraint, keeps first since.
                let since = entry.get(&u.subscriber).map(|(_, s)| *s).unwrap_or(u.effective);
                entry.insert(u.subscriber, (u.region, since));
            } else if let Some(entry) = self.by_topic.get_mut(&key) {
                entry.remove(&u.subscriber);
                if entry.is_empty() {
                    self.by_topic.remove(&key);
                }
            }
        }
    }

    /// Recipients of a publication: exactly the entities holding a matching
    /// live subscription. Sorted, deduplicated; the publisher itself is not
    /// excluded (self-subscription is legal, if pointless).
    pub fn publish(&self, topic: Topic, origin: Vec2) -> Vec<EntityId> {
        let kind = topic.kind.code();
        let mut out = Vec::new();
        let mut collect = |key: (u8, Option<ProductId>)| {
            if let Some(entry) = self.by_topic.get(&key) {
                for (id, (region, _)) in entry {
                    match region {
                        Some(r) if !r.contains(origin) => {}
                        _ => out.push(*id),
                    }
                }
            }
        };
        collect((kind, topic.product));
        if topic.product.is_some() {
            // Wildcard subscriptions on the kind alone.
            collect((kind, None));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All live subscriptions (for digests and debugging), sorted.
    pub fn snapshot(&self) -> Vec<Subscription> {
        let mut out = Vec::new();
        for ((kind, product), subs) in &self.by_topic {
            for (id, (region, since)) in subs {
                out.push(Subscription {
                    subscriber: *id,
                    topic: Topic {
                        kind: match kind {
                            0 => crate::event::TopicKind::Product,
                            1 => crate::event::TopicKind::Sensor,
                            _ => crate::event::TopicKind::Advisory,
                        },
                        product: *product,
                    },
                    region: *region,
                    since: *since,
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::TopicKind;

    fn add(sub: u32, topic: Topic, seq: u64) -> SubUpdate {
        SubUpdate {
            subscriber: EntityId(sub),
            topic,
            region: None,
            add: true,
            seq,
            effective: SimTime::coarse(1),
        }
    }

    #[test]
    fn no_subscribers_means_empty_set() {
        let idx = SubIndex::new();
        assert!(idx.publish(Topic::product(3), Vec2::default()).is_empty());
    }

    #[test]
    fn exact_topic_match() {
        let mut idx = SubIndex::new();
        let mut ups = vec![add(1, Topic::product(7), 0), add(2, Topic::product(7), 0), add(3, Topic::product(8), 0)];
        idx.apply(&mut ups);
        assert_eq!(idx.publish(Topic::product(7), Vec2::default()), vec![EntityId(1), EntityId(2)]);
    }

    #[test]
    fn wildcard_kind_subscription_matches_any_product() {
        let mut idx = SubIndex::new();
        let mut ups = vec![add(4, Topic { kind: TopicKind::Sensor, product: None }, 0)];
        idx.apply(&mut ups);
        assert_eq!(idx.publish(Topic::sensor(1), Vec2::default()), vec![EntityId(4)]);
        assert_eq!(idx.publish(Topic::sensor(2), Vec2::default()), vec![EntityId(4)]);
    }

    #[test]
    fn region_constraint_filters_on_origin() {
        let mut idx = SubIndex::new();
        let mut ups = vec![SubUpdate {
            subscriber: EntityId(5),
            topic: Topic::product(1),
            region: Some(Rect::new(0.0, 0.0, 10.0, 10.0)),
            add: true,
            seq: 0,
            effective: SimTime::coarse(1),
        }];
        idx.apply(&mut ups);
        assert_eq!(idx.publish(Topic::product(1), Vec2::new(5.0, 5.0)), vec![EntityId(5)]);
        assert!(idx.publish(Topic::product(1), Vec2::new(50.0, 5.0)).is_empty());
    }

    #[test]
    fn unsubscribe_removes_live_subscription() {
        let mut idx = SubIndex::new();
        let mut ups = vec![add(1, Topic::product(7), 0)];
        idx.apply(&mut ups);
        let mut downs = vec![SubUpdate { add: false, ..add(1, Topic::product(7), 1) }];
        idx.apply(&mut downs);
        assert!(idx.publish(Topic::product(7), Vec2::default()).is_empty());
        assert_eq!(idx.live_count(), 0);
    }

    #[test]
    fn resubscribe_is_idempotent_and_keeps_first_since() {
        let mut idx = SubIndex::new();
        let mut ups = vec![add(1, Topic::product(7), 0)];
        idx.apply(&mut ups);
        let mut again = vec![SubUpdate { effective: SimTime::coarse(9), ..add(1, Topic::product(7), 1) }];
        idx.apply(&mut again);
        let snap = idx.snapshot();
        assert_eq!(snap.len(), 1);
        assert_eq!(snap[0].since, SimTime::coarse(1));
    }
}
