//! Unit-disk radio and epidemic dissemination, used at the fine level only.

use crate::entity::EntityState;
use crate::event::{EntityId, FrameTopic};
use crate::geom::Vec2;
use std::collections::HashMap;

/// Two nodes hear each other iff their euclidean distance is at most `range`
/// (boundary inclusive).
pub fn connectivity(a: Vec2, b: Vec2, range: f64) -> bool {
    a.distance(&b) <= range
}

/// Uniform-grid spatial index for one-hop neighbor queries. Cell size equals
/// the radio range, so neighbors live in the 3x3 cell block around a point.
pub struct NeighborIndex {
    range: f64,
    cells: HashMap<(i64, i64), Vec<(EntityId, Vec2)>>,
}

impl NeighborIndex {
    pub fn build(points: impl Iterator<Item = (EntityId, Vec2)>, range: f64) -> Self {
        assert!(range > 0.0, "radio range must be positive");
        let mut cells: HashMap<(i64, i64), Vec<(EntityId, Vec2)>> = HashMap::new();
        for (id, p) in points {
            cells.entry(Self::cell_of(p, range)).or_default().push((id, p));
        }
        NeighborIndex { range, cells }
    }

    fn cell_of(p: Vec2, range: f64) -> (i64, i64) {
        ((p.x / range).floor() as i64, (p.y / range).floor() as i64)
    }

    /// Neighbors of a node at `pos` (excluding `id` itself), sorted by id.
    pub fn neighbors(&self, id: EntityId, pos: Vec2) -> Vec<EntityId> {
        let (cx, cy) = Self::cell_of(pos, self.range);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    for (other, p) in bucket {
                        if *other != id && connectivity(pos, *p, self.range) {
                            out.push(*other);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Default, PartialEq)]
pub struct RelayOutcome {
    /// The message was new and (if the topic matched an interest) handed to
    /// the local application.
    pub accepted: bool,
    pub delivered_to_app: bool,
    /// Neighbors to forward to, with `hop + 1`.
    pub forwards: Vec<EntityId>,
}

/// Process one received dissemination frame: filter duplicates, deliver to
/// the application on topic match, and fan out to current neighbors while the
/// ttl allows. `budget` caps forwards per node per fine step (0 = unlimited).
#[allow(clippy::too_many_arguments)]
pub fn epidemic_relay(
    e: &mut EntityState,
    origin: EntityId,
    msg_seq: u32,
    topic: FrameTopic,
    hop: u16,
    ttl: u16,
    neighbors: &[EntityId],
    budget: u32,
) -> RelayOutcome {
    if !e.seen.insert(origin, msg_seq) {
        return RelayOutcome::default();
    }
    let delivered_to_app = match topic {
        FrameTopic::Product(p) => {
            let interested = e.interests.contains(&p);
            if interested {
                e.record_offer(p, origin);
            }
            interested
        }
        FrameTopic::Advisory(_) => true,
    };
    let mut forwards = Vec::new();
    if hop < ttl {
        for &n in neighbors {
            if budget != 0 && forwards.len() as u32 >= budget {
                break;
            }
            forwards.push(n);
        }
    }
    RelayOutcome { accepted: true, delivered_to_app, forwards }
}
