//! Model partitioning: assigning entities to logical processes.

use crate::error::{SimError, SimResult};
use crate::event::EntityId;
use crate::geom::{Rect, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionStrategy {
    RoundRobin,
    SpatialGrid,
}

/// EntityId -> lp_id map, versioned. Every LP holds the same snapshot at
/// every step boundary; the version bumps on each migration batch.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingTable {
    owner: Vec<u32>,
    pub version: u64,
}

impl RoutingTable {
    pub fn lp_of(&self, id: EntityId) -> SimResult<u32> {
        self.owner
            .get(id.0 as usize)
            .copied()
            .ok_or(SimError::UnknownEntity(id))
    }

    pub fn set(&mut self, id: EntityId, lp: u32) {
        self.owner[id.0 as usize] = lp;
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    /// Hosted-entity count per LP.
    pub fn counts(&self, n_lps: u32) -> Vec<usize> {
        let mut c = vec![0usize; n_lps as usize];
        for &lp in &self.owner {
            c[lp as usize] += 1;
        }
        c
    }

    pub fn entities_of(&self, lp: u32) -> impl Iterator<Item = EntityId> + '_ {
        self.owner
            .iter()
            .enumerate()
            .filter(move |(_, &o)| o == lp)
            .map(|(i, _)| EntityId(i as u32))
    }
}

/// Disjoint cover of all entities across `n_lps` logical processes.
///
/// Round-robin balances counts within one; spatial-grid overlays a square
/// grid on the area and hands contiguous cells to LPs so nearby entities
/// land together.
pub fn partition_entities(
    entities: &[(EntityId, Vec2)],
    n_lps: u32,
    strategy: PartitionStrategy,
    area: Rect,
) -> RoutingTable {
    assert!(n_lps >= 1);
    let n = entities.iter().map(|(id, _)| id.0 as usize + 1).max().unwrap_or(0);
    let mut owner = vec![0u32; n];
    match strategy {
        PartitionStrategy::RoundRobin => {
            for (i, (id, _)) in entities.iter().enumerate() {
                owner[id.0 as usize] = (i as u32) % n_lps;
            }
        }
        PartitionStrategy::SpatialGrid => {
            let g = (n_lps as f64).sqrt().ceil() as u32;
            let cells = g * g;
            for (id, pos) in entities {
                let cx = (((pos.x - area.x0) / area.width()) * g as f64).floor() as i64;
                let cy = (((pos.y - area.y0) / area.height()) * g as f64).floor() as i64;
                let cx = cx.clamp(0, g as i64 - 1) as u32;
                let cy = cy.clamp(0, g as i64 - 1) as u32;
                let cell = cy * g + cx;
                owner[id.0 as usize] = cell * n_lps / cells;
            }
        }
    }
    RoutingTable { owner, version: 0 }
}
