//! Adaptive entity reallocation between logical processes.
//!
//! Each LP keeps a sliding window of per-entity interaction counts and, every
//! evaluation interval, proposes migrating entities whose external affinity
//! to some other LP exceeds a threshold. Proposals from all LPs are then
//! filtered by a deterministic load-balance guard that every LP applies
//! identically, so routing tables never diverge.

use crate::event::EntityId;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationParams {
    /// Observation window in coarse steps.
    pub window: u32,
    /// Evaluate every this many coarse steps.
    pub interval: u32,
    /// External-affinity threshold for proposing a move.
    pub affinity: f64,
    /// Allowed relative deviation of hosted counts from the mean.
    pub load_guard: f64,
    /// An entity cannot migrate twice within `2 * window` steps.
    pub hysteresis: u32,
}

impl Default for MigrationParams {
    fn default() -> Self {
        MigrationParams { window: 16, interval: 8, affinity: 0.7, load_guard: 0.25, hysteresis: 32 }
    }
}

/// Sliding window of one entity's sends per destination LP. Entries are
/// tagged with the coarse step they belong to, so idle steps cost nothing;
/// callers prune to the window before reading.
#[derive(Clone, Debug, Default)]
pub struct InteractionWindow {
    steps: VecDeque<(u64, Vec<u32>)>,
    totals: Vec<u64>,
    total: u64,
}

impl InteractionWindow {
    pub fn new(n_lps: usize) -> Self {
        InteractionWindow { steps: VecDeque::new(), totals: vec![0; n_lps], total: 0 }
    }

    /// Fold one finished step's counts into the window.
    pub fn roll(&mut self, step: u64, step_counts: Vec<u32>) {
        debug_assert_eq!(step_counts.len(), self.totals.len());
        debug_assert!(self.steps.back().is_none_or(|(s, _)| *s < step));
        for (t, c) in self.totals.iter_mut().zip(&step_counts) {
            *t += *c as u64;
            self.total += *c as u64;
        }
        self.steps.push_back((step, step_counts));
    }

    /// Evict entries older than `window` steps before `now`.
    pub fn prune(&mut self, now: u64, window: u32) {
        while let Some((s, _)) = self.steps.front() {
            if *s + window as u64 > now {
                break;
            }
            let (_, old) = self.steps.pop_front().unwrap();
            for (t, c) in self.totals.iter_mut().zip(&old) {
                *t -= *c as u64;
                self.total -= *c as u64;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn sends_to(&self, lp: u32) -> u64 {
        self.totals[lp as usize]
    }

    pub fn affinity(&self, lp: u32) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.totals[lp as usize] as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationDecision {
    pub entity: EntityId,
    pub from_lp: u32,
    pub to_lp: u32,
    /// Affinity toward `to_lp` over the decision window.
    pub affinity: f64,
    /// Coarse boundary at which the transfer happens.
    pub effective_step: u64,
}

impl MigrationDecision {
    pub fn new(
        entity: EntityId,
        from_lp: u32,
        to_lp: u32,
        affinity: f64,
        effective_step: u64,
    ) -> Option<Self> {
        if from_lp == to_lp {
            return None;
        }
        Some(MigrationDecision { entity, from_lp, to_lp, affinity, effective_step })
    }
}

/// Propose migrations for one LP's hosted entities. Entities pinned inside a
/// refined region or still inside the hysteresis window are skipped by the
/// caller (they are not in `candidates`).
pub fn evaluate_migrations<'a>(
    candidates: impl Iterator<Item = (EntityId, &'a InteractionWindow)>,
    current_lp: u32,
    params: &MigrationParams,
    effective_step: u64,
) -> Vec<MigrationDecision> {
    let mut out = Vec::new();
    for (entity, win) in candidates {
        if win.total() == 0 {
            continue;
        }
        let mut best: Option<(u32, u64)> = None;
        for lp in 0..win.totals.len() as u32 {
            if lp == current_lp {
                continue;
            }
            let s = win.sends_to(lp);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((lp, s));
            }
        }
        if let Some((lp, sends)) = best {
            let aff = sends as f64 / win.total() as f64;
            // Locality monotonicity: the move must strictly improve the
            // entity's would-be local-send fraction.
            if aff > params.affinity && sends > win.sends_to(current_lp) {
                if let Some(d) = MigrationDecision::new(entity, current_lp, lp, aff, effective_step)
                {
                    out.push(d);
                }
            }
        }
    }
    out
}

/// Deterministic load-balance guard over the union of all LPs' proposals.
///
/// Decisions are considered in entity-id order; one is accepted only if it
/// keeps (or brings) both affected LPs within `load_guard * mean / 2` of the
/// mean hosted count, which bounds max-min spread by `load_guard * mean`.
/// `counts` is updated in place with the accepted moves.
pub fn apply_load_guard(
    mut proposals: Vec<MigrationDecision>,
    counts: &mut [i64],
    load_guard: f64,
) -> Vec<MigrationDecision> {
    proposals.sort_by_key(|d| d.entity);
    proposals.dedup_by_key(|d| d.entity);
    let n: i64 = counts.iter().sum();
    let mean = n as f64 / counts.len() as f64;
    let cap = load_guard * mean / 2.0;
    let dev = |c: i64| (c as f64 - mean).abs();
    let mut accepted = Vec::new();
    for d in proposals {
        let (f, t) = (d.from_lp as usize, d.to_lp as usize);
        let from_ok = dev(counts[f] - 1) <= cap || dev(counts[f] - 1) < dev(counts[f]);
        let to_ok = dev(counts[t] + 1) <= cap || dev(counts[t] + 1) < dev(counts[t]);
        if from_ok && to_ok {
            counts[f] -= 1;
            counts[t] += 1;
            accepted.push(d);
        }
    }
    accepted
}
