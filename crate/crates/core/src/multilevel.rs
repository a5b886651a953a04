//! Multi-level model refinement.
//!
//! Regions of the area can switch between a coarse (level 0) and a fine
//! (level 1) model at coarse step boundaries. While refined, residents
//! advance in `ratio` fine phases per coarse step; interactions that cross
//! levels are gated to the next coarse boundary. The fine window itself is
//! executed by the owning LP worker (see `runtime`); this module holds the
//! level bookkeeping, triggers, the cross-level gate and the state lift/drop.

use crate::entity::EntityState;
use crate::error::{SimError, SimResult};
use crate::event::RegionId;
use crate::geom::Rect;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub id: RegionId,
    pub bounds: Rect,
    /// Fine steps per enclosing coarse step.
    pub ratio: u32,
    /// Refine when the resident count reaches this (level 0 only).
    pub theta_hi: u32,
    /// Coarsen when the resident count falls to this (level 1 only).
    pub theta_lo: u32,
    /// Explicit schedule overriding the density trigger:
    /// refine at `.0`, coarsen at `.1` (None = never coarsen on schedule).
    pub schedule: Option<(u64, Option<u64>)>,
}

impl RegionSpec {
    pub fn validate(&self) -> SimResult<()> {
        if self.ratio < 1 {
            return Err(SimError::Validation {
                key: format!("regions[{}].ratio", self.id),
                reason: "must be >= 1".into(),
            });
        }
        if self.schedule.is_none() && self.theta_lo >= self.theta_hi {
            return Err(SimError::Validation {
                key: format!("regions[{}].theta_lo", self.id),
                reason: format!(
                    "hysteresis requires theta_lo < theta_hi (got {} >= {})",
                    self.theta_lo, self.theta_hi
                ),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionAction {
    Refine(RegionId),
    Coarsen(RegionId),
}

/// Replicated per-region level state. Every LP tracks levels; only the home
/// LP owns residents and runs the fine window.
#[derive(Clone, Debug)]
pub struct RegionState {
    pub spec: RegionSpec,
    pub level: u8,
    pub home_lp: u32,
}

impl RegionState {
    pub fn new(spec: RegionSpec, n_lps: u32) -> Self {
        let home_lp = spec.id as u32 % n_lps;
        RegionState { spec, level: 0, home_lp }
    }
}

/// Decide refine/coarsen actions at a coarse boundary from global resident
/// counts. Emits at most one action per region; never both.
pub fn check_refinement_triggers(
    regions: &[(RegionSpec, u8, u32)],
    boundary_step: u64,
) -> Vec<RegionAction> {
    let mut actions = Vec::new();
    for (spec, level, residents) in regions {
        match spec.schedule {
            Some((refine_at, coarsen_at)) => {
                if *level == 0 && boundary_step == refine_at {
                    actions.push(RegionAction::Refine(spec.id));
                } else if *level == 1 && coarsen_at == Some(boundary_step) {
                    actions.push(RegionAction::Coarsen(spec.id));
                }
            }
            None => {
                if *level == 0 && *residents >= spec.theta_hi {
                    actions.push(RegionAction::Refine(spec.id));
                } else if *level == 1 && *residents <= spec.theta_lo {
                    actions.push(RegionAction::Coarsen(spec.id));
                }
            }
        }
    }
    actions
}

/// Cross-level interactions are delivered only at coarse boundaries: the
/// next boundary strictly after the emission time.
pub fn gate_cross_level_event(src_level: u8, dst_level: u8, emission: SimTime) -> SimTime {
    debug_assert_ne!(src_level, dst_level, "gate applies across levels only");
    emission.next_boundary()
}

/// Flip a region to the fine model. Must happen on a coarse boundary.
pub fn refine_region(region: &mut RegionState, now: SimTime) -> SimResult<()> {
    if !now.is_boundary() {
        return Err(SimError::MidStepRefinement(now));
    }
    debug_assert_eq!(region.level, 0);
    region.level = 1;
    Ok(())
}

/// Flip a region back to the coarse model. Must happen on a coarse boundary.
pub fn coarsen_region(region: &mut RegionState, now: SimTime) -> SimResult<()> {
    if !now.is_boundary() {
        return Err(SimError::MidStepCoarsening(now));
    }
    debug_assert_eq!(region.level, 1);
    region.level = 0;
    Ok(())
}

/// Lift an entity into the fine model. Position is preserved exactly; radio
/// state (neighbor cache) starts empty and lives only inside the fine window,
/// so lift and drop are mutually inverse on quiescent state.
pub fn lift_entity(e: &mut EntityState, region: RegionId) {
    e.level = 1;
    e.region = Some(region);
}

/// Drop an entity back to the coarse model, discarding fine-only state.
pub fn drop_entity(e: &mut EntityState) {
    e.level = 0;
    e.region = None;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(hi: u32, lo: u32) -> RegionSpec {
        RegionSpec {
            id: 0,
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            ratio: 3,
            theta_hi: hi,
            theta_lo: lo,
            schedule: None,
        }
    }

    #[test]
    fn below_threshold_no_action() {
        let actions = check_refinement_triggers(&[(spec(50, 30), 0, 49)], 10);
        assert!(actions.is_empty());
    }

    #[test]
    fn at_threshold_refines() {
        let actions = check_refinement_triggers(&[(spec(50, 30), 0, 50)], 10);
        assert_eq!(actions, vec![RegionAction::Refine(0)]);
    }

    #[test]
    fn hysteresis_band_oscillation_is_quiet() {
        // Population oscillating 45..55 with theta_hi=50, theta_lo=30:
        // one refine on the first crossing, never a coarsen.
        let s = spec(50, 30);
        let mut level = 0u8;
        let mut refines = 0;
        let mut coarsens = 0;
        for step in 0..100u64 {
            let pop = if step % 2 == 0 { 45 } else { 55 };
            for a in check_refinement_triggers(&[(s.clone(), level, pop)], step) {
                match a {
                    RegionAction::Refine(_) => {
                        refines += 1;
                        level = 1;
                    }
                    RegionAction::Coarsen(_) => {
                        coarsens += 1;
                        level = 0;
                    }
                }
            }
        }
        assert_eq!(refines, 1);
        assert_eq!(coarsens, 0);
    }

    #[test]
    fn gate_delivers_at_next_strict_boundary() {
        assert_eq!(
            gate_cross_level_event(1, 0, SimTime::fine(5, 1)),
            SimTime::coarse(6)
        );
        assert_eq!(
            gate_cross_level_event(0, 1, SimTime::coarse(5)),
            SimTime::coarse(6)
        );
    }

    #[test]
    fn off_boundary_transitions_are_fatal() {
        let mut r = RegionState::new(spec(50, 30), 2);
        assert!(matches!(
            refine_region(&mut r, SimTime::fine(3, 1)),
            Err(SimError::MidStepRefinement(_))
        ));
        refine_region(&mut r, SimTime::coarse(3)).unwrap();
        assert!(matches!(
            coarsen_region(&mut r, SimTime::fine(4, 2)),
            Err(SimError::MidStepCoarsening(_))
        ));
        coarsen_region(&mut r, SimTime::coarse(4)).unwrap();
        assert_eq!(r.level, 0);
    }

    #[test]
    fn hysteresis_validation() {
        let mut s = spec(50, 50);
        assert!(s.validate().is_err());
        s.theta_lo = 30;
        assert!(s.validate().is_ok());
    }
}
