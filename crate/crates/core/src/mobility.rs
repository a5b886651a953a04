//! Random-waypoint mobility at both model levels.
//!
//! A coarse move advances an entity toward its waypoint by at most `speed`
//! meters. The fine-level variant realizes the same displacement as `R`
//! interpolated sub-moves whose final position is bit-identical to the coarse
//! endpoint, so refining and coarsening a quiescent region round-trips
//! exactly.

use crate::entity::EntityState;
use crate::geom::{Rect, Vec2};

/// One coarse step's worth of movement, planned up front.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trajectory {
    pub start: Vec2,
    pub end: Vec2,
}

fn draw_waypoint(e: &mut EntityState, area: Rect) -> Vec2 {
    let b = e.waypoint_box.unwrap_or(area);
    let x = e.rng.range_f64(b.x0, b.x1);
    let y = e.rng.range_f64(b.y0, b.y1);
    Vec2::new(x, y)
}

fn clamp(p: Vec2, area: Rect) -> Vec2 {
    // Interpolation rounding can nudge a coordinate past the segment ends.
    Vec2::new(p.x.clamp(area.x0, area.x1), p.y.clamp(area.y0, area.y1))
}

/// Plan the entity's move for one coarse step. Waypoint redraws and all RNG
/// draws happen here, exactly once per coarse step, regardless of whether the
/// displacement is then applied in one piece (level 0) or as `R` fine
/// sub-moves (level 1). The entity's position is left untouched.
pub fn plan_coarse_move(e: &mut EntityState, area: Rect) -> Trajectory {
    let start = e.position;
    if e.waypoint.is_none() {
        e.waypoint = Some(draw_waypoint(e, area));
    }
    let wp = e.waypoint.unwrap();
    let dist = start.distance(&wp);
    if e.speed <= 0.0 || dist == 0.0 {
        if dist == 0.0 {
            e.waypoint = Some(draw_waypoint(e, area));
        }
        return Trajectory { start, end: start };
    }
    if dist <= e.speed {
        // Arrival: clamp to the waypoint and pick the next one.
        e.waypoint = Some(draw_waypoint(e, area));
        Trajectory { start, end: wp }
    } else {
        let t = e.speed / dist;
        let end = clamp(
            Vec2::new(start.x + t * (wp.x - start.x), start.y + t * (wp.y - start.y)),
            area,
        );
        Trajectory { start, end }
    }
}

/// Level-0 move: plan and apply in one piece.
pub fn move_entity_coarse(e: &mut EntityState, area: Rect) -> Vec2 {
    let traj = plan_coarse_move(e, area);
    e.position = traj.end;
    e.position
}

/// Position after fine phase `phase` (0-based) of a window with ratio `ratio`.
/// The last phase lands exactly on the coarse endpoint.
pub fn fine_position(traj: &Trajectory, phase: u32, ratio: u32) -> Vec2 {
    debug_assert!(phase < ratio);
    if phase + 1 == ratio {
        return traj.end;
    }
    let f = (phase + 1) as f64 / ratio as f64;
    Vec2::new(
        traj.start.x + f * (traj.end.x - traj.start.x),
        traj.start.y + f * (traj.end.y - traj.start.y),
    )
}
