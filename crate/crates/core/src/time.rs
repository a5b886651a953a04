//! Simulation time.
//!
//! Time is a pair `(coarse, phase)`: a count of level-0 timesteps plus a
//! fine phase inside the current coarse step. Level-0 activity always
//! carries phase 0; inside a refined region with ratio `R` the phase runs
//! `0..R-1`. The total order is lexicographic.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimTime {
    pub coarse: u64,
    pub phase: u32,
}

impl SimTime {
    pub const ZERO: SimTime = SimTime { coarse: 0, phase: 0 };

    pub fn coarse(step: u64) -> Self {
        SimTime { coarse: step, phase: 0 }
    }

    pub fn fine(step: u64, phase: u32) -> Self {
        SimTime { coarse: step, phase }
    }

    /// True when this time sits on a coarse step boundary.
    pub fn is_boundary(&self) -> bool {
        self.phase == 0
    }

    /// The next coarse boundary strictly after this time.
    pub fn next_boundary(&self) -> SimTime {
        SimTime::coarse(self.coarse + 1)
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.coarse.to_le_bytes());
        out.extend_from_slice(&self.phase.to_le_bytes());
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.coarse, self.phase)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.coarse, self.phase)
    }
}

/// Alignment between a coarse step and the fine steps nested inside it.
///
/// With ratio `R`, coarse step `k` spans fine times `(k,0) .. (k,R-1)`;
/// the next boundary `(k+1,0)` closes the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelClock {
    pub ratio: u32,
}

impl LevelClock {
    pub fn new(ratio: u32) -> Self {
        assert!(ratio >= 1, "timestep ratio must be >= 1");
        LevelClock { ratio }
    }

    /// Fine times executed during coarse step `k`, in order.
    pub fn fine_steps(&self, k: u64) -> impl Iterator<Item = SimTime> + '_ {
        (0..self.ratio).map(move |p| SimTime::fine(k, p))
    }

    /// Absolute fine index of `(k, phase)` counted from coarse step `base`.
    pub fn fine_index(&self, base: u64, t: SimTime) -> u64 {
        (t.coarse - base) * self.ratio as u64 + t.phase as u64
    }
}
