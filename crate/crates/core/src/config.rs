//! Scenario configuration: schema, defaults, validation, file loading.
//!
//! Scenario files are TOML. Unknown keys are rejected; all numeric parameters
//! are validated before a run starts. Every default is overridable from the
//! CLI with `--key value` style flags (see `main.rs`).

use crate::entity::Role;
use crate::error::{SimError, SimResult};
use crate::geom::Rect;
use crate::migration::MigrationParams;
use crate::multilevel::RegionSpec;
use crate::partition::PartitionStrategy;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    Full,
    Stats,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaCfg {
    pub width: f64,
    pub height: f64,
}

impl AreaCfg {
    pub fn rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsCfg {
    #[serde(default)]
    pub sensors: u32,
    #[serde(default)]
    pub producers: u32,
    #[serde(default)]
    pub consumers: u32,
    #[serde(default)]
    pub relays: u32,
}

impl CountsCfg {
    pub fn total(&self) -> u32 {
        self.sensors + self.producers + self.consumers + self.relays
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedCfg {
    pub sensor: [f64; 2],
    pub producer: [f64; 2],
    pub consumer: [f64; 2],
    pub relay: [f64; 2],
}

impl Default for SpeedCfg {
    fn default() -> Self {
        SpeedCfg {
            sensor: [0.0, 0.0],
            producer: [0.5, 1.5],
            consumer: [1.0, 3.0],
            relay: [1.0, 3.0],
        }
    }
}

impl SpeedCfg {
    pub fn for_role(&self, role: Role) -> [f64; 2] {
        match role {
            Role::Sensor => self.sensor,
            Role::Producer => self.producer,
            Role::Consumer => self.consumer,
            Role::Relay => self.relay,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Unit-disk radius in meters (level 1 only).
    #[serde(default = "default_radio_range")]
    pub range: f64,
    /// Per-fine-step per-node forward cap; 0 = unlimited.
    #[serde(default)]
    pub frame_budget: u32,
    /// Dissemination hop limit; 0 = unlimited.
    #[serde(default = "default_ttl")]
    pub ttl: u32,
    /// Probability per refined coarse step that a producer originates an
    /// advisory dissemination message.
    #[serde(default = "default_advisory_prob")]
    pub advisory_prob: f64,
}

impl Default for RadioCfg {
    fn default() -> Self {
        RadioCfg {
            enabled: true,
            range: default_radio_range(),
            frame_budget: 0,
            ttl: default_ttl(),
            advisory_prob: default_advisory_prob(),
        }
    }
}

impl RadioCfg {
    /// Hop limit as stored in frames.
    pub fn ttl_hops(&self) -> u16 {
        if self.ttl == 0 || self.ttl > u16::MAX as u32 {
            u16::MAX
        } else {
            self.ttl as u16
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketCfg {
    /// Product catalog size.
    #[serde(default = "default_products")]
    pub products: u16,
    #[serde(default = "default_inventory")]
    pub inventory_per_producer: u16,
    #[serde(default = "default_interests")]
    pub interests_per_consumer: u16,
    /// Coarse steps between availability publications per producer.
    #[serde(default = "default_publish_period")]
    pub publish_period: u32,
    /// Coarse steps between sensor reading publications.
    #[serde(default = "default_sensor_period")]
    pub sensor_period: u32,
    /// Per-step probability that a consumer rotates one interest.
    #[serde(default)]
    pub resubscribe_prob: f64,
    /// Probability that a consumer pings the producer after a notification.
    #[serde(default = "default_ping_prob")]
    pub ping_prob: f64,
}

impl Default for MarketCfg {
    fn default() -> Self {
        MarketCfg {
            products: default_products(),
            inventory_per_producer: default_inventory(),
            interests_per_consumer: default_interests(),
            publish_period: default_publish_period(),
            sensor_period: default_sensor_period(),
            resubscribe_prob: 0.0,
            ping_prob: default_ping_prob(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MigrationCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_window")]
    pub window: u32,
    #[serde(default = "default_interval")]
    pub interval: u32,
    #[serde(default = "default_affinity")]
    pub affinity: f64,
    #[serde(default = "default_load_guard")]
    pub load_guard: f64,
}

impl Default for MigrationCfg {
    fn default() -> Self {
        MigrationCfg {
            enabled: true,
            window: default_window(),
            interval: default_interval(),
            affinity: default_affinity(),
            load_guard: default_load_guard(),
        }
    }
}

impl MigrationCfg {
    pub fn params(&self) -> MigrationParams {
        MigrationParams {
            window: self.window,
            interval: self.interval,
            affinity: self.affinity,
            load_guard: self.load_guard,
            hysteresis: 2 * self.window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionCfg {
    pub id: u16,
    /// `[x0, y0, x1, y1]` in area meters.
    pub bounds: [f64; 4],
    #[serde(default = "default_ratio")]
    pub ratio: u32,
    #[serde(default = "default_theta_hi")]
    pub theta_hi: u32,
    #[serde(default = "default_theta_lo")]
    pub theta_lo: u32,
    /// Explicit refine step; when set, density triggers are ignored.
    #[serde(default)]
    pub refine_at: Option<u64>,
    /// Explicit coarsen step (requires `refine_at`).
    #[serde(default)]
    pub coarsen_at: Option<u64>,
}

impl RegionCfg {
    pub fn spec(&self) -> RegionSpec {
        RegionSpec {
            id: self.id,
            bounds: Rect::new(self.bounds[0], self.bounds[1], self.bounds[2], self.bounds[3]),
            ratio: self.ratio,
            theta_hi: self.theta_hi,
            theta_lo: self.theta_lo,
            schedule: self.refine_at.map(|r| (r, self.coarsen_at)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultilevelCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default)]
    pub regions: Vec<RegionCfg>,
}

impl Default for MultilevelCfg {
    fn default() -> Self {
        MultilevelCfg { enabled: true, regions: Vec::new() }
    }
}

/// Scripted initial-state override applied to a slice of one role's entities
/// in id order. Used by scripted experiments (threshold crossings, clustered
/// mobility, explicit graph layouts).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementCfg {
    pub role: Role,
    /// How many entities of that role this override covers.
    pub count: u32,
    /// One shared initial position.
    #[serde(default)]
    pub position: Option<[f64; 2]>,
    /// Explicit per-entity positions (overrides `position`; length must be
    /// >= count).
    #[serde(default)]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub waypoint: Option<[f64; 2]>,
    #[serde(default)]
    pub speed: Option<f64>,
    /// Waypoint draws stay inside this box `[x0, y0, x1, y1]`.
    #[serde(default)]
    pub waypoint_box: Option<[f64; 4]>,
    /// Restrict inventory/interest draws to this product palette.
    #[serde(default)]
    pub products: Option<Vec<u16>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsCfg {
    #[serde(default = "default_seen_capacity")]
    pub seen_capacity: u32,
    #[serde(default = "default_barrier_timeout")]
    pub barrier_timeout_ms: u64,
}

impl Default for LimitsCfg {
    fn default() -> Self {
        LimitsCfg {
            seen_capacity: default_seen_capacity(),
            barrier_timeout_ms: default_barrier_timeout(),
        }
    }
}

/// Wall-clock chaos knobs for barrier-safety audits. These never touch
/// simulation state, only worker scheduling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugCfg {
    #[serde(default)]
    pub inject_delays: bool,
    #[serde(default = "default_max_delay")]
    pub max_delay_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub total_coarse_steps: u64,
    #[serde(default = "default_n_lps")]
    pub n_lps: u32,
    #[serde(default = "default_partition")]
    pub partition: PartitionStrategy,
    #[serde(default = "default_trace")]
    pub trace: TraceLevel,
    pub area: AreaCfg,
    pub counts: CountsCfg,
    #[serde(default)]
    pub speed: SpeedCfg,
    #[serde(default)]
    pub radio: RadioCfg,
    #[serde(default)]
    pub market: MarketCfg,
    #[serde(default)]
    pub migration: MigrationCfg,
    #[serde(default)]
    pub multilevel: MultilevelCfg,
    #[serde(default)]
    pub placements: Vec<PlacementCfg>,
    #[serde(default)]
    pub limits: LimitsCfg,
    #[serde(default)]
    pub debug: DebugCfg,
}

fn default_true() -> bool {
    true
}
fn default_radio_range() -> f64 {
    50.0
}
fn default_ttl() -> u32 {
    8
}
fn default_advisory_prob() -> f64 {
    0.02
}
fn default_products() -> u16 {
    16
}
fn default_inventory() -> u16 {
    3
}
fn default_interests() -> u16 {
    2
}
fn default_publish_period() -> u32 {
    20
}
fn default_sensor_period() -> u32 {
    50
}
fn default_ping_prob() -> f64 {
    1.0
}
fn default_window() -> u32 {
    16
}
fn default_interval() -> u32 {
    8
}
fn default_affinity() -> f64 {
    0.7
}
fn default_load_guard() -> f64 {
    0.25
}
fn default_ratio() -> u32 {
    3
}
fn default_theta_hi() -> u32 {
    50
}
fn default_theta_lo() -> u32 {
    30
}
fn default_seen_capacity() -> u32 {
    64
}
fn default_barrier_timeout() -> u64 {
    30_000
}
fn default_max_delay() -> u64 {
    3
}
fn default_n_lps() -> u32 {
    1
}
fn default_partition() -> PartitionStrategy {
    PartitionStrategy::RoundRobin
}
fn default_trace() -> TraceLevel {
    TraceLevel::Stats
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> SimResult<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    // Negated float comparisons are deliberate: `!(x > 0.0)` rejects NaN,
    // `x <= 0.0` would let it through.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> SimResult<()> {
        fn bad(key: &str, reason: impl Into<String>) -> SimError {
            SimError::Validation { key: key.into(), reason: reason.into() }
        }
        if self.total_coarse_steps == 0 {
            return Err(bad("total_coarse_steps", "must be positive"));
        }
        if self.n_lps == 0 {
            return Err(bad("n_lps", "must be >= 1"));
        }
        if !(self.area.width > 0.0) || !(self.area.height > 0.0) {
            return Err(bad("area", "width and height must be positive"));
        }
        for (key, [lo, hi]) in [
            ("speed.sensor", self.speed.sensor),
            ("speed.producer", self.speed.producer),
            ("speed.consumer", self.speed.consumer),
            ("speed.relay", self.speed.relay),
        ] {
            if lo < 0.0 || hi < lo {
                return Err(bad(key, "require 0 <= min <= max"));
            }
        }
        if !(self.radio.range > 0.0) {
            return Err(bad("radio.range", "must be positive"));
        }
        for (key, p) in [
            ("radio.advisory_prob", self.radio.advisory_prob),
            ("market.resubscribe_prob", self.market.resubscribe_prob),
            ("market.ping_prob", self.market.ping_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(key, "probability must be in [0, 1]"));
            }
        }
        if self.market.products == 0 {
            return Err(bad("market.products", "catalog must be non-empty"));
        }
        if self.market.publish_period == 0 || self.market.sensor_period == 0 {
            return Err(bad("market.publish_period", "periods must be >= 1"));
        }
        if self.migration.window == 0 || self.migration.interval == 0 {
            return Err(bad("migration.window", "window and interval must be >= 1"));
        }
        if !(self.migration.affinity > 0.0 && self.migration.affinity <= 1.0) {
            return Err(bad("migration.affinity", "must be in (0, 1]"));
        }
        if !(self.migration.load_guard > 0.0) {
            return Err(bad("migration.load_guard", "must be positive"));
        }
        let area = self.area.rect();
        let mut seen_ids = std::collections::HashSet::new();
        for r in &self.multilevel.regions {
            if !seen_ids.insert(r.id) {
                return Err(bad("multilevel.regions", format!("duplicate region id {}", r.id)));
            }
            let spec = r.spec();
            spec.validate()?;
            let b = spec.bounds;
            if b.x0 >= b.x1 || b.y0 >= b.y1 {
                return Err(bad(
                    &format!("regions[{}].bounds", r.id),
                    "require x0 < x1 and y0 < y1",
                ));
            }
            if b.x0 < area.x0 || b.y0 < area.y0 || b.x1 > area.x1 || b.y1 > area.y1 {
                return Err(bad(&format!("regions[{}].bounds", r.id), "outside the area"));
            }
            if r.coarsen_at.is_some() && r.refine_at.is_none() {
                return Err(bad(
                    &format!("regions[{}].coarsen_at", r.id),
                    "requires refine_at",
                ));
            }
            if let (Some(a), Some(b)) = (r.refine_at, r.coarsen_at) {
                if b <= a {
                    return Err(bad(
                        &format!("regions[{}].coarsen_at", r.id),
                        "must be after refine_at",
                    ));
                }
            }
        }
        for (i, p) in self.placements.iter().enumerate() {
            let available = match p.role {
                Role::Sensor => self.counts.sensors,
                Role::Producer => self.counts.producers,
                Role::Consumer => self.counts.consumers,
                Role::Relay => self.counts.relays,
            };
            let claimed: u32 = self
                .placements
                .iter()
                .filter(|q| q.role == p.role)
                .map(|q| q.count)
                .sum();
            if claimed > available {
                return Err(bad(
                    &format!("placements[{i}]"),
                    format!("{claimed} placements exceed {available} entities of that role"),
                ));
            }
            if let Some(pos) = &p.positions {
                if (pos.len() as u32) < p.count {
                    return Err(bad(
                        &format!("placements[{i}].positions"),
                        "fewer positions than count",
                    ));
                }
            }
        }
        if self.limits.seen_capacity == 0 {
            return Err(bad("limits.seen_capacity", "must be >= 1"));
        }
        Ok(())
    }
}
