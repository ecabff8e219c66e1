//! Multi-component reward: collision risk, traffic-light alert,
//! counter-based dangerous-lane risk, speed, lane-switch cost and step
//! cost, combined linearly; plus the ablation variants.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::wrap_angle;
use crate::planner::TacticalAction;
use crate::world::{LaneClass, TerminationCause, VehicleState, WorldState};

/// How the second raised-cosine factor is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskOrientation {
    /// Second factor uses the target-to-ego direction, so head-on geometry
    /// peaks both factors.
    HeadOn,
    /// Both factors use the ego-to-target direction.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    /// Normalizing distance in meters.
    pub d0: f64,
    /// Raised-cosine half-width in radians.
    pub beta: f64,
    pub orientation: RiskOrientation,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            d0: 8.0,
            beta: PI / 4.0,
            orientation: RiskOrientation::HeadOn,
        }
    }
}

/// Narrow-band raised cosine: 1 at zero, 0 at and beyond `±beta`.
pub fn rcos(phi: f64, beta: f64) -> f64 {
    let a = wrap_angle(phi);
    if a.abs() <= beta {
        0.5 * (1.0 + (PI * a / beta).cos())
    } else {
        0.0
    }
}

/// Laplacian distance factor `exp(d0 - d)`.
pub fn isotropic_risk(d: f64, p: &RiskParams) -> f64 {
    (p.d0 - d).exp()
}

pub fn directional_risk(ego: &VehicleState, target: &VehicleState, p: &RiskParams) -> f64 {
    let theta = (target.position - ego.position).angle();
    let second = match p.orientation {
        RiskOrientation::HeadOn => theta + PI,
        RiskOrientation::Literal => theta,
    };
    rcos(theta - ego.heading, p.beta) * rcos(second - target.heading, p.beta)
}

/// Sum of per-target isotropic times directional risk.
pub fn collision_risk<'a>(
    ego: &VehicleState,
    targets: impl IntoIterator<Item = &'a VehicleState>,
    p: &RiskParams,
) -> f64 {
    targets
        .into_iter()
        .map(|t| {
            let d = (t.position - ego.position).norm();
            isotropic_risk(d, p) * directional_risk(ego, t, p)
        })
        .fold(0.0, |acc, r| acc + r)
}

/// Collision risk from every NPC inside the region of interest.
pub fn world_collision_risk(world: &WorldState, p: &RiskParams, region: f64) -> f64 {
    let ego = &world.ego;
    collision_risk(
        ego,
        world
            .npcs
            .iter()
            .map(|n| &n.state)
            .filter(|t| (t.position - ego.position).norm() <= region),
        p,
    )
}

/// Agent steps spent on each dangerous lane class, saturating at `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneCounters {
    pub biking: u32,
    pub opposite: u32,
    pub cap: u32,
}

impl LaneCounters {
    pub fn new(cap: u32) -> Self {
        Self {
            biking: 0,
            opposite: 0,
            cap,
        }
    }
}

/// Increments the counter of the occupied dangerous class; the other
/// counters reset.
pub fn update_counters(c: LaneCounters, class: LaneClass) -> LaneCounters {
    let bump = |x: u32| (x + 1).min(c.cap);
    match class {
        LaneClass::Biking => LaneCounters {
            biking: bump(c.biking),
            opposite: 0,
            ..c
        },
        LaneClass::Opposite => LaneCounters {
            biking: 0,
            opposite: bump(c.opposite),
            ..c
        },
        LaneClass::Normal | LaneClass::DeadEnd => LaneCounters {
            biking: 0,
            opposite: 0,
            ..c
        },
    }
}

/// `(0.1 x + 0.9)` once the counter exceeds one, zero before.
pub fn dangerous_lane_risk(x: f64) -> f64 {
    if x > 1.0 {
        0.1 * x + 0.9
    } else {
        0.0
    }
}

/// 1 on the tick the ego enters a junction section that is closed to it.
pub fn traffic_light_alert(world: &WorldState) -> f64 {
    match world.last_entry {
        Some(e) if e.is_violation() => 1.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub collision: f64,
    pub traffic_light: f64,
    pub biking_lane: f64,
    pub opposite_lane: f64,
    pub speed: f64,
    pub lane_switch: f64,
    pub step: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            collision: -1.0,
            traffic_light: -1.0,
            biking_lane: -0.2,
            opposite_lane: -0.4,
            speed: 0.1,
            lane_switch: -0.4,
            step: -0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardVariant {
    Proposed,
    /// ±1 at episode end.
    GlobalGoal,
    /// Constant per-step risk on dangerous lanes instead of the counter.
    ConstLane(f64),
    /// Dense penalty on lateral deviation from the navigation lane.
    LocalGoal,
}

impl fmt::Display for RewardVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardVariant::Proposed => f.write_str("none"),
            RewardVariant::GlobalGoal => f.write_str("global_goal"),
            RewardVariant::ConstLane(v) => write!(f, "const_{v:?}"),
            RewardVariant::LocalGoal => f.write_str("local_goal"),
        }
    }
}

impl FromStr for RewardVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "none" | "proposed" => Ok(RewardVariant::Proposed),
            "global_goal" => Ok(RewardVariant::GlobalGoal),
            "local_goal" => Ok(RewardVariant::LocalGoal),
            _ => s
                .strip_prefix("const_")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .map(RewardVariant::ConstLane)
                .ok_or_else(|| Error::UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub variant: RewardVariant,
    pub risk: RiskParams,
    pub counter_cap: u32,
    /// Weight of the local-goal deviation penalty (variant only).
    pub local_goal_weight: f64,
    /// Weight of the global-goal indicator (variant only).
    pub global_goal_weight: f64,
    /// Region of interest for collision risk.
    pub region: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            variant: RewardVariant::Proposed,
            risk: RiskParams::default(),
            counter_cap: 20,
            local_goal_weight: -0.1,
            global_goal_weight: 1.0,
            region: 50.0,
        }
    }
}

/// Reward configuration for a named ablation variant with default weights.
pub fn ablation_variant(name: &str) -> Result<RewardConfig, Error> {
    Ok(RewardConfig {
        variant: name.parse()?,
        ..RewardConfig::default()
    })
}

/// Per-tick aggregates collected over one agent step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepSignals {
    /// Highest collision risk seen on any tick of the step.
    pub collision_risk: f64,
    pub light_alert: f64,
    pub termination: Option<TerminationCause>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub collision: f64,
    pub traffic_light: f64,
    pub biking_lane: f64,
    pub opposite_lane: f64,
    pub speed: f64,
    pub lane_switch: f64,
    pub step: f64,
    pub global_goal: f64,
    pub local_goal: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub const COLUMNS: [&'static str; 10] = [
        "collision",
        "traffic_light",
        "biking_lane",
        "opposite_lane",
        "speed",
        "lane_switch",
        "step",
        "global_goal",
        "local_goal",
        "total",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.collision,
            self.traffic_light,
            self.biking_lane,
            self.opposite_lane,
            self.speed,
            self.lane_switch,
            self.step,
            self.global_goal,
            self.local_goal,
            self.total,
        ]
    }

    /// Component-wise mean; used for meta-step logging.
    pub fn mean(items: &[RewardBreakdown]) -> RewardBreakdown {
        let n = items.len().max(1) as f64;
        let mut acc = [0.0; 10];
        for it in items {
            for (a, v) in acc.iter_mut().zip(it.values()) {
                *a += v;
            }
        }
        let m = acc.map(|a| a / n);
        RewardBreakdown {
            collision: m[0],
            traffic_light: m[1],
            biking_lane: m[2],
            opposite_lane: m[3],
            speed: m[4],
            lane_switch: m[5],
            step: m[6],
            global_goal: m[7],
            local_goal: m[8],
            total: m[9],
        }
    }
}

/// Lateral distance from the ego to the navigation lane center, in lane
/// widths; zero when the navigation lane is not beside the ego.
pub fn navigation_deviation(world: &WorldState) -> f64 {
    let map = &world.map;
    let lane = map.lane(world.ego.lane_id);
    if !map.cross_section(world.ego.lane_id).contains(&world.navigation_lane) {
        return 0.0;
    }
    let di = map.lateral_index(world.navigation_lane) as f64 - map.lateral_index(world.ego.lane_id) as f64;
    (di * lane.width - world.ego.lane_offset).abs() / lane.width
}

/// Reward for one agent step. `counters` must already include this step.
pub fn compose(
    world: &WorldState,
    signals: &StepSignals,
    decision: TacticalAction,
    counters: &LaneCounters,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let w = &cfg.weights;
    let lane = world.map.lane(world.ego.lane_id);
    let (biking, opposite) = match cfg.variant {
        RewardVariant::ConstLane(c) => (
            if lane.class == LaneClass::Biking { c } else { 0.0 },
            if lane.class == LaneClass::Opposite { c } else { 0.0 },
        ),
        _ => (
            dangerous_lane_risk(counters.biking as f64),
            dangerous_lane_risk(counters.opposite as f64),
        ),
    };
    let global_goal = match (cfg.variant, signals.termination) {
        (RewardVariant::GlobalGoal, Some(TerminationCause::Success)) => 1.0,
        (RewardVariant::GlobalGoal, Some(_)) => -1.0,
        _ => 0.0,
    };
    let local_goal = if cfg.variant == RewardVariant::LocalGoal {
        navigation_deviation(world)
    } else {
        0.0
    };
    let mut b = RewardBreakdown {
        collision: signals.collision_risk,
        traffic_light: signals.light_alert,
        biking_lane: biking,
        opposite_lane: opposite,
        speed: world.ego.speed / lane.speed_limit,
        lane_switch: if decision.is_switch() { 1.0 } else { 0.0 },
        step: 1.0,
        global_goal,
        local_goal,
        total: 0.0,
    };
    b.total = w.collision * b.collision
        + w.traffic_light * b.traffic_light
        + w.biking_lane * b.biking_lane
        + w.opposite_lane * b.opposite_lane
        + w.speed * b.speed
        + w.lane_switch * b.lane_switch
        + w.step * b.step
        + cfg.global_goal_weight * b.global_goal
        + cfg.local_goal_weight * b.local_goal;
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcos_peak_edge_and_outside() {
        let b = PI / 4.0;
        assert_eq!(rcos(0.0, b), 1.0);
        assert!(rcos(b, b).abs() < 1e-15);
        assert!(rcos(-b, b).abs() < 1e-15);
        assert_eq!(rcos(PI, b), 0.0);
        assert_eq!(rcos(2.0 * PI, b), 1.0);
    }

    #[test]
    fn isotropic_values() {
        let p = RiskParams::default();
        assert_eq!(isotropic_risk(p.d0, &p), 1.0);
        assert!((isotropic_risk(p.d0 + 2f64.ln(), &p) - 0.5).abs() < 1e-12);
        assert!(isotropic_risk(1e3, &p) < 1e-300);
    }

    #[test]
    fn lane_risk_formula() {
        assert_eq!(dangerous_lane_risk(0.0), 0.0);
        assert_eq!(dangerous_lane_risk(1.0), 0.0);
        assert!((dangerous_lane_risk(2.0) - 1.1).abs() < 1e-15);
        assert!((dangerous_lane_risk(5.0) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn counters_reset_and_saturate() {
        let c = LaneCounters { biking: 3, opposite: 0, cap: 20 };
        assert_eq!(update_counters(c, LaneClass::Normal), LaneCounters::new(20));
        assert_eq!(update_counters(c, LaneClass::Biking).biking, 4);
        let full = LaneCounters { biking: 20, opposite: 0, cap: 20 };
        assert_eq!(update_counters(full, LaneClass::Biking), full);
        let switched = update_counters(c, LaneClass::Opposite);
        assert_eq!((switched.biking, switched.opposite), (0, 1));
    }

    #[test]
    fn variant_names() {
        assert_eq!("none".parse::<RewardVariant>().unwrap(), RewardVariant::Proposed);
        assert_eq!("const_1.0".parse::<RewardVariant>().unwrap(), RewardVariant::ConstLane(1.0));
        assert_eq!("const_0.1".parse::<RewardVariant>().unwrap(), RewardVariant::ConstLane(0.1));
        assert!(matches!("bonus".parse::<RewardVariant>(), Err(Error::UnknownVariant(_))));
        for v in [RewardVariant::GlobalGoal, RewardVariant::ConstLane(0.1), RewardVariant::LocalGoal] {
            assert_eq!(v.to_string().parse::<RewardVariant>().unwrap(), v);
        }
    }
}
