//! Non-learned low-level behavior: NPC car-following and the ego planning
//! module that turns tactical decisions into longitudinal acceleration and
//! lateral rate commands.

use serde::{Deserialize, Serialize};

use crate::world::{nearest, LaneId, LightPhase, Npc, RoadMap, Who, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TacticalAction {
    KeepLane,
    SwitchLeft,
    SwitchRight,
    /// Continue the current plan. Only issued inside skipping meta-actions.
    NoOp,
}

impl TacticalAction {
    /// Actions the policy may select, in network output order.
    pub const POLICY: [TacticalAction; 3] = [
        TacticalAction::KeepLane,
        TacticalAction::SwitchLeft,
        TacticalAction::SwitchRight,
    ];

    pub fn index(self) -> usize {
        match self {
            TacticalAction::KeepLane => 0,
            TacticalAction::SwitchLeft => 1,
            TacticalAction::SwitchRight => 2,
            TacticalAction::NoOp => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::POLICY.get(i).copied()
    }

    pub fn is_switch(self) -> bool {
        matches!(self, TacticalAction::SwitchLeft | TacticalAction::SwitchRight)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TacticalAction::KeepLane => "keep_lane",
            TacticalAction::SwitchLeft => "switch_left",
            TacticalAction::SwitchRight => "switch_right",
            TacticalAction::NoOp => "no_op",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    Following,
    ChangingLeft,
    ChangingRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanState {
    pub active_maneuver: Maneuver,
    /// Lane the current maneuver is heading for.
    pub target: Option<LaneId>,
    pub maneuver_progress: f64,
    pub horizon: f64,
}

impl PlanState {
    pub fn new(horizon: f64) -> Self {
        Self {
            active_maneuver: Maneuver::Following,
            target: None,
            maneuver_progress: 0.0,
            horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Duration of an uninterrupted lane change.
    pub lane_change_s: f64,
    pub headway_s: f64,
    pub min_gap: f64,
    pub comfort_accel: f64,
    pub max_brake: f64,
    /// Deceleration demand below which a stationary obstacle is ignored.
    pub brake_threshold: f64,
    pub gap_gain: f64,
    pub speed_gain: f64,
    /// Longitudinal look-ahead for leaders and stop lines.
    pub lookahead: f64,
    pub horizon_s: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            lane_change_s: 3.0,
            headway_s: 1.5,
            min_gap: 2.0,
            comfort_accel: 2.0,
            max_brake: 3.0,
            brake_threshold: 1.0,
            gap_gain: 0.4,
            speed_gain: 0.8,
            lookahead: 50.0,
            horizon_s: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub accel: f64,
    pub lateral_rate: f64,
    pub plan: PlanState,
    /// A switch toward a missing neighbor was executed as keep-lane.
    pub degraded: bool,
}

/// Obstacle ahead: bumper-to-bumper gap and its speed along the lane.
#[derive(Debug, Clone, Copy)]
struct Obstacle {
    gap: f64,
    speed: f64,
}

/// Constant-time-headway following law with a kinematic stopping bound.
fn follow_accel(cfg: &PlannerConfig, v: f64, desired: f64, dt: f64, obstacles: &[Obstacle]) -> f64 {
    let mut a = cfg.comfort_accel.min((desired - v) / dt);
    for o in obstacles {
        let hold = cfg.gap_gain * (o.gap - cfg.min_gap - cfg.headway_s * v)
            + cfg.speed_gain * (o.speed - v);
        a = a.min(hold);
        if v > o.speed {
            let room = (o.gap - 0.5).max(0.01);
            let need = (v * v - o.speed * o.speed) / (2.0 * room);
            if need >= cfg.brake_threshold {
                a = a.min(-need);
            }
        }
    }
    a.clamp(-cfg.max_brake, cfg.comfort_accel)
}

/// Stop-line obstacle for a lane whose light demands a stop.
fn stop_line(
    map: &RoadMap,
    world: &WorldState,
    lane: LaneId,
    station: f64,
    half_len: f64,
    v: f64,
    brake: f64,
) -> Option<Obstacle> {
    let l = map.lane(lane);
    let gap = l.length() - station - half_len;
    let light = map.light_for(lane)?;
    let (phase, _) = light.phase_at(world.clock());
    let stop = match phase {
        LightPhase::Green => false,
        LightPhase::Red => true,
        LightPhase::Yellow => v * v / (2.0 * brake) <= gap.max(0.0),
    };
    (stop && gap > -half_len).then_some(Obstacle { gap, speed: 0.0 })
}

/// Lane end with nowhere to go.
fn lane_end(map: &RoadMap, lane: LaneId, station: f64, half_len: f64) -> Option<Obstacle> {
    let l = map.lane(lane);
    l.successor.is_none().then(|| Obstacle {
        gap: l.length() - station - half_len,
        speed: 0.0,
    })
}

fn leader_obstacle(world: &WorldState, lane: LaneId, station: f64, dir: f64, me: Who, my_len: f64, range: f64) -> Option<Obstacle> {
    let s = nearest(world, lane, station, dir, Some(dir), Some(me))?;
    (s.distance <= range).then(|| Obstacle {
        gap: s.distance - (my_len + s.length) / 2.0,
        speed: (s.velocity * dir).max(0.0),
    })
}

/// Longitudinal command for an NPC: cruise, follow, stop at red. NPCs keep
/// their lane and never reverse.
pub fn npc_control(npc: &Npc, world: &WorldState) -> f64 {
    let cfg = PlannerConfig::default();
    let map = &world.map;
    let v = &npc.state;
    let lane = map.lane(v.lane_id);
    let dir = lane.traffic_sign();
    let me = Who::Npc(
        world
            .npcs
            .iter()
            .position(|n| n.id == npc.id)
            .expect("npc belongs to world"),
    );
    let mut obstacles = Vec::with_capacity(2);
    obstacles.extend(leader_obstacle(world, v.lane_id, v.station, dir, me, v.length, cfg.lookahead));
    if dir > 0.0 {
        obstacles.extend(stop_line(map, world, v.lane_id, v.station, v.length / 2.0, v.speed, cfg.max_brake));
    }
    let desired = npc.cruise_speed.min(lane.speed_limit);
    follow_accel(&cfg, v.speed, desired, world.config.dt, &obstacles)
}

/// One planner tick for the ego. Call with the tactical decision on the
/// first tick of an agent step and with `NoOp` afterwards.
pub fn plan_ego(decision: TacticalAction, plan: &PlanState, world: &WorldState, cfg: &PlannerConfig) -> PlanOutput {
    let map = &world.map;
    let ego = &world.ego;
    let lane = map.lane(ego.lane_id);
    let dt = world.config.dt;
    let mut plan = plan.clone();
    let mut degraded = false;

    let following = |lane: LaneId| PlanState {
        active_maneuver: crate::planner::Maneuver::Following,
        target: Some(lane),
        maneuver_progress: 0.0,
        horizon: cfg.horizon_s,
    };

    match decision {
        TacticalAction::KeepLane => plan = following(ego.lane_id),
        TacticalAction::SwitchLeft | TacticalAction::SwitchRight => {
            let (next, maneuver) = if decision == TacticalAction::SwitchLeft {
                (lane.left, Maneuver::ChangingLeft)
            } else {
                (lane.right, Maneuver::ChangingRight)
            };
            match next {
                Some(t) => {
                    let same = plan.active_maneuver == maneuver && plan.target == Some(t);
                    if !same {
                        plan = PlanState {
                            active_maneuver: maneuver,
                            target: Some(t),
                            maneuver_progress: 0.0,
                            horizon: cfg.horizon_s,
                        };
                    }
                }
                None => {
                    degraded = true;
                    plan = following(ego.lane_id);
                }
            }
        }
        TacticalAction::NoOp => {}
    }

    // a maneuver whose target is no longer adjacent (or reached) collapses
    // into lane following
    if plan.active_maneuver != Maneuver::Following {
        let target = plan.target.expect("maneuver has a target");
        let adjacent = lane.left == Some(target) || lane.right == Some(target);
        let arrived = target == ego.lane_id;
        if !adjacent && !arrived {
            plan = following(ego.lane_id);
        } else if arrived && ego.lane_offset.abs() < 1e-9 {
            plan = following(ego.lane_id);
            plan.maneuver_progress = 1.0;
        }
    }
    if plan.active_maneuver == Maneuver::Following {
        plan.target = Some(ego.lane_id);
    }

    let v_lat = lane.width / cfg.lane_change_s;
    let centering = (-ego.lane_offset / dt).clamp(-v_lat, v_lat);
    let lateral_rate = match plan.active_maneuver {
        Maneuver::Following => centering,
        Maneuver::ChangingLeft | Maneuver::ChangingRight => {
            let sign = if plan.active_maneuver == Maneuver::ChangingLeft { 1.0 } else { -1.0 };
            let target = plan.target.unwrap();
            let t_lane = map.lane(target);
            let total = lane.width / 2.0 + t_lane.width / 2.0;
            let covered = if target == ego.lane_id {
                total + sign * ego.lane_offset
            } else {
                sign * ego.lane_offset
            };
            plan.maneuver_progress = plan.maneuver_progress.max((covered / total).clamp(0.0, 1.0));
            if target == ego.lane_id {
                centering
            } else {
                sign * v_lat
            }
        }
    };

    // longitudinal
    let half = ego.length / 2.0;
    let mut obstacles = Vec::with_capacity(4);
    let mut lanes = vec![ego.lane_id];
    if let Some(t) = plan.target {
        if t != ego.lane_id {
            lanes.push(t);
        }
    }
    for &l in &lanes {
        obstacles.extend(leader_obstacle(world, l, ego.station, 1.0, Who::Ego, ego.length, cfg.lookahead));
        obstacles.extend(stop_line(map, world, l, ego.station, half, ego.speed, cfg.max_brake));
        // the route's last lane ends past the goal
        if l != world.route.exit() {
            obstacles.extend(lane_end(map, l, ego.station, half));
        }
    }
    let accel = follow_accel(cfg, ego.speed, lane.speed_limit, dt, &obstacles);

    PlanOutput {
        accel,
        lateral_rate,
        plan,
        degraded,
    }
}
