//! Dynamic world state, episode sampling, kinematic stepping and
//! termination detection.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::planner;
use crate::world::map::{LaneClass, LaneId, LightPhase, RoadMap, Route};

/// World-level tunables. Cruise speed ranges and spacing are not fixed by
/// the model; they live here so runs can override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dt: f64,
    pub ticks_per_agent_step: u32,
    pub max_accel: f64,
    pub max_lateral_rate: f64,
    pub stationary_speed: f64,
    pub stuck_timeout_s: f64,
    /// Distance short of the route end that counts as arrival.
    pub goal_margin: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Minimum initial gap between placed vehicles, in vehicle lengths.
    pub placement_gap_lengths: f64,
    pub ego_initial_speed: f64,
    pub npc_speed_normal: (f64, f64),
    pub npc_speed_opposite: (f64, f64),
    pub npc_speed_biking: (f64, f64),
    /// Relative placement weights per lane class (normal, opposite, biking).
    pub npc_lane_weights: (f64, f64, f64),
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            ticks_per_agent_step: 5,
            max_accel: 3.0,
            max_lateral_rate: 1.5,
            stationary_speed: 0.05,
            stuck_timeout_s: 40.0,
            goal_margin: 10.0,
            vehicle_length: 4.5,
            vehicle_width: 1.8,
            placement_gap_lengths: 2.0,
            ego_initial_speed: 5.0,
            npc_speed_normal: (3.0, 9.0),
            npc_speed_opposite: (6.0, 10.0),
            npc_speed_biking: (3.0, 5.0),
            npc_lane_weights: (1.0, 1.0, 0.0),
        }
    }
}

impl WorldConfig {
    pub fn agent_period(&self) -> f64 {
        self.dt * self.ticks_per_agent_step as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub lane_id: LaneId,
    /// Arc length along the lane centerline.
    pub station: f64,
    /// Lateral offset from the centerline, positive to the left.
    pub lane_offset: f64,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Npc {
    pub id: u32,
    pub state: VehicleState,
    pub cruise_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    Success,
    CollisionRiskExceeded,
    StuckTimeout,
    UnpermittedIntersectionEntry,
}

impl TerminationCause {
    pub const ALL: [TerminationCause; 4] = [
        TerminationCause::Success,
        TerminationCause::CollisionRiskExceeded,
        TerminationCause::StuckTimeout,
        TerminationCause::UnpermittedIntersectionEntry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TerminationCause::Success => "success",
            TerminationCause::CollisionRiskExceeded => "collision_risk_exceeded",
            TerminationCause::StuckTimeout => "stuck_timeout",
            TerminationCause::UnpermittedIntersectionEntry => "unpermitted_intersection_entry",
        }
    }
}

/// Ego crossing a stop line into a junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionEntry {
    /// Entered from the route's approach lane.
    pub on_route: bool,
    pub phase: Option<LightPhase>,
}

impl JunctionEntry {
    /// Entry into a section not open to the ego: off-route or on red.
    pub fn is_violation(&self) -> bool {
        !self.on_route || self.phase == Some(LightPhase::Red)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub map: Arc<RoadMap>,
    pub config: Arc<WorldConfig>,
    pub ego: VehicleState,
    pub npcs: Vec<Npc>,
    ticks: u64,
    pub route: Route,
    pub navigation_lane: LaneId,
    stationary_ticks: u64,
    /// Set on the tick the ego enters a junction.
    pub last_entry: Option<JunctionEntry>,
    /// Sticky: the ego has entered a junction illegally this episode.
    pub violated_entry: bool,
    /// Lateral rate actually applied to the ego on the last tick.
    pub last_lateral_rate: f64,
}

impl WorldState {
    pub fn clock(&self) -> f64 {
        self.ticks as f64 * self.config.dt
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn stationary_timer(&self) -> f64 {
        self.stationary_ticks as f64 * self.config.dt
    }

    pub fn route_length(&self) -> f64 {
        self.map.route_length(&self.route)
    }

    /// Ego arc length along the active route; `None` once off-route.
    pub fn ego_progress(&self) -> Option<f64> {
        self.map
            .route_progress(&self.route, self.ego.lane_id, self.ego.station)
    }

    pub fn ego_lane_class(&self) -> LaneClass {
        self.map.lane(self.ego.lane_id).class
    }

    /// Builds a state directly; used by scenario scripts and tests.
    pub fn from_parts(
        map: Arc<RoadMap>,
        config: Arc<WorldConfig>,
        route: Route,
        ego: VehicleState,
        npcs: Vec<Npc>,
    ) -> Self {
        let navigation_lane = map.navigation_lane(&route, ego.lane_id);
        let mut w = Self {
            map,
            config,
            ego,
            npcs,
            ticks: 0,
            route,
            navigation_lane,
            stationary_ticks: 0,
            last_entry: None,
            violated_entry: false,
            last_lateral_rate: 0.0,
        };
        w.refresh_poses();
        w
    }

    pub fn vehicle(&self, lane: LaneId, station: f64, speed: f64) -> VehicleState {
        let mut v = VehicleState {
            position: Vec2::default(),
            heading: 0.0,
            speed,
            lane_id: lane,
            station,
            lane_offset: 0.0,
            length: self.config.vehicle_length,
            width: self.config.vehicle_width,
        };
        set_pose(&self.map, &mut v, false);
        v
    }

    fn refresh_poses(&mut self) {
        set_pose(&self.map, &mut self.ego, false);
        for n in &mut self.npcs {
            set_pose(&self.map, &mut n.state, true);
        }
    }
}

/// Recomputes position and heading from lane coordinates. NPCs on opposite
/// lanes face against the centerline; the ego always faces along it.
pub fn set_pose(map: &RoadMap, v: &mut VehicleState, npc: bool) {
    let lane = map.lane(v.lane_id);
    let (p, h) = lane.centerline.pose_at(v.station);
    v.position = p + Vec2::from_angle(h).perp() * v.lane_offset;
    v.heading = if npc && lane.class == LaneClass::Opposite {
        crate::geometry::wrap_angle(h + std::f64::consts::PI)
    } else {
        h
    };
}

/// Samples an episode: a random route, the ego at its start and `n_npcs`
/// vehicles scattered along the route corridor.
pub fn sample_episode(
    map: Arc<RoadMap>,
    config: Arc<WorldConfig>,
    seed: u64,
    n_npcs: usize,
) -> Result<WorldState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let route = map.routes[rng.random_range(0..map.routes.len())].clone();
    let ego_template = VehicleState {
        position: Vec2::default(),
        heading: 0.0,
        speed: config.ego_initial_speed,
        lane_id: route.start,
        station: 0.0,
        lane_offset: 0.0,
        length: config.vehicle_length,
        width: config.vehicle_width,
    };
    let (wn, wo, wb) = config.npc_lane_weights;
    let candidates: Vec<(LaneId, f64, (f64, f64))> = map
        .corridor_lanes(&route)
        .into_iter()
        .filter_map(|id| {
            let lane = map.lane(id);
            if lane.junction {
                return None;
            }
            let (w, speeds) = match lane.class {
                LaneClass::Normal => (wn, config.npc_speed_normal),
                LaneClass::Opposite => (wo, config.npc_speed_opposite),
                LaneClass::Biking => (wb, config.npc_speed_biking),
                LaneClass::DeadEnd => (0.0, (0.0, 0.0)),
            };
            (w > 0.0).then(|| (id, w * lane.length(), speeds))
        })
        .collect();
    let total: f64 = candidates.iter().map(|c| c.1).sum();
    let min_gap = config.placement_gap_lengths * config.vehicle_length;
    let mut placed: Vec<(LaneId, f64)> = vec![(route.start, 0.0)];
    let mut npcs = Vec::with_capacity(n_npcs);
    let mut attempts = 0usize;
    while npcs.len() < n_npcs {
        if candidates.is_empty() || attempts > 200 * (n_npcs + 1) {
            return Err(Error::Placement {
                requested: n_npcs,
                placed: npcs.len(),
            });
        }
        attempts += 1;
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = candidates.len() - 1;
        for (i, c) in candidates.iter().enumerate() {
            if pick < c.1 {
                chosen = i;
                break;
            }
            pick -= c.1;
        }
        let (lane, _, (lo, hi)) = candidates[chosen];
        let len = map.lane(lane).length();
        let s = rng.random::<f64>() * len;
        let speed = lo + rng.random::<f64>() * (hi - lo);
        if placed
            .iter()
            .any(|(l, ps)| *l == lane && (ps - s).abs() < min_gap)
        {
            continue;
        }
        placed.push((lane, s));
        npcs.push(Npc {
            id: npcs.len() as u32,
            state: VehicleState {
                position: Vec2::default(),
                heading: 0.0,
                speed,
                lane_id: lane,
                station: s,
                lane_offset: 0.0,
                length: config.vehicle_length,
                width: config.vehicle_width,
            },
            cruise_speed: speed,
        });
    }
    Ok(WorldState::from_parts(map, config, route, ego_template, npcs))
}

/// Advances the world by one tick. The ego command is clamped to the
/// configured physical limits; NPCs follow [`planner::npc_control`].
pub fn step_world(state: &mut WorldState, ego_accel: f64, ego_lateral_rate: f64) {
    let cfg = state.config.clone();
    let map = state.map.clone();
    let dt = cfg.dt;
    let clock = state.clock();

    let npc_accels: Vec<f64> = state
        .npcs
        .iter()
        .map(|n| planner::npc_control(n, state))
        .collect();

    // ego
    let a = ego_accel.clamp(-cfg.max_accel, cfg.max_accel);
    let lat = ego_lateral_rate.clamp(-cfg.max_lateral_rate, cfg.max_lateral_rate);
    let ego = &mut state.ego;
    ego.station += ego.speed * dt;
    ego.speed = (ego.speed + a * dt).max(0.0);
    ego.lane_offset += lat * dt;
    state.last_lateral_rate = lat;
    state.last_entry = None;

    let lane = map.lane(ego.lane_id);
    let half = lane.width / 2.0;
    let crossed = if ego.lane_offset >= half - 1e-9 {
        lane.left.map(|id| (id, -1.0))
    } else if ego.lane_offset <= -half + 1e-9 {
        lane.right.map(|id| (id, 1.0))
    } else {
        None
    };
    match crossed {
        Some((id, sign)) => {
            ego.lane_offset += sign * (half + map.lane(id).width / 2.0);
            ego.lane_id = id;
        }
        None => ego.lane_offset = ego.lane_offset.clamp(-half, half),
    }

    loop {
        let lane = map.lane(ego.lane_id);
        if ego.station < lane.length() {
            break;
        }
        match lane.successor {
            Some(next) => {
                if map.lane(next).junction {
                    let entry = JunctionEntry {
                        on_route: lane.id == state.route.approach() && next == state.route.connector(),
                        phase: map.light_for(lane.id).map(|l| l.phase_at(clock).0),
                    };
                    state.violated_entry |= entry.is_violation();
                    state.last_entry = Some(entry);
                }
                ego.station -= lane.length();
                ego.lane_id = next;
                let half = map.lane(next).width / 2.0;
                ego.lane_offset = ego.lane_offset.clamp(-half, half);
            }
            None => {
                ego.station = lane.length();
                ego.speed = 0.0;
                break;
            }
        }
    }
    state.navigation_lane = map.navigation_lane(&state.route, state.ego.lane_id);

    // NPCs
    for (npc, a) in state.npcs.iter_mut().zip(npc_accels) {
        let v = &mut npc.state;
        let sign = map.lane(v.lane_id).traffic_sign();
        v.station += sign * v.speed * dt;
        v.speed = (v.speed + a * dt).max(0.0);
    }
    state.npcs.retain_mut(|npc| {
        let v = &mut npc.state;
        loop {
            let lane = map.lane(v.lane_id);
            if lane.class == LaneClass::Opposite {
                if v.station < 0.0 {
                    // oncoming traffic re-enters at the far end
                    v.station += lane.length();
                }
                return true;
            }
            if v.station < lane.length() {
                return true;
            }
            match lane.successor {
                Some(next) => {
                    v.station -= lane.length();
                    v.lane_id = next;
                }
                None => return false,
            }
        }
    });

    state.ticks += 1;
    if state.ego.speed <= cfg.stationary_speed {
        state.stationary_ticks += 1;
    } else {
        state.stationary_ticks = 0;
    }
    state.refresh_poses();
}

/// First matching cause in priority order: collision, unpermitted entry,
/// success, stuck timeout.
pub fn check_termination(state: &WorldState, current_risk: f64) -> Option<TerminationCause> {
    if current_risk > 1.0 {
        return Some(TerminationCause::CollisionRiskExceeded);
    }
    if state.violated_entry {
        return Some(TerminationCause::UnpermittedIntersectionEntry);
    }
    if let Some(p) = state.ego_progress() {
        if p >= state.route_length() - state.config.goal_margin - 1e-9 {
            return Some(TerminationCause::Success);
        }
    }
    if state.stationary_timer() >= state.config.stuck_timeout_s - 1e-9 {
        return Some(TerminationCause::StuckTimeout);
    }
    None
}
