//! Scripted slow-leader episodes: both normal lanes of the approach are
//! blocked by slow vehicles, so passing means using a biking or opposite
//! lane.

use std::sync::Arc;

use crate::geometry::Vec2;
use crate::world::{LaneClass, Npc, RoadMap, VehicleState, WorldConfig, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct SlowLeaderSpec {
    /// Leader distance ahead of the ego (center to center).
    pub gaps: Vec<f64>,
    pub leader_speeds: Vec<f64>,
    pub ego_station: f64,
    pub ego_speed: f64,
}

impl Default for SlowLeaderSpec {
    fn default() -> Self {
        Self {
            gaps: vec![20.0, 35.0],
            leader_speeds: vec![1.0, 2.0],
            ego_station: 5.0,
            ego_speed: 5.0,
        }
    }
}

fn at(cfg: &WorldConfig, lane: crate::world::LaneId, station: f64, speed: f64) -> VehicleState {
    VehicleState {
        position: Vec2::default(),
        heading: 0.0,
        speed,
        lane_id: lane,
        station,
        lane_offset: 0.0,
        length: cfg.vehicle_length,
        width: cfg.vehicle_width,
    }
}

/// One episode per route, gap and leader speed.
pub fn slow_leader_worlds(map: Arc<RoadMap>, cfg: Arc<WorldConfig>, spec: &SlowLeaderSpec) -> Vec<WorldState> {
    let mut out = Vec::new();
    for route in &map.routes {
        let nav = route.approach();
        let lane = map.lane(nav);
        let other = [lane.left, lane.right]
            .into_iter()
            .flatten()
            .find(|&l| map.lane(l).class == LaneClass::Normal);
        for &gap in &spec.gaps {
            for &v in &spec.leader_speeds {
                let s = spec.ego_station + gap;
                let mut npcs = vec![Npc {
                    id: 0,
                    state: at(&cfg, nav, s, v),
                    cruise_speed: v,
                }];
                if let Some(o) = other {
                    npcs.push(Npc {
                        id: 1,
                        state: at(&cfg, o, s, v),
                        cruise_speed: v,
                    });
                }
                let ego = at(&cfg, nav, spec.ego_station, spec.ego_speed);
                out.push(WorldState::from_parts(map.clone(), cfg.clone(), route.clone(), ego, npcs));
            }
        }
    }
    out
}
