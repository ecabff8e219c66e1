//! Lane/intersection micro-world.

pub mod map;
pub mod map_file;
pub mod state;

pub use map::{
    corridor_map, desk_map, full_map, CorridorGeometry, CorridorSpec, Lane, LaneClass, LaneId,
    LightPhase, RoadMap, Route, TrafficLight, Turn,
};
pub use map_file::{load_map, parse_map, write_map};
pub use state::{
    check_termination, sample_episode, set_pose, step_world, JunctionEntry, Npc,
    TerminationCause, VehicleState, WorldConfig, WorldState,
};

/// Which vehicle a query should skip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Who {
    Ego,
    Npc(usize),
}

/// A vehicle found by a lane query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sighting {
    pub who: Who,
    /// Center-to-center distance along the query direction (non-negative).
    pub distance: f64,
    /// Velocity component along the lane centerline.
    pub velocity: f64,
    pub length: f64,
}

/// Signed centerline offset of (`to`, `to_s`) relative to (`from`, `from_s`),
/// looking at most one lane hop forward or backward.
pub fn lane_offset(map: &RoadMap, from: LaneId, from_s: f64, to: LaneId, to_s: f64) -> Option<f64> {
    if from == to {
        return Some(to_s - from_s);
    }
    let from_lane = map.lane(from);
    if from_lane.successor == Some(to) {
        return Some(from_lane.length() - from_s + to_s);
    }
    if map.lane(to).successor == Some(from) {
        return Some(-(from_s + map.lane(to).length() - to_s));
    }
    None
}

fn actors(state: &WorldState) -> impl Iterator<Item = (Who, &VehicleState, f64)> {
    let ego = std::iter::once((Who::Ego, &state.ego, 1.0));
    let npcs = state.npcs.iter().enumerate().map(|(i, n)| {
        (
            Who::Npc(i),
            &n.state,
            state.map.lane(n.state.lane_id).traffic_sign(),
        )
    });
    ego.chain(npcs)
}

/// Nearest vehicle on `lane` (or one hop along it) in direction `dir`
/// (+1 along the centerline, -1 against). With `same_direction`, only
/// vehicles travelling with `dir` count.
pub fn nearest(
    state: &WorldState,
    lane: LaneId,
    station: f64,
    dir: f64,
    same_direction: Option<f64>,
    skip: Option<Who>,
) -> Option<Sighting> {
    let mut best: Option<Sighting> = None;
    for (who, v, travel) in actors(state) {
        if Some(who) == skip {
            continue;
        }
        if let Some(d) = same_direction {
            if travel != d {
                continue;
            }
        }
        let Some(off) = lane_offset(&state.map, lane, station, v.lane_id, v.station) else {
            continue;
        };
        let dist = off * dir;
        if dist < 0.0 || (dist == 0.0 && skip.is_none()) {
            continue;
        }
        if best.is_none_or(|b| dist < b.distance) {
            best = Some(Sighting {
                who,
                distance: dist,
                velocity: travel * v.speed,
                length: v.length,
            });
        }
    }
    best
}
