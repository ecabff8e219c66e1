//! Fixed-size feature frames and three-step frame stacking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::reward::LaneCounters;
use crate::world::{nearest, LaneClass, LaneId, LightPhase, Who, WorldState};

/// Number of features in one frame.
pub const FRAME_LEN: usize = 38;
/// Frames stacked into one observation.
pub const STACK: usize = 3;
/// Length of a flattened observation.
pub const OBS_LEN: usize = FRAME_LEN * STACK;

pub mod idx {
    pub const SPEED: usize = 0;
    pub const OFFSET: usize = 1;
    pub const CLASS: usize = 2; // 4 slots: normal, biking, opposite, dead_end
    pub const ON_NAV: usize = 6;
    pub const DIST_JUNCTION: usize = 7;
    pub const LIGHT: usize = 8; // 3 slots: green, yellow, red
    pub const LIGHT_REMAINING: usize = 11;
    pub const NAV_SIDE: usize = 12;
    pub const LEFT_NORMAL: usize = 13;
    pub const LEFT_DANGEROUS: usize = 14;
    pub const RIGHT_NORMAL: usize = 15;
    pub const RIGHT_DANGEROUS: usize = 16;
    pub const STATIONARY: usize = 17;
    /// 6 slots of (gap, relative speed, presence): left/current/right x
    /// ahead/behind.
    pub const SLOTS: usize = 18;
    pub const COUNTER_BIKING: usize = 36;
    pub const COUNTER_OPPOSITE: usize = 37;

    /// Offset of the (lane, direction) slot; lane 0 = left, 1 = current,
    /// 2 = right; direction 0 = ahead, 1 = behind.
    pub const fn slot(lane: usize, dir: usize) -> usize {
        SLOTS + (lane * 2 + dir) * 3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsConfig {
    /// Region of interest.
    pub d_max: f64,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self { d_max: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame(pub [f32; FRAME_LEN]);

impl FeatureFrame {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Oldest first.
    pub frames: [FeatureFrame; STACK],
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(OBS_LEN);
        for f in &self.frames {
            v.extend_from_slice(&f.0);
        }
        v
    }

    pub fn latest(&self) -> &FeatureFrame {
        &self.frames[STACK - 1]
    }
}

fn clamp1(x: f64) -> f32 {
    x.clamp(-1.0, 1.0) as f32
}

pub fn encode_frame(world: &WorldState, counters: &LaneCounters, cfg: &ObsConfig) -> FeatureFrame {
    let mut f = [0.0f32; FRAME_LEN];
    let map = &world.map;
    let ego = &world.ego;
    let lane = map.lane(ego.lane_id);
    let limit = lane.speed_limit;

    f[idx::SPEED] = clamp1(ego.speed / limit);
    f[idx::OFFSET] = clamp1(ego.lane_offset / lane.width);
    let class_slot = LaneClass::ALL.iter().position(|c| *c == lane.class).unwrap();
    f[idx::CLASS + class_slot] = 1.0;
    f[idx::ON_NAV] = f32::from(ego.lane_id == world.navigation_lane);

    let approach_side = map.cross_section(world.route.approach());
    let on_approach = approach_side.contains(&ego.lane_id);
    f[idx::DIST_JUNCTION] = if on_approach {
        clamp1((lane.length() - ego.station) / cfg.d_max).max(0.0)
    } else {
        1.0
    };
    let light = map.light_for(ego.lane_id).or_else(|| {
        on_approach
            .then(|| map.light_for(world.route.approach()))
            .flatten()
    });
    if let Some(light) = light {
        let (phase, remaining) = light.phase_at(world.clock());
        let k = match phase {
            LightPhase::Green => 0,
            LightPhase::Yellow => 1,
            LightPhase::Red => 2,
        };
        f[idx::LIGHT + k] = 1.0;
        f[idx::LIGHT_REMAINING] = clamp1(remaining / light.cycle_s());
    }
    let section = map.cross_section(ego.lane_id);
    if section.contains(&world.navigation_lane) {
        let nav = map.lateral_index(world.navigation_lane) as f64;
        let cur = map.lateral_index(ego.lane_id) as f64;
        f[idx::NAV_SIDE] = clamp1((nav - cur) / 3.0);
    }
    for (neighbor, normal, dangerous) in [
        (lane.left, idx::LEFT_NORMAL, idx::LEFT_DANGEROUS),
        (lane.right, idx::RIGHT_NORMAL, idx::RIGHT_DANGEROUS),
    ] {
        if let Some(n) = neighbor {
            let c = map.lane(n).class;
            f[normal] = f32::from(c == LaneClass::Normal);
            f[dangerous] = f32::from(c.is_dangerous());
        }
    }
    f[idx::STATIONARY] = clamp1(world.stationary_timer() / world.config.stuck_timeout_s);

    let slots: [Option<LaneId>; 3] = [lane.left, Some(ego.lane_id), lane.right];
    for (li, l) in slots.iter().enumerate() {
        for (di, dir) in [1.0, -1.0].into_iter().enumerate() {
            let base = idx::slot(li, di);
            let seen = l.and_then(|l| nearest(world, l, ego.station, dir, None, Some(Who::Ego)));
            match seen {
                Some(s) if s.distance <= cfg.d_max => {
                    f[base] = clamp1(s.distance / cfg.d_max);
                    f[base + 1] = clamp1((s.velocity - ego.speed) / limit);
                    f[base + 2] = 1.0;
                }
                _ => {
                    f[base] = 1.0;
                    f[base + 1] = 0.0;
                    f[base + 2] = 0.0;
                }
            }
        }
    }
    f[idx::COUNTER_BIKING] = counters.biking as f32 / counters.cap as f32;
    f[idx::COUNTER_OPPOSITE] = counters.opposite as f32 / counters.cap as f32;
    FeatureFrame(f)
}

/// Per-episode frame history.
#[derive(Debug, Clone, Default)]
pub struct History {
    frames: VecDeque<FeatureFrame>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Pushes the newest frame and returns the stacked observation; missing
    /// history at episode start repeats the first frame.
    pub fn push_and_stack(&mut self, frame: FeatureFrame) -> Observation {
        if self.frames.is_empty() {
            for _ in 0..STACK - 1 {
                self.frames.push_back(frame);
            }
        }
        self.frames.push_back(frame);
        while self.frames.len() > STACK {
            self.frames.pop_front();
        }
        Observation {
            frames: [self.frames[0], self.frames[1], self.frames[2]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(v: f32) -> FeatureFrame {
        FeatureFrame([v; FRAME_LEN])
    }

    #[test]
    fn first_push_pads_by_repetition() {
        let mut h = History::new();
        let o = h.push_and_stack(frame(1.0));
        assert_eq!(o.frames, [frame(1.0); 3]);
        assert_eq!(o.to_vec().len(), OBS_LEN);
    }

    #[test]
    fn full_history_drops_oldest() {
        let mut h = History::new();
        h.push_and_stack(frame(0.0));
        h.push_and_stack(frame(1.0));
        h.push_and_stack(frame(2.0));
        let o = h.push_and_stack(frame(3.0));
        assert_eq!(o.frames, [frame(1.0), frame(2.0), frame(3.0)]);
        assert_eq!(h.len(), 3);
    }
}
