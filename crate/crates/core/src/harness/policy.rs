//! Decision makers used by evaluation: the learned Q-network and the two
//! baselines.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{masked_argmax, QParams};
use crate::env::TacticalEnv;
use crate::error::Result;
use crate::planner::TacticalAction;
use crate::world::{nearest, LaneClass, LaneId, Who, WorldState};

pub trait Policy {
    /// Picks an action index given the allowed-action mask.
    fn act(&mut self, env: &TacticalEnv, allowed: &[bool]) -> Result<usize>;
}

/// Greedy policy over a trained network.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    pub params: QParams,
}

impl Policy for GreedyPolicy {
    fn act(&mut self, env: &TacticalEnv, allowed: &[bool]) -> Result<usize> {
        let q = self.params.q_values(&env.observation().to_vec())?;
        Ok(masked_argmax(&q, allowed))
    }
}

/// Uniform choice among allowed actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    pub rng: ChaCha8Rng,
}

impl Policy for RandomPolicy {
    fn act(&mut self, _env: &TacticalEnv, allowed: &[bool]) -> Result<usize> {
        let choices: Vec<usize> = (0..allowed.len()).filter(|&i| allowed[i]).collect();
        Ok(choices[self.rng.random_range(0..choices.len())])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleConfig {
    /// Clearance needed ahead and behind on the target lane (center to center).
    pub gap_ahead: f64,
    pub gap_behind: f64,
    /// A leader below this fraction of the speed limit is worth passing.
    pub slow_fraction: f64,
    /// Leaders farther than this are ignored.
    pub leader_range: f64,
    /// No overtaking this close to the end of the approach.
    pub junction_buffer: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            gap_ahead: 12.0,
            gap_behind: 12.0,
            slow_fraction: 0.6,
            leader_range: 30.0,
            junction_buffer: 60.0,
        }
    }
}

/// Keep the lane unless the navigation lane is elsewhere and reachable, or
/// a slow leader can be passed on an adjacent normal lane.
#[derive(Debug, Clone, Default)]
pub struct RuleBasedPolicy {
    pub cfg: RuleConfig,
}

impl RuleBasedPolicy {
    pub fn gap_clear(&self, world: &WorldState, lane: LaneId) -> bool {
        let s = world.ego.station;
        let ahead = nearest(world, lane, s, 1.0, None, Some(Who::Ego)).is_none_or(|n| n.distance > self.cfg.gap_ahead);
        let behind =
            nearest(world, lane, s, -1.0, None, Some(Who::Ego)).is_none_or(|n| n.distance > self.cfg.gap_behind);
        ahead && behind
    }

    pub fn decide(&self, world: &WorldState) -> TacticalAction {
        let map = &world.map;
        let ego = &world.ego;
        let lane = map.lane(ego.lane_id);
        let nav = world.navigation_lane;
        let toward = |target: LaneId| -> Option<(TacticalAction, LaneId)> {
            if lane.left.is_some() && map.lateral_index(target) > map.lateral_index(ego.lane_id) {
                lane.left.map(|l| (TacticalAction::SwitchLeft, l))
            } else if lane.right.is_some() && map.lateral_index(target) < map.lateral_index(ego.lane_id) {
                lane.right.map(|l| (TacticalAction::SwitchRight, l))
            } else {
                None
            }
        };
        if nav != ego.lane_id {
            if let Some((a, next)) = toward(nav) {
                if self.gap_clear(world, next) {
                    return a;
                }
            }
            return TacticalAction::KeepLane;
        }
        let to_end = lane.length() - ego.station;
        if lane.junction || to_end < self.cfg.junction_buffer {
            return TacticalAction::KeepLane;
        }
        let dir = lane.traffic_sign();
        let slow_leader = nearest(world, ego.lane_id, ego.station, 1.0, Some(dir), Some(Who::Ego))
            .is_some_and(|l| {
                l.distance <= self.cfg.leader_range && l.velocity.abs() < self.cfg.slow_fraction * lane.speed_limit
            });
        if slow_leader {
            for (a, side) in [(TacticalAction::SwitchLeft, lane.left), (TacticalAction::SwitchRight, lane.right)] {
                if let Some(l) = side {
                    if map.lane(l).class == LaneClass::Normal && self.gap_clear(world, l) {
                        return a;
                    }
                }
            }
        }
        TacticalAction::KeepLane
    }
}

impl Policy for RuleBasedPolicy {
    fn act(&mut self, env: &TacticalEnv, allowed: &[bool]) -> Result<usize> {
        let a = self.decide(env.world()).index();
        Ok(if allowed[a] { a } else { TacticalAction::KeepLane.index() })
    }
}
