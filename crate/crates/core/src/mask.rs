//! Inference-time action masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::TacticalAction;
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRules {
    None,
    /// No switching while slow on the navigation lane.
    Rule1,
    /// Rule 1, and no switching onto opposite or biking lanes.
    Rule2,
}

impl MaskRules {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskRules::None => "none",
            MaskRules::Rule1 => "rule1",
            MaskRules::Rule2 => "rule2",
        }
    }
}

impl fmt::Display for MaskRules {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaskRules {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MaskRules::None),
            "rule1" => Ok(MaskRules::Rule1),
            "rule2" => Ok(MaskRules::Rule2),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskRuleSet {
    pub rules: MaskRules,
    pub v_slow: f64,
}

impl MaskRuleSet {
    pub fn new(rules: MaskRules) -> Self {
        Self { rules, v_slow: 2.0 }
    }
}

impl Default for MaskRuleSet {
    fn default() -> Self {
        Self::new(MaskRules::None)
    }
}

/// Policy actions permitted in `world`. Keeping the lane is always allowed.
pub fn allowed_actions(rules: &MaskRuleSet, world: &WorldState) -> Vec<TacticalAction> {
    let ego = &world.ego;
    let lane = world.map.lane(ego.lane_id);
    let slow_on_nav = ego.lane_id == world.navigation_lane && ego.speed < rules.v_slow;
    TacticalAction::POLICY
        .into_iter()
        .filter(|&a| {
            if !a.is_switch() || rules.rules == MaskRules::None {
                return true;
            }
            if slow_on_nav {
                return false;
            }
            if rules.rules == MaskRules::Rule2 {
                let dest = if a == TacticalAction::SwitchLeft { lane.left } else { lane.right };
                if let Some(d) = dest {
                    return !world.map.lane(d).class.is_dangerous();
                }
            }
            true
        })
        .collect()
}

/// Boolean mask over the policy actions in index order.
pub fn action_mask(rules: &MaskRuleSet, world: &WorldState) -> [bool; 3] {
    let mut m = [false; 3];
    for a in allowed_actions(rules, world) {
        m[a.index()] = true;
    }
    m
}
