//! Agent-facing environment: one step is one agent period (several world
//! ticks) under a single tactical decision.

use serde::{Deserialize, Serialize};

use crate::observation::{encode_frame, History, ObsConfig, Observation};
use crate::planner::{plan_ego, PlanState, PlannerConfig, TacticalAction};
use crate::reward::{
    compose, traffic_light_alert, update_counters, world_collision_risk, LaneCounters,
    RewardBreakdown, RewardConfig, StepSignals,
};
use crate::world::{check_termination, step_world, LaneClass, LaneId, TerminationCause, WorldConfig, WorldState};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvConfig {
    pub world: WorldConfig,
    pub planner: PlannerConfig,
    pub reward: RewardConfig,
    pub obs: ObsConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub action: TacticalAction,
    /// A switch toward a missing neighbor was executed as keep-lane.
    pub degraded: bool,
    pub max_risk: f64,
    pub lane_before: LaneId,
    pub lane_after: LaneId,
    pub class_after: LaneClass,
    /// Mean longitudinal speed over the step (m/s).
    pub lon_speed: f64,
    /// Mean absolute lateral speed over the step (m/s).
    pub lat_speed: f64,
    pub ticks: u32,
    pub clock: f64,
}

impl StepInfo {
    /// The step moved the ego from a non-dangerous lane onto a biking or
    /// opposite lane.
    pub fn entered_dangerous(&self, before: LaneClass) -> bool {
        !before.is_dangerous() && self.class_after.is_dangerous()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub cause: Option<TerminationCause>,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct TacticalEnv {
    cfg: EnvConfig,
    world: WorldState,
    plan: PlanState,
    counters: LaneCounters,
    history: History,
    obs: Observation,
    cause: Option<TerminationCause>,
    steps: u64,
}

impl TacticalEnv {
    pub fn new(cfg: EnvConfig, world: WorldState) -> Self {
        let counters = LaneCounters::new(cfg.reward.counter_cap);
        let mut history = History::new();
        let obs = history.push_and_stack(encode_frame(&world, &counters, &cfg.obs));
        Self {
            plan: PlanState::new(cfg.planner.horizon_s),
            cfg,
            world,
            counters,
            history,
            obs,
            cause: None,
            steps: 0,
        }
    }

    pub fn reset(&mut self, world: WorldState) -> Observation {
        *self = Self::new(self.cfg.clone(), world);
        self.obs.clone()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn plan(&self) -> &PlanState {
        &self.plan
    }

    pub fn counters(&self) -> LaneCounters {
        self.counters
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn is_done(&self) -> bool {
        self.cause.is_some()
    }

    pub fn cause(&self) -> Option<TerminationCause> {
        self.cause
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Advances one agent period. `action` drives the planner on the first
    /// tick, the plan continues on its own for the remaining ticks.
    ///
    /// # Panics
    /// When called after termination.
    pub fn step(&mut self, action: TacticalAction) -> StepOutcome {
        assert!(self.cause.is_none(), "step on a terminated episode");
        let lane_before = self.world.ego.lane_id;
        let mut signals = StepSignals::default();
        let mut degraded = false;
        let mut lon = 0.0;
        let mut lat = 0.0;
        let mut ticks = 0u32;
        for tick in 0..self.cfg.world.ticks_per_agent_step {
            let decision = if tick == 0 { action } else { TacticalAction::NoOp };
            let out = plan_ego(decision, &self.plan, &self.world, &self.cfg.planner);
            self.plan = out.plan;
            degraded |= out.degraded;
            lon += self.world.ego.speed;
            step_world(&mut self.world, out.accel, out.lateral_rate);
            lat += self.world.last_lateral_rate.abs();
            ticks += 1;
            let risk = world_collision_risk(&self.world, &self.cfg.reward.risk, self.cfg.reward.region);
            signals.collision_risk = signals.collision_risk.max(risk);
            signals.light_alert = signals.light_alert.max(traffic_light_alert(&self.world));
            if let Some(c) = check_termination(&self.world, risk) {
                signals.termination = Some(c);
                break;
            }
        }
        self.counters = update_counters(self.counters, self.world.ego_lane_class());
        let reward = compose(&self.world, &signals, action, &self.counters, &self.cfg.reward);
        self.obs = self
            .history
            .push_and_stack(encode_frame(&self.world, &self.counters, &self.cfg.obs));
        self.cause = signals.termination;
        self.steps += 1;
        StepOutcome {
            obs: self.obs.clone(),
            reward,
            done: self.cause.is_some(),
            cause: self.cause,
            info: StepInfo {
                action,
                degraded,
                max_risk: signals.collision_risk,
                lane_before,
                lane_after: self.world.ego.lane_id,
                class_after: self.world.ego_lane_class(),
                lon_speed: lon / ticks as f64,
                lat_speed: lat / ticks as f64,
                ticks,
                clock: self.world.clock(),
            },
        }
    }
}
