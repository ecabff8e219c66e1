//! Greedy evaluation over a fixed episode suite.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, TacticalEnv};
use crate::error::{Error, Result};
use crate::mask::{action_mask, MaskRuleSet};
use crate::planner::TacticalAction;
use crate::skip::{meta_step, SkipScheme};
use crate::world::{LaneClass, RoadMap, TerminationCause, WorldState};

use super::policy::Policy;
use super::suite::Suite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub preset: String,
    pub seed: u64,
    pub success_rate: f64,
    /// Mean over agent steps of the longitudinal speed (m/s).
    pub lon_speed: f64,
    /// Mean over agent steps of the absolute lateral speed (m/s).
    pub lat_speed: f64,
    pub terminations: BTreeMap<String, u32>,
    pub episodes: usize,
    /// Agent steps that ended on a biking or opposite lane.
    pub dangerous_steps: u64,
    /// Moves from a normal lane onto a biking or opposite lane.
    pub dangerous_entries: u64,
    pub agent_steps: u64,
}

/// One decision taken during evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub episode: usize,
    pub step: u64,
    pub action: TacticalAction,
    pub factor: u32,
    pub class_before: LaneClass,
    /// Classes of every lane visited during the meta-action.
    pub classes_after: Vec<LaneClass>,
}

impl ActionRecord {
    pub fn entered_dangerous(&self) -> bool {
        let mut prev = self.class_before;
        for &c in &self.classes_after {
            if !prev.is_dangerous() && c.is_dangerous() {
                return true;
            }
            prev = c;
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub mask: MaskRuleSet,
    pub skip: SkipScheme,
    pub record_actions: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub actions: Vec<ActionRecord>,
}

/// Mask over the agent's action space: the base mask repeated for every
/// skip factor in dynamic mode.
pub fn composite_mask(rules: &MaskRuleSet, scheme: &SkipScheme, world: &WorldState) -> Vec<bool> {
    let base = action_mask(rules, world);
    (0..scheme.n_actions()).map(|i| base[i % base.len()]).collect()
}

/// Runs `policy` on the given initial worlds without exploration.
pub fn evaluate_worlds(
    policy: &mut dyn Policy,
    worlds: impl IntoIterator<Item = WorldState>,
    env_cfg: &EnvConfig,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    opts.skip.validate()?;
    let mut terminations: BTreeMap<String, u32> =
        TerminationCause::ALL.iter().map(|c| (c.as_str().to_string(), 0)).collect();
    let mut actions = Vec::new();
    let (mut episodes, mut successes, mut steps) = (0usize, 0usize, 0u64);
    let (mut lon, mut lat) = (0.0, 0.0);
    let (mut dangerous_steps, mut dangerous_entries) = (0u64, 0u64);
    for world in worlds {
        let mut env = TacticalEnv::new(env_cfg.clone(), world);
        let mut step = 0u64;
        while !env.is_done() {
            let allowed = composite_mask(&opts.mask, &opts.skip, env.world());
            let idx = policy.act(&env, &allowed)?;
            let meta = opts
                .skip
                .decode(idx)
                .ok_or_else(|| Error::Config(format!("policy produced action {idx} outside the action space")))?;
            let class_before = env.world().ego_lane_class();
            let out = meta_step(&mut env, meta, &opts.skip, 0)?;
            let mut prev = class_before;
            let mut classes = Vec::with_capacity(out.inner.len());
            for o in &out.inner {
                lon += o.info.lon_speed;
                lat += o.info.lat_speed;
                steps += 1;
                let c = o.info.class_after;
                if c.is_dangerous() {
                    dangerous_steps += 1;
                    if !prev.is_dangerous() {
                        dangerous_entries += 1;
                    }
                }
                prev = c;
                classes.push(c);
            }
            if opts.record_actions {
                actions.push(ActionRecord {
                    episode: episodes,
                    step,
                    action: meta.action,
                    factor: out.steps_consumed,
                    class_before,
                    classes_after: classes,
                });
            }
            step += out.steps_consumed as u64;
        }
        let cause = env.cause().expect("episode finished");
        *terminations.entry(cause.as_str().to_string()).or_default() += 1;
        if cause == TerminationCause::Success {
            successes += 1;
        }
        episodes += 1;
    }
    let per_step = |x: f64| if steps > 0 { x / steps as f64 } else { 0.0 };
    Ok(EvalReport {
        metrics: Metrics {
            preset: String::new(),
            seed: 0,
            success_rate: if episodes > 0 { successes as f64 / episodes as f64 } else { 0.0 },
            lon_speed: per_step(lon),
            lat_speed: per_step(lat),
            terminations,
            episodes,
            dangerous_steps,
            dangerous_entries,
            agent_steps: steps,
        },
        actions,
    })
}

/// Runs `policy` over every suite episode.
pub fn evaluate(
    policy: &mut dyn Policy,
    suite: &Suite,
    map: Arc<RoadMap>,
    env_cfg: &EnvConfig,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    suite.check_map(&map)?;
    let wc = Arc::new(env_cfg.world.clone());
    let worlds = (0..suite.episodes.len())
        .map(|i| suite.world(i, map.clone(), wc.clone()))
        .collect::<Result<Vec<_>>>()?;
    evaluate_worlds(policy, worlds, env_cfg, opts)
}
