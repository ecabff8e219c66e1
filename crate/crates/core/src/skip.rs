//! Meta-actions: repetition, uniform and per-action skipping, and
//! agent-chosen skip factors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{StepOutcome, TacticalEnv};
use crate::error::{Error, Result};
use crate::observation::Observation;
use crate::planner::TacticalAction;
use crate::world::TerminationCause;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    None,
    Repeat,
    SkipUniform,
    SkipNonUniform,
    SkipDynamic,
}

impl SkipMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipMode::None => "none",
            SkipMode::Repeat => "repeat",
            SkipMode::SkipUniform => "skip_uniform",
            SkipMode::SkipNonUniform => "skip_non_uniform",
            SkipMode::SkipDynamic => "skip_dynamic",
        }
    }
}

impl fmt::Display for SkipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => SkipMode::None,
            "repeat" => SkipMode::Repeat,
            "skip_uniform" | "uniform" => SkipMode::SkipUniform,
            "skip_non_uniform" | "nonuniform" => SkipMode::SkipNonUniform,
            "skip_dynamic" | "dynamic" => SkipMode::SkipDynamic,
            _ => return Err(Error::UnknownVariant(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipScheme {
    pub mode: SkipMode,
    pub k_uniform: u32,
    pub k_per_action: BTreeMap<TacticalAction, u32>,
    /// Factors the agent picks from in dynamic mode, in action-index order.
    pub k_choices: Vec<u32>,
}

impl Default for SkipScheme {
    fn default() -> Self {
        Self::none()
    }
}

impl SkipScheme {
    pub fn none() -> Self {
        Self {
            mode: SkipMode::None,
            k_uniform: 1,
            k_per_action: BTreeMap::new(),
            k_choices: Vec::new(),
        }
    }

    pub fn repeat(k: u32) -> Self {
        Self {
            mode: SkipMode::Repeat,
            k_uniform: k,
            ..Self::none()
        }
    }

    pub fn uniform(k: u32) -> Self {
        Self {
            mode: SkipMode::SkipUniform,
            k_uniform: k,
            ..Self::none()
        }
    }

    /// Per-action factors: one for keeping the lane, one for either switch.
    pub fn non_uniform(keep: u32, switch: u32) -> Self {
        let k_per_action = [
            (TacticalAction::KeepLane, keep),
            (TacticalAction::SwitchLeft, switch),
            (TacticalAction::SwitchRight, switch),
        ]
        .into_iter()
        .collect();
        Self {
            mode: SkipMode::SkipNonUniform,
            k_per_action,
            ..Self::none()
        }
    }

    pub fn dynamic(choices: &[u32]) -> Self {
        Self {
            mode: SkipMode::SkipDynamic,
            k_choices: choices.to_vec(),
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: u32| k == 0;
        match self.mode {
            SkipMode::None => Ok(()),
            SkipMode::Repeat | SkipMode::SkipUniform if bad(self.k_uniform) => {
                Err(Error::Config(format!("skip factor must be >= 1, got {}", self.k_uniform)))
            }
            SkipMode::Repeat | SkipMode::SkipUniform => Ok(()),
            SkipMode::SkipNonUniform => {
                for a in TacticalAction::POLICY {
                    match self.k_per_action.get(&a) {
                        None => return Err(Error::MissingSkipFactor(a.as_str().to_string())),
                        Some(&k) if bad(k) => {
                            return Err(Error::Config(format!("skip factor for {} must be >= 1", a.as_str())))
                        }
                        Some(_) => {}
                    }
                }
                Ok(())
            }
            SkipMode::SkipDynamic => {
                if self.k_choices.is_empty() || self.k_choices.iter().any(|&k| bad(k)) {
                    Err(Error::Config("dynamic skipping needs factors >= 1".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Size of the agent's discrete action space under this scheme.
    pub fn n_actions(&self) -> usize {
        match self.mode {
            SkipMode::SkipDynamic => TacticalAction::POLICY.len() * self.k_choices.len(),
            _ => TacticalAction::POLICY.len(),
        }
    }

    /// Maps an agent action index to a meta-action.
    pub fn decode(&self, index: usize) -> Option<MetaAction> {
        let n = TacticalAction::POLICY.len();
        let action = TacticalAction::from_index(index % n)?;
        match self.mode {
            SkipMode::SkipDynamic => {
                let k = *self.k_choices.get(index / n)?;
                Some(MetaAction { action, factor: Some(k) })
            }
            _ if index < n => Some(MetaAction { action, factor: None }),
            _ => None,
        }
    }

    pub fn encode(&self, meta: MetaAction) -> Option<usize> {
        let base = meta.action.index();
        match (self.mode, meta.factor) {
            (SkipMode::SkipDynamic, Some(k)) => {
                let slot = self.k_choices.iter().position(|&c| c == k)?;
                Some(base + TacticalAction::POLICY.len() * slot)
            }
            (SkipMode::SkipDynamic, None) => None,
            _ => Some(base),
        }
    }
}

/// A tactical decision plus, in dynamic mode, its chosen skip factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaAction {
    pub action: TacticalAction,
    pub factor: Option<u32>,
}

impl MetaAction {
    pub fn plain(action: TacticalAction) -> Self {
        Self { action, factor: None }
    }
}

pub fn skip_factor(meta: MetaAction, scheme: &SkipScheme) -> Result<u32> {
    match scheme.mode {
        SkipMode::None => Ok(1),
        SkipMode::Repeat | SkipMode::SkipUniform => Ok(scheme.k_uniform),
        SkipMode::SkipNonUniform => scheme
            .k_per_action
            .get(&meta.action)
            .copied()
            .ok_or_else(|| Error::MissingSkipFactor(meta.action.as_str().to_string())),
        SkipMode::SkipDynamic => meta
            .factor
            .ok_or_else(|| Error::MissingSkipFactor(format!("{} (dynamic)", meta.action.as_str()))),
    }
}

/// `floor(u * k)` for a uniform draw `u` in [0, 1).
pub fn phase_extension_from(u: f64, k: u32) -> u32 {
    ((u * k as f64).floor() as u32).min(k.saturating_sub(1))
}

/// Random extra inner steps for the first meta-step of a training episode.
pub fn phase_extension(rng: &mut impl Rng, k: u32) -> u32 {
    phase_extension_from(rng.random::<f64>(), k)
}

#[derive(Debug, Clone)]
pub struct MetaOutcome {
    pub obs: Observation,
    /// Mean of the collected per-step rewards.
    pub reward: f64,
    pub done: bool,
    pub cause: Option<TerminationCause>,
    pub steps_consumed: u32,
    pub inner: Vec<StepOutcome>,
}

/// Runs one meta-action: `k + extra` inner steps, stopping early on
/// termination.
///
/// # Panics
/// When `meta.action` is a no-op or the env is already terminated.
pub fn meta_step(env: &mut TacticalEnv, meta: MetaAction, scheme: &SkipScheme, extra: u32) -> Result<MetaOutcome> {
    assert!(meta.action != TacticalAction::NoOp, "meta-action must be a decision");
    let k = skip_factor(meta, scheme)? + extra;
    let mut inner = Vec::with_capacity(k as usize);
    for j in 0..k {
        let a = if j == 0 || scheme.mode == SkipMode::Repeat {
            meta.action
        } else {
            TacticalAction::NoOp
        };
        let out = env.step(a);
        let done = out.done;
        inner.push(out);
        if done {
            break;
        }
    }
    let last = inner.last().expect("at least one inner step");
    Ok(MetaOutcome {
        obs: last.obs.clone(),
        reward: inner.iter().map(|o| o.reward.total).sum::<f64>() / inner.len() as f64,
        done: last.done,
        cause: last.cause,
        steps_consumed: inner.len() as u32,
        inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_per_mode() {
        let keep = MetaAction::plain(TacticalAction::KeepLane);
        let left = MetaAction::plain(TacticalAction::SwitchLeft);
        assert_eq!(skip_factor(keep, &SkipScheme::none()).unwrap(), 1);
        assert_eq!(skip_factor(left, &SkipScheme::uniform(4)).unwrap(), 4);
        let nu = SkipScheme::non_uniform(2, 6);
        assert_eq!(skip_factor(keep, &nu).unwrap(), 2);
        assert_eq!(skip_factor(left, &nu).unwrap(), 6);
        let dy = SkipScheme::dynamic(&[2, 6]);
        let m = MetaAction { action: TacticalAction::KeepLane, factor: Some(6) };
        assert_eq!(skip_factor(m, &dy).unwrap(), 6);
    }

    #[test]
    fn missing_factor_is_an_error() {
        let mut nu = SkipScheme::non_uniform(2, 6);
        nu.k_per_action.remove(&TacticalAction::SwitchRight);
        assert!(matches!(nu.validate(), Err(Error::MissingSkipFactor(_))));
        let right = MetaAction::plain(TacticalAction::SwitchRight);
        assert!(matches!(skip_factor(right, &nu), Err(Error::MissingSkipFactor(_))));
    }

    #[test]
    fn dynamic_index_round_trip() {
        let dy = SkipScheme::dynamic(&[2, 6]);
        assert_eq!(dy.n_actions(), 6);
        for i in 0..6 {
            let m = dy.decode(i).unwrap();
            assert_eq!(dy.encode(m), Some(i));
        }
        assert_eq!(dy.decode(4).unwrap().factor, Some(6));
        assert!(dy.decode(6).is_none());
    }

    #[test]
    fn phase_extension_examples() {
        assert_eq!(phase_extension_from(0.0, 4), 0);
        assert_eq!(phase_extension_from(0.5, 4), 2);
        assert_eq!(phase_extension_from(0.999_999, 4), 3);
    }
}
