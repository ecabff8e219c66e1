//! Named experiment configurations, one per results-table row.

use crate::error::{Error, Result};
use crate::mask::MaskRules;
use crate::reward::RewardVariant;
use crate::skip::SkipScheme;

use super::config::{PolicyKind, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresetInfo {
    pub id: &'static str,
    pub section: &'static str,
    pub skipping: &'static str,
    pub reward: &'static str,
    pub other: &'static str,
}

pub const PRESETS: [PresetInfo; 14] = [
    PresetInfo { id: "01", section: "Baseline", skipping: "N/A", reward: "N/A", other: "Random" },
    PresetInfo { id: "02", section: "Baseline", skipping: "N/A", reward: "N/A", other: "Rule-based" },
    PresetInfo { id: "03", section: "Skipping", skipping: "None", reward: "Proposed", other: "N/A" },
    PresetInfo { id: "04", section: "Skipping", skipping: "Repetition", reward: "Proposed", other: "N/A" },
    PresetInfo { id: "05", section: "Skipping", skipping: "Dynamic", reward: "Proposed", other: "2x / 6x skipping" },
    PresetInfo { id: "06", section: "Reward", skipping: "Uniform", reward: "Global goal", other: "N/A" },
    PresetInfo { id: "07", section: "Reward", skipping: "Uniform", reward: "1.0 lane penalty", other: "N/A" },
    PresetInfo { id: "08", section: "Reward", skipping: "Uniform", reward: "0.1 lane penalty", other: "N/A" },
    PresetInfo { id: "09", section: "Reward", skipping: "Uniform", reward: "Local goal", other: "N/A" },
    PresetInfo { id: "10", section: "Proposed", skipping: "Uniform", reward: "Proposed", other: "N/A" },
    PresetInfo { id: "11", section: "Proposed", skipping: "Uniform", reward: "Proposed", other: "Action mask 1" },
    PresetInfo { id: "12", section: "Proposed", skipping: "Uniform", reward: "Proposed", other: "Action mask 2" },
    PresetInfo { id: "13", section: "Proposed", skipping: "Non-Uniform", reward: "Proposed", other: "Action mask 1" },
    PresetInfo { id: "14", section: "Proposed", skipping: "Non-Uniform", reward: "Proposed", other: "Action mask 2" },
];

pub fn preset_info(id: &str) -> Option<&'static PresetInfo> {
    PRESETS.iter().find(|p| p.id == id)
}

/// Training skip factor shared by the skipping presets.
pub const TRAIN_K: u32 = 4;

/// Applies preset `id` on top of `base` (which carries the scale).
pub fn preset_config(id: &str, base: RunConfig) -> Result<RunConfig> {
    let info = preset_info(id).ok_or_else(|| Error::UnknownVariant(format!("preset {id}")))?;
    let mut c = base;
    c.preset = info.id.to_string();
    c.policy = PolicyKind::Dqn;
    c.train_skip = SkipScheme::uniform(TRAIN_K);
    c.eval_skip = SkipScheme::uniform(TRAIN_K);
    c.env.reward.variant = RewardVariant::Proposed;
    c.eval_mask.rules = MaskRules::None;
    match info.id {
        "01" | "02" => {
            c.policy = if info.id == "01" { PolicyKind::Random } else { PolicyKind::RuleBased };
            c.train_skip = SkipScheme::none();
            c.eval_skip = SkipScheme::none();
        }
        "03" => {
            c.train_skip = SkipScheme::none();
            c.eval_skip = SkipScheme::none();
        }
        "04" => {
            c.train_skip = SkipScheme::repeat(TRAIN_K);
            c.eval_skip = SkipScheme::repeat(TRAIN_K);
        }
        "05" => {
            c.train_skip = SkipScheme::dynamic(&[2, 6]);
            c.eval_skip = SkipScheme::dynamic(&[2, 6]);
        }
        "06" => c.env.reward.variant = RewardVariant::GlobalGoal,
        "07" => c.env.reward.variant = RewardVariant::ConstLane(1.0),
        "08" => c.env.reward.variant = RewardVariant::ConstLane(0.1),
        "09" => c.env.reward.variant = RewardVariant::LocalGoal,
        "10" => {}
        "11" => c.eval_mask.rules = MaskRules::Rule1,
        "12" => c.eval_mask.rules = MaskRules::Rule2,
        "13" | "14" => {
            c.eval_skip = SkipScheme::non_uniform(2, 6);
            c.eval_mask.rules = if info.id == "13" { MaskRules::Rule1 } else { MaskRules::Rule2 };
        }
        _ => unreachable!(),
    }
    Ok(c)
}

/// Presets 10 to 14 share one trained checkpoint and differ only at
/// inference; this returns the preset whose training run they reuse.
pub fn training_source(id: &str) -> &str {
    match id {
        "11" | "12" | "13" | "14" => "10",
        other => other,
    }
}
