//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::agent::{NetShape, TrainConfig};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::mask::{MaskRuleSet, MaskRules};
use crate::replay::ReplayConfig;
use crate::reward::RewardVariant;
use crate::skip::{SkipMode, SkipScheme};
use crate::world::{desk_map, full_map, load_map, RoadMap};
use crate::OBS_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Dqn,
    Random,
    RuleBased,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Dqn => "dqn",
            PolicyKind::Random => "random",
            PolicyKind::RuleBased => "rule_based",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(PolicyKind::Dqn),
            "random" => Ok(PolicyKind::Random),
            "rule_based" => Ok(PolicyKind::RuleBased),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

/// Scheme syntax: `none`, `repeat:K`, `uniform:K`, `nonuniform:KEEP/SWITCH`,
/// `dynamic:K1,K2,...`.
pub fn parse_scheme(s: &str) -> Result<SkipScheme> {
    let (mode, arg) = s.split_once(':').unwrap_or((s, ""));
    let num = |t: &str| -> Result<u32> {
        t.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad skip factor {t:?} in {s:?}")))
    };
    let scheme = match mode.parse::<SkipMode>()? {
        SkipMode::None => SkipScheme::none(),
        SkipMode::Repeat => SkipScheme::repeat(num(arg)?),
        SkipMode::SkipUniform => SkipScheme::uniform(num(arg)?),
        SkipMode::SkipNonUniform => {
            let (k, sw) = arg
                .split_once('/')
                .ok_or_else(|| Error::Config(format!("non-uniform scheme needs KEEP/SWITCH: {s:?}")))?;
            SkipScheme::non_uniform(num(k)?, num(sw)?)
        }
        SkipMode::SkipDynamic => SkipScheme::dynamic(&arg.split(',').map(num).collect::<Result<Vec<_>>>()?),
    };
    scheme.validate()?;
    Ok(scheme)
}

pub fn format_scheme(s: &SkipScheme) -> String {
    use crate::planner::TacticalAction as A;
    match s.mode {
        SkipMode::None => "none".into(),
        SkipMode::Repeat => format!("repeat:{}", s.k_uniform),
        SkipMode::SkipUniform => format!("uniform:{}", s.k_uniform),
        SkipMode::SkipNonUniform => format!(
            "nonuniform:{}/{}",
            s.k_per_action.get(&A::KeepLane).copied().unwrap_or(0),
            s.k_per_action.get(&A::SwitchLeft).copied().unwrap_or(0)
        ),
        SkipMode::SkipDynamic => {
            let ks: Vec<String> = s.k_choices.iter().map(|k| k.to_string()).collect();
            format!("dynamic:{}", ks.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub policy: PolicyKind,
    pub train_skip: SkipScheme,
    pub eval_skip: SkipScheme,
    pub eval_mask: MaskRuleSet,
    /// Mask applied during training exploration; off by default.
    pub train_mask: MaskRuleSet,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub replay: ReplayConfig,
    pub hidden: usize,
    pub head_hidden: usize,
    pub mean_subtract: bool,
    pub env_steps: u64,
    pub eval_episodes: usize,
    pub n_npcs: usize,
    /// `desk`, `full`, or a map file path.
    pub map: String,
    pub seeds: Vec<u64>,
    pub suite_seed: u64,
    pub phase_extension: bool,
    pub checkpoint_every: u64,
}

impl RunConfig {
    /// Laptop-scale defaults.
    pub fn desk() -> Self {
        Self {
            preset: "custom".into(),
            policy: PolicyKind::Dqn,
            train_skip: SkipScheme::uniform(4),
            eval_skip: SkipScheme::uniform(4),
            eval_mask: MaskRuleSet::new(MaskRules::None),
            train_mask: MaskRuleSet::new(MaskRules::None),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            replay: ReplayConfig::default(),
            hidden: 64,
            head_hidden: 64,
            mean_subtract: false,
            env_steps: 30_000,
            eval_episodes: 100,
            n_npcs: 8,
            map: "desk".into(),
            seeds: vec![1, 2, 3],
            suite_seed: 7,
            phase_extension: true,
            checkpoint_every: 10_000,
        }
    }

    /// The full-scale protocol: 250K steps, 100 test episodes, 32 NPCs,
    /// 20 routes, 256-unit layers, ten seeds.
    pub fn full() -> Self {
        Self {
            hidden: 256,
            head_hidden: 256,
            env_steps: 250_000,
            eval_episodes: 100,
            n_npcs: 32,
            map: "full".into(),
            seeds: (1..=10).collect(),
            checkpoint_every: 25_000,
            ..Self::desk()
        }
    }

    pub fn net_shape(&self) -> NetShape {
        NetShape {
            input: OBS_LEN,
            hidden: self.hidden,
            head_hidden: self.head_hidden,
            actions: self.train_skip.n_actions(),
            mean_subtract: self.mean_subtract,
        }
    }

    pub fn replay_config(&self) -> ReplayConfig {
        ReplayConfig {
            obs_len: OBS_LEN,
            ..self.replay.clone()
        }
    }

    pub fn load_map(&self) -> Result<Arc<RoadMap>> {
        Ok(Arc::new(match self.map.as_str() {
            "desk" => desk_map(),
            "full" => full_map(),
            path => load_map(Path::new(path))?,
        }))
    }

    pub fn validate(&self) -> Result<()> {
        self.train_skip.validate()?;
        self.eval_skip.validate()?;
        self.replay.validate()?;
        if self.policy == PolicyKind::Dqn && self.train_skip.n_actions() != self.eval_skip.n_actions() {
            return Err(Error::Config(format!(
                "training scheme {} and evaluation scheme {} have different action spaces",
                format_scheme(&self.train_skip),
                format_scheme(&self.eval_skip)
            )));
        }
        if self.hidden == 0 || self.head_hidden == 0 || self.train.batch == 0 {
            return Err(Error::Config("network widths and batch size must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
            }
        }
        match key {
            "preset" if value == "custom" => self.preset = value.to_string(),
            "preset" => *self = super::presets::preset_config(value, self.clone())?,
            "policy" => self.policy = value.parse()?,
            "skip" => {
                self.train_skip = parse_scheme(value)?;
                self.eval_skip = self.train_skip.clone();
            }
            "train_skip" => self.train_skip = parse_scheme(value)?,
            "eval_skip" => self.eval_skip = parse_scheme(value)?,
            "reward" => self.env.reward.variant = value.parse::<RewardVariant>()?,
            "mask" => self.eval_mask.rules = value.parse()?,
            "train_mask" => self.train_mask.rules = value.parse()?,
            "v_slow" => {
                self.eval_mask.v_slow = num(key, value)?;
                self.train_mask.v_slow = self.eval_mask.v_slow;
            }
            "env_steps" => self.env_steps = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "n_npcs" => self.n_npcs = num(key, value)?,
            "map" => self.map = value.to_string(),
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<Vec<u64>>>()?
            }
            "suite_seed" => self.suite_seed = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "head_hidden" => self.head_hidden = num(key, value)?,
            "mean_subtract" => self.mean_subtract = flag(key, value)?,
            "gamma" => self.train.gamma = num(key, value)?,
            "lr" => self.train.adam.lr = num(key, value)?,
            "beta1" => self.train.adam.beta1 = num(key, value)?,
            "beta2" => self.train.adam.beta2 = num(key, value)?,
            "batch" => self.train.batch = num(key, value)?,
            "tau" => self.train.tau = num(key, value)?,
            "eps_start" => self.train.eps_start = num(key, value)?,
            "eps_end" => self.train.eps_end = num(key, value)?,
            "eps_steps" => self.train.eps_steps = num(key, value)?,
            "updates_per_env_step" => self.train.updates_per_env_step = num(key, value)?,
            "replay_capacity" => self.replay.capacity = num(key, value)?,
            "fragment_len" => self.replay.fragment_len = num(key, value)?,
            "cache_fragments" => self.replay.cache_fragments = num(key, value)?,
            "max_samples_per_fragment" => self.replay.max_samples_per_fragment = num(key, value)?,
            "phase_extension" => self.phase_extension = flag(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "counter_cap" => self.env.reward.counter_cap = num(key, value)?,
            "risk_orientation" => {
                self.env.reward.risk.orientation = match value {
                    "head_on" => crate::reward::RiskOrientation::HeadOn,
                    "literal" => crate::reward::RiskOrientation::Literal,
                    _ => return Err(Error::UnknownVariant(value.to_string())),
                }
            }
            "stuck_timeout_s" => self.env.world.stuck_timeout_s = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a config file body. `scale` and `preset` are applied first,
    /// every other key then overrides them regardless of order.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let mut cfg = match kv.get("scale").map(String::as_str) {
            None | Some("desk") => Self::desk(),
            Some("full") => Self::full(),
            Some(other) => return Err(Error::UnknownVariant(other.to_string())),
        };
        if let Some(p) = kv.get("preset") {
            cfg.set("preset", p)?;
        }
        for (k, v) in &kv {
            if k != "scale" && k != "preset" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Effective configuration in the same flat format.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(|x| x.to_string()).collect();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("policy", self.policy.as_str().into());
        put("train_skip", format_scheme(&self.train_skip));
        put("eval_skip", format_scheme(&self.eval_skip));
        put("reward", self.env.reward.variant.to_string());
        put("mask", self.eval_mask.rules.to_string());
        put("train_mask", self.train_mask.rules.to_string());
        put("v_slow", format!("{:?}", self.eval_mask.v_slow));
        put("env_steps", self.env_steps.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("n_npcs", self.n_npcs.to_string());
        put("map", self.map.clone());
        put("seeds", seeds.join(","));
        put("suite_seed", self.suite_seed.to_string());
        put("hidden", self.hidden.to_string());
        put("head_hidden", self.head_hidden.to_string());
        put("mean_subtract", self.mean_subtract.to_string());
        put("gamma", format!("{:?}", self.train.gamma));
        put("lr", format!("{:?}", self.train.adam.lr));
        put("beta1", format!("{:?}", self.train.adam.beta1));
        put("beta2", format!("{:?}", self.train.adam.beta2));
        put("batch", self.train.batch.to_string());
        put("tau", format!("{:?}", self.train.tau));
        put("eps_start", format!("{:?}", self.train.eps_start));
        put("eps_end", format!("{:?}", self.train.eps_end));
        put("eps_steps", self.train.eps_steps.to_string());
        put("updates_per_env_step", self.train.updates_per_env_step.to_string());
        put("replay_capacity", self.replay.capacity.to_string());
        put("fragment_len", self.replay.fragment_len.to_string());
        put("cache_fragments", self.replay.cache_fragments.to_string());
        put("max_samples_per_fragment", self.replay.max_samples_per_fragment.to_string());
        put("phase_extension", self.phase_extension.to_string());
        put("checkpoint_every", self.checkpoint_every.to_string());
        put("counter_cap", self.env.reward.counter_cap.to_string());
        put("stuck_timeout_s", format!("{:?}", self.env.world.stuck_timeout_s));
        // preset last so re-parsing does not clobber the explicit keys
        let mut out = format!("preset = {}\n", self.preset);
        out.push_str(&s);
        out
    }
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("duplicate key {k:?}"),
            });
        }
    }
    Ok(out)
}

/// Output directory for one seed of a run.
pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}
