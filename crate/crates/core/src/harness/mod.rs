//! Experiment orchestration: configs, presets, training, evaluation and
//! reporting.

pub mod config;
pub mod evaluate;
pub mod policy;
pub mod presets;
pub mod report;
pub mod scenario;
pub mod suite;
pub mod train;

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{load_checkpoint, QParams};
use crate::error::{Error, Result};

pub use config::{parse_scheme, PolicyKind, RunConfig};
pub use evaluate::{evaluate, evaluate_worlds, ActionRecord, EvalOptions, EvalReport, Metrics};
pub use policy::{GreedyPolicy, Policy, RandomPolicy, RuleBasedPolicy};
pub use presets::{preset_config, PresetInfo, PRESETS};
pub use report::{aggregate, median, ReportRow};
pub use suite::Suite;
pub use train::{train, TrainOutcome, TrainSummary};

/// Loads only the online network from a checkpoint.
pub fn load_policy_params(path: &Path) -> Result<QParams> {
    Ok(load_checkpoint(path, Default::default())?.online)
}

/// Builds the evaluation policy for `cfg`. `params` is required for the
/// learned policy and ignored by the baselines.
pub fn make_policy(cfg: &RunConfig, params: Option<QParams>, seed: u64) -> Result<Box<dyn Policy>> {
    Ok(match cfg.policy {
        PolicyKind::Dqn => {
            let params = params.ok_or_else(|| Error::Config("learned policy needs a checkpoint".into()))?;
            if params.shape.actions != cfg.eval_skip.n_actions() {
                return Err(Error::Shape {
                    expected: cfg.eval_skip.n_actions(),
                    got: params.shape.actions,
                });
            }
            Box::new(GreedyPolicy { params })
        }
        PolicyKind::Random => Box::new(RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }),
        PolicyKind::RuleBased => Box::new(RuleBasedPolicy::default()),
    })
}

pub fn eval_options(cfg: &RunConfig) -> EvalOptions {
    EvalOptions {
        mask: cfg.eval_mask,
        skip: cfg.eval_skip.clone(),
        record_actions: true,
    }
}

/// The suite a config evaluates against.
pub fn suite_for(cfg: &RunConfig) -> Result<Suite> {
    let map = cfg.load_map()?;
    Suite::generate(
        map,
        std::sync::Arc::new(cfg.env.world.clone()),
        cfg.suite_seed,
        cfg.eval_episodes,
        cfg.n_npcs,
    )
}

/// Evaluates one seed and writes `metrics.json` and `actions.jsonl` into
/// `out`.
pub fn evaluate_seed(cfg: &RunConfig, params: Option<QParams>, seed: u64, suite: &Suite, out: &Path) -> Result<Metrics> {
    let map = cfg.load_map()?;
    let mut policy = make_policy(cfg, params, seed)?;
    let report = evaluate(policy.as_mut(), suite, map, &cfg.env, &eval_options(cfg))?;
    let mut metrics = report.metrics;
    metrics.preset = cfg.preset.clone();
    metrics.seed = seed;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("metrics.json");
    fs::write(&path, serde_json::to_string_pretty(&metrics)?).map_err(|e| Error::io(&path, e))?;
    let mut lines = String::new();
    for a in &report.actions {
        lines.push_str(&serde_json::to_string(a)?);
        lines.push('\n');
    }
    let path = out.join("actions.jsonl");
    fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    Ok(metrics)
}
