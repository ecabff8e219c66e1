//! Collection and learning loop.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{epsilon, save_checkpoint, select_action, DqnAgent, Transition};
use crate::env::TacticalEnv;
use crate::error::{Error, Result};
use crate::replay::ReplayStore;
use crate::reward::RewardBreakdown;
use crate::skip::{meta_step, phase_extension, skip_factor};
use crate::world::sample_episode;

use super::config::RunConfig;
use super::evaluate::composite_mask;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "train_log.csv";
pub const SUMMARY_FILE: &str = "train_summary.json";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub preset: String,
    pub seed: u64,
    pub env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
    pub transitions: u64,
    pub final_epsilon: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub agent: DqnAgent,
    pub summary: TrainSummary,
    pub checkpoint: PathBuf,
}

/// Independent random streams for one run.
struct Streams {
    init: ChaCha8Rng,
    episodes: ChaCha8Rng,
    explore: ChaCha8Rng,
    replay: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |n: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(n);
            r
        };
        Self {
            init: stream(1),
            episodes: stream(2),
            explore: stream(3),
            replay: stream(4),
        }
    }
}

/// Trains one seed of `cfg`, writing the config, a per-meta-step CSV log,
/// periodic checkpoints and a summary into `out`.
///
/// Learner updates are owed at `updates_per_env_step` per environment step
/// and paid as soon as the replay store holds a sealed fragment; whatever
/// is still owed at the end of the budget is paid before returning.
pub fn train(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg_path = out.join(CONFIG_FILE);
    fs::write(&cfg_path, cfg.to_kv()).map_err(|e| Error::io(&cfg_path, e))?;

    let map = cfg.load_map()?;
    let world_cfg = std::sync::Arc::new(cfg.env.world.clone());
    let mut rngs = Streams::new(seed);
    let mut agent = DqnAgent::new(cfg.net_shape(), cfg.train.clone(), &mut rngs.init);
    let mut store = ReplayStore::create(&out.join("replay"), cfg.replay_config())?;
    let ckpt = out.join(CHECKPOINT_FILE);
    let log_path = out.join(LOG_FILE);
    let mut log = csv::Writer::from_path(&log_path).map_err(|e| Error::Config(format!("{}: {e}", log_path.display())))?;
    let mut header = vec!["env_step", "episode", "action", "steps", "meta_reward", "epsilon", "loss", "done", "cause"];
    header.extend(RewardBreakdown::COLUMNS);
    log.write_record(&header).map_err(csv_err)?;

    let scheme = &cfg.train_skip;
    let (mut env_steps, mut episodes, mut owed) = (0u64, 0u64, 0u64);
    let mut next_ckpt = cfg.checkpoint_every.max(1);
    while env_steps < cfg.env_steps {
        let world = loop {
            match sample_episode(map.clone(), world_cfg.clone(), rngs.episodes.next_u64(), cfg.n_npcs) {
                Ok(w) => break w,
                Err(Error::Placement { .. }) => continue,
                Err(e) => return Err(e),
            }
        };
        let mut env = TacticalEnv::new(cfg.env.clone(), world);
        let mut first = true;
        while !env.is_done() && env_steps < cfg.env_steps {
            let eps = epsilon(env_steps, &cfg.train);
            let obs = env.observation().to_vec();
            let allowed = composite_mask(&cfg.train_mask, scheme, env.world());
            let idx = select_action(&agent.online, &obs, eps, &allowed, &mut rngs.explore)?;
            let meta = scheme.decode(idx).expect("index within action space");
            let extra = if first && cfg.phase_extension {
                phase_extension(&mut rngs.explore, skip_factor(meta, scheme)?)
            } else {
                0
            };
            first = false;
            let o = meta_step(&mut env, meta, scheme, extra)?;
            env_steps += o.steps_consumed as u64;
            owed += o.steps_consumed as u64 * cfg.train.updates_per_env_step as u64;
            store.append(Transition {
                obs,
                action: idx as u8,
                reward: o.reward as f32,
                next_obs: o.obs.to_vec(),
                done: o.done,
            })?;
            let loss = pay_updates(&mut agent, &mut store, &mut owed, &mut rngs.replay)?;

            let parts: Vec<_> = o.inner.iter().map(|s| s.reward).collect();
            let mean = RewardBreakdown::mean(&parts);
            let mut row = vec![
                env_steps.to_string(),
                episodes.to_string(),
                meta.action.as_str().to_string(),
                o.steps_consumed.to_string(),
                format!("{:.6}", o.reward),
                format!("{eps:.6}"),
                loss.map(|l| format!("{l:.6e}")).unwrap_or_default(),
                (o.done as u8).to_string(),
                o.cause.map(|c| c.as_str().to_string()).unwrap_or_default(),
            ];
            row.extend(mean.values().iter().map(|v| format!("{v:.6}")));
            log.write_record(&row).map_err(csv_err)?;

            if env_steps >= next_ckpt {
                save_checkpoint(&ckpt, &agent)?;
                while next_ckpt <= env_steps {
                    next_ckpt += cfg.checkpoint_every.max(1);
                }
            }
        }
        episodes += 1;
    }
    pay_updates(&mut agent, &mut store, &mut owed, &mut rngs.replay)?;
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    save_checkpoint(&ckpt, &agent)?;

    let summary = TrainSummary {
        preset: cfg.preset.clone(),
        seed,
        env_steps,
        updates: agent.updates,
        episodes,
        transitions: store.appended(),
        final_epsilon: epsilon(env_steps, &cfg.train),
    };
    let path = out.join(SUMMARY_FILE);
    fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    Ok(TrainOutcome {
        agent,
        summary,
        checkpoint: ckpt,
    })
}

/// Performs every owed update the store can serve. Returns the mean loss
/// of the updates performed, if any. A non-finite loss aborts the run and
/// leaves the last checkpoint on disk untouched.
fn pay_updates(
    agent: &mut DqnAgent,
    store: &mut ReplayStore,
    owed: &mut u64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<f64>> {
    if !store.has_sealed() || *owed == 0 {
        return Ok(None);
    }
    let n = *owed;
    let mut total = 0.0;
    while *owed > 0 {
        let batch = store.sample_batch(agent.cfg.batch, rng)?;
        total += agent.update(&batch)?;
        *owed -= 1;
    }
    Ok(Some(total / n as f64))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("log write failed: {e}"))
}
