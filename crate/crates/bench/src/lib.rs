//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use tactix::agent::Transition;
use tactix::env::{EnvConfig, TacticalEnv};
use tactix::world::{desk_map, sample_episode, WorldConfig};

/// A desk-map environment with `n_npcs` vehicles.
pub fn desk_env(seed: u64, n_npcs: usize) -> TacticalEnv {
    let world = sample_episode(Arc::new(desk_map()), Arc::new(WorldConfig::default()), seed, n_npcs)
        .expect("desk map places the requested traffic");
    TacticalEnv::new(EnvConfig::default(), world)
}

/// A deterministic transition with a recognizable pattern.
pub fn transition(i: usize, obs_len: usize) -> Transition {
    let v = (i % 97) as f32 / 97.0;
    Transition {
        obs: vec![v; obs_len],
        action: (i % 3) as u8,
        reward: -v,
        next_obs: vec![1.0 - v; obs_len],
        done: i.is_multiple_of(50),
    }
}
