//! Property tests over the model's structural invariants.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tactix::env::{EnvConfig, TacticalEnv};
use tactix::mask::{allowed_actions, MaskRuleSet, MaskRules};
use tactix::replay::{ReplayConfig, ReplayStore};
use tactix::reward::{rcos, update_counters, LaneCounters};
use tactix::skip::{meta_step, SkipScheme};
use tactix::agent::Transition;
use tactix::world::{desk_map, sample_episode, LaneClass, WorldConfig};
use tactix::TacticalAction;

fn class() -> impl Strategy<Value = LaneClass> {
    prop_oneof![
        Just(LaneClass::Normal),
        Just(LaneClass::Biking),
        Just(LaneClass::Opposite),
        Just(LaneClass::DeadEnd),
    ]
}

proptest! {
    #[test]
    fn counters_track_consecutive_dangerous_steps(classes in prop::collection::vec(class(), 0..80), cap in 1u32..30) {
        let mut c = LaneCounters::new(cap);
        let (mut run_b, mut run_o) = (0u32, 0u32);
        for cl in classes {
            c = update_counters(c, cl);
            run_b = if cl == LaneClass::Biking { run_b + 1 } else { 0 };
            run_o = if cl == LaneClass::Opposite { run_o + 1 } else { 0 };
            prop_assert_eq!(c.biking, run_b.min(cap));
            prop_assert_eq!(c.opposite, run_o.min(cap));
            prop_assert!(c.biking == 0 || c.opposite == 0);
        }
    }

    #[test]
    fn rcos_is_a_bounded_even_window(phi in -10.0f64..10.0, beta in 0.01f64..1.0) {
        let v = rcos(phi, beta);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v - rcos(-phi, beta)).abs() < 1e-12);
    }

    #[test]
    fn masks_are_nested_and_keep_lane_survives(seed in any::<u64>(), n in 0usize..10, steps in 0usize..30, actions in prop::collection::vec(0usize..3, 30)) {
        let map = Arc::new(desk_map());
        let wc = Arc::new(WorldConfig::default());
        let Ok(w) = sample_episode(map, wc, seed, n) else { return Ok(()) };
        let mut env = TacticalEnv::new(EnvConfig::default(), w);
        for a in actions.iter().take(steps) {
            if env.is_done() { break; }
            env.step(TacticalAction::POLICY[*a]);
            let w = env.world();
            let a0 = allowed_actions(&MaskRuleSet::new(MaskRules::None), w);
            let a1 = allowed_actions(&MaskRuleSet::new(MaskRules::Rule1), w);
            let a2 = allowed_actions(&MaskRuleSet::new(MaskRules::Rule2), w);
            prop_assert!(a2.contains(&TacticalAction::KeepLane));
            prop_assert!(a2.iter().all(|x| a1.contains(x)));
            prop_assert!(a1.iter().all(|x| a0.contains(x)));
        }
    }

    #[test]
    fn meta_step_mean_conserves_inner_rewards(seed in any::<u64>(), picks in prop::collection::vec(0usize..6, 1..12), which in 0usize..4) {
        let map = Arc::new(desk_map());
        let wc = Arc::new(WorldConfig::default());
        let Ok(w) = sample_episode(map, wc, seed, 6) else { return Ok(()) };
        let scheme = [SkipScheme::none(), SkipScheme::repeat(3), SkipScheme::uniform(4), SkipScheme::dynamic(&[2, 5])][which].clone();
        let mut env = TacticalEnv::new(EnvConfig::default(), w);
        for p in picks {
            if env.is_done() { break; }
            let meta = scheme.decode(p % scheme.n_actions()).unwrap();
            let before = env.steps();
            let o = meta_step(&mut env, meta, &scheme, 0).unwrap();
            prop_assert_eq!(env.steps() - before, o.steps_consumed as u64);
            prop_assert_eq!(o.inner.len(), o.steps_consumed as usize);
            let sum: f64 = o.inner.iter().map(|s| s.reward.total).sum();
            prop_assert!((o.reward * o.steps_consumed as f64 - sum).abs() < 1e-9);
            // early stop only on termination
            let k = tactix::skip::skip_factor(meta, &scheme).unwrap() as usize;
            prop_assert!(o.inner.len() == k || o.done);
        }
    }

    #[test]
    fn replay_quota_and_cache_bound_hold(ops in prop::collection::vec(0u8..4, 1..3000), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ReplayConfig { capacity: 600, fragment_len: 20, cache_fragments: 4, max_samples_per_fragment: 6, obs_len: 2 };
        let mut store = ReplayStore::create(dir.path(), cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut i = 0f32;
        for op in ops {
            if op < 2 || !store.has_sealed() {
                i += 1.0;
                store.append(Transition { obs: vec![i, -i], action: 0, reward: i, next_obs: vec![i, i], done: false }).unwrap();
            } else {
                let b = store.sample_batch(4, &mut rng).unwrap();
                prop_assert_eq!(b.len(), 4);
            }
            let stats = store.cache_stats();
            prop_assert!(stats.len() <= 4);
            prop_assert!(stats.iter().all(|(_, n)| *n <= 6));
            prop_assert!(store.len() <= 600 + 20);
        }
    }
}
