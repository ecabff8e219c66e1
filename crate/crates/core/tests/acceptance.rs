//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Set `TACTIX_SKIP_TREND=1` to skip the long training-based criteria
//! (9 and 10) during local iteration; they are reported as SKIP.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tactix::agent::{
    double_q_target, epsilon, loss_and_grads, soft_sync, DqnAgent, NetShape, QParams, TrainConfig, Transition,
};
use tactix::env::{EnvConfig, TacticalEnv};
use tactix::geometry::Vec2;
use tactix::harness::{
    self, evaluate_worlds, preset_config, scenario, EvalOptions, GreedyPolicy, Metrics, RandomPolicy,
    RuleBasedPolicy, RunConfig,
};
use tactix::mask::{allowed_actions, MaskRuleSet, MaskRules};
use tactix::planner::{Maneuver, TacticalAction};
use tactix::replay::{decode_record, encode_record, ReplayConfig, ReplayStore};
use tactix::reward::{
    collision_risk, compose, dangerous_lane_risk, LaneCounters, RewardConfig, RewardVariant, RiskParams,
    StepSignals,
};
use tactix::skip::{meta_step, phase_extension, MetaAction, SkipScheme};
use tactix::world::{
    desk_map, sample_episode, set_pose, LaneClass, Npc, RoadMap, TerminationCause, VehicleState, WorldConfig,
    WorldState,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(start: Instant, limit_s: f64) -> (bool, String) {
    let t = start.elapsed().as_secs_f64();
    (t < limit_s, format!("{t:.1}s of {limit_s:.0}s"))
}

// ---------------------------------------------------------------- fuzzing

struct Fuzz {
    map: Arc<RoadMap>,
    bases: Vec<WorldState>,
}

impl Fuzz {
    fn new(n_bases: usize, rng: &mut ChaCha8Rng) -> Self {
        let map = Arc::new(desk_map());
        let wc = Arc::new(WorldConfig::default());
        let mut bases = Vec::new();
        while bases.len() < n_bases {
            let n = rng.random_range(0..12);
            let Ok(w) = sample_episode(map.clone(), wc.clone(), rng.random(), n) else {
                continue;
            };
            // let the traffic evolve a little so NPCs are not at spawn poses
            let mut env = TacticalEnv::new(EnvConfig::default(), w);
            for _ in 0..rng.random_range(0..6) {
                if env.is_done() {
                    break;
                }
                env.step(TacticalAction::KeepLane);
            }
            bases.push(env.world().clone());
        }
        Self { map, bases }
    }

    /// A base world with the ego teleported to a random pose in its corridor.
    fn world(&self, rng: &mut ChaCha8Rng) -> WorldState {
        let mut w = self.bases[rng.random_range(0..self.bases.len())].clone();
        let lanes = self.map.corridor_lanes(&w.route);
        let lane = lanes[rng.random_range(0..lanes.len())];
        let l = self.map.lane(lane);
        w.ego.lane_id = lane;
        w.ego.station = rng.random_range(0.0..l.length());
        w.ego.speed = rng.random_range(0.0..12.0);
        w.ego.lane_offset = rng.random_range(-0.49..0.49) * l.width;
        set_pose(&self.map, &mut w.ego, false);
        w.navigation_lane = self.map.navigation_lane(&w.route, lane);
        w
    }
}

// ------------------------------------------------------------ criterion 1

/// Reward written out directly from the term definitions and weights.
fn reward_oracle(
    w: &WorldState,
    risk: f64,
    alert: f64,
    term: Option<TerminationCause>,
    switch: bool,
    biking: u32,
    opposite: u32,
    variant: RewardVariant,
) -> f64 {
    let lane = w.map.lane(w.ego.lane_id);
    let counter = |x: u32| if x > 1 { 0.1 * x as f64 + 0.9 } else { 0.0 };
    let (rb, ro) = match variant {
        RewardVariant::ConstLane(c) => (
            if lane.class == LaneClass::Biking { c } else { 0.0 },
            if lane.class == LaneClass::Opposite { c } else { 0.0 },
        ),
        _ => (counter(biking), counter(opposite)),
    };
    let mut total = -1.0 * risk - 1.0 * alert - 0.2 * rb - 0.4 * ro + 0.1 * (w.ego.speed / lane.speed_limit)
        - 0.4 * if switch { 1.0 } else { 0.0 }
        - 0.1;
    if variant == RewardVariant::GlobalGoal {
        total += match term {
            Some(TerminationCause::Success) => 1.0,
            Some(_) => -1.0,
            None => 0.0,
        };
    }
    if variant == RewardVariant::LocalGoal {
        // geometric lateral distance to the navigation lane centerline
        let mut same_section = false;
        for side in [true, false] {
            let mut cur = Some(w.ego.lane_id);
            while let Some(c) = cur {
                if c == w.navigation_lane {
                    same_section = true;
                }
                let l = w.map.lane(c);
                cur = if side { l.left } else { l.right };
            }
        }
        if same_section {
            let nav = w.map.lane(w.navigation_lane);
            let (p, h) = nav.centerline.pose_at(w.ego.station);
            let lateral = (w.ego.position - p).dot(Vec2::from_angle(h).perp()).abs();
            total += -0.1 * lateral / lane.width;
        }
    }
    total
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let fuzz = Fuzz::new(200, &mut rng);
    let variants = [
        RewardVariant::Proposed,
        RewardVariant::GlobalGoal,
        RewardVariant::LocalGoal,
        RewardVariant::ConstLane(1.0),
        RewardVariant::ConstLane(0.1),
    ];
    let causes = [
        None,
        Some(TerminationCause::Success),
        Some(TerminationCause::CollisionRiskExceeded),
        Some(TerminationCause::StuckTimeout),
        Some(TerminationCause::UnpermittedIntersectionEntry),
    ];
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let w = fuzz.world(&mut rng);
        let variant = variants[rng.random_range(0..variants.len())];
        let cfg = RewardConfig {
            variant,
            ..RewardConfig::default()
        };
        let signals = StepSignals {
            collision_risk: rng.random_range(0.0..1.5),
            light_alert: if rng.random_bool(0.2) { 1.0 } else { 0.0 },
            termination: causes[rng.random_range(0..causes.len())],
        };
        let decision = TacticalAction::POLICY[rng.random_range(0..3)];
        let counters = LaneCounters {
            biking: rng.random_range(0..=20),
            opposite: rng.random_range(0..=20),
            cap: 20,
        };
        let got = compose(&w, &signals, decision, &counters, &cfg).total;
        let want = reward_oracle(
            &w,
            signals.collision_risk,
            signals.light_alert,
            signals.termination,
            decision.is_switch(),
            counters.biking,
            counters.opposite,
            variant,
        );
        worst = worst.max((got - want).abs());
    }
    let lane_ok = dangerous_lane_risk(1.0) == 0.0 && dangerous_lane_risk(2.0) == 1.1 && dangerous_lane_risk(5.0) == 1.4;
    let (fast, t) = within(start, 10.0);
    outcome(
        worst <= 1e-9 && lane_ok && fast,
        format!("max |compose - oracle| = {worst:.2e} over 1e4 states; R(1,2,5) exact: {lane_ok}; {t}"),
    )
}

// ------------------------------------------------------------ criterion 2

fn vehicle(x: f64, y: f64, heading: f64) -> VehicleState {
    VehicleState {
        position: Vec2::new(x, y),
        heading,
        speed: 0.0,
        lane_id: tactix::world::LaneId(0),
        station: 0.0,
        lane_offset: 0.0,
        length: 4.5,
        width: 1.8,
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = RiskParams::default();
    let ego = vehicle(0.0, 0.0, 0.0);
    let head_on = collision_risk(&ego, [&vehicle(p.d0, 0.0, PI)], &p);
    let side = collision_risk(&ego, [&vehicle(0.0, 3.5, 0.0)], &p);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let ego = vehicle(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-PI..PI));
        let targets: Vec<VehicleState> = (0..rng.random_range(1..6))
            .map(|_| {
                let d = rng.random_range(1.0..30.0);
                let a = rng.random_range(-PI..PI);
                vehicle(
                    ego.position.x + d * a.cos(),
                    ego.position.y + d * a.sin(),
                    // bias toward facing the ego so risks are non-trivial
                    a + PI + rng.random_range(-0.6..0.6),
                )
            })
            .collect();
        let base = collision_risk(&ego, &targets, &p);
        let rot = rng.random_range(-PI..PI);
        let shift = Vec2::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let moved = |v: &VehicleState| {
            let mut m = v.clone();
            m.position = v.position.rotate(rot) + shift;
            m.heading = v.heading + rot;
            m
        };
        let ego2 = moved(&ego);
        let targets2: Vec<VehicleState> = targets.iter().map(moved).collect();
        worst = worst.max((collision_risk(&ego2, &targets2, &p) - base).abs());
    }
    let (fast, t) = within(start, 5.0);
    let pass = (head_on - 1.0).abs() <= 1e-12 && side == 0.0 && worst <= 1e-9 && fast;
    outcome(
        pass,
        format!("head-on at d0 = {head_on:.15}; side-by-side = {side}; max invariance error {worst:.2e} over 1e3 scenes; {t}"),
    )
}

// ------------------------------------------------------------ criterion 3

fn random_batch(rng: &mut ChaCha8Rng, input: usize, actions: usize, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            obs: (0..input).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            action: rng.random_range(0..actions) as u8,
            reward: rng.random_range(-1.0f32..1.0),
            next_obs: (0..input).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            done: rng.random_bool(0.3),
        })
        .collect()
}

/// Max relative error between analytic and central-difference gradients.
fn gradient_error(seed: u64, hidden: usize, mean_subtract: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shape = NetShape::new(tactix::OBS_LEN, hidden, hidden, 3);
    shape.mean_subtract = mean_subtract;
    let online = QParams::init(shape, &mut rng);
    let target = QParams::init(shape, &mut rng);
    let batch = random_batch(&mut rng, shape.input, 3, 8);
    let (_, grads) = loss_and_grads(&online, &target, &batch, 0.9).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = online.clone();
    for i in 0..p.data.len() {
        let x = p.data[i];
        p.data[i] = x + h;
        let up = loss_and_grads(&p, &target, &batch, 0.9).unwrap().0;
        p.data[i] = x - h;
        let down = loss_and_grads(&p, &target, &batch, 0.9).unwrap().0;
        p.data[i] = x;
        let numeric = (up - down) / (2.0 * h);
        let denom = grads[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grads[i] - numeric).abs() / denom);
    }
    worst
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for seed in [1, 2, 3] {
        for hidden in [8, 16] {
            worst = worst.max(gradient_error(seed, hidden, seed == 3));
            cases += 1;
        }
    }
    let (fast, t) = within(start, 30.0);
    outcome(
        worst < 1e-4 && fast,
        format!("max relative error {worst:.2e} over {cases} cases (3 seeds x widths 8, 16); {t}"),
    )
}

// ------------------------------------------------------------ criterion 4

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut exact = true;
    for _ in 0..100 {
        let n = rng.random_range(2..7);
        let qo: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let qt: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let r = rng.random_range(-2.0..2.0);
        let done = rng.random_bool(0.3);
        let gamma = 0.9;
        let mut best = 0;
        for i in 1..n {
            if qo[i] > qo[best] {
                best = i;
            }
        }
        let want = if done { r } else { r + gamma * qt[best] };
        exact &= double_q_target(r, done, &qo, &qt, gamma) == want;
    }
    let shape = NetShape::new(6, 5, 4, 3);
    let online = QParams::init(shape, &mut rng);
    let mut target = QParams::init(shape, &mut rng);
    let dist = |a: &QParams, b: &QParams| a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let d0 = dist(&target, &online);
    let tau = 1e-3;
    let mut contraction_err: f64 = 0.0;
    for n in 1..=2000 {
        soft_sync(&mut target, &online, tau);
        if n % 250 == 0 {
            let expect = (1.0 - tau).powi(n) * d0;
            contraction_err = contraction_err.max((dist(&target, &online) - expect).abs());
        }
    }
    let c = TrainConfig::default();
    let eps_ok = epsilon(0, &c) == 0.2
        && (epsilon(15_000, &c) - 0.125).abs() < 1e-15
        && epsilon(30_000, &c) == 0.05
        && epsilon(80_000, &c) == 0.05;
    let (fast, t) = within(start, 5.0);
    outcome(
        exact && contraction_err <= 1e-9 && eps_ok && fast,
        format!(
            "double-Q exact on 100 cases: {exact}; contraction error {contraction_err:.2e}; eps(0, 15K, 30K) = ({}, {}, {}); {t}",
            epsilon(0, &c),
            epsilon(15_000, &c),
            epsilon(30_000, &c)
        ),
    )
}

// ------------------------------------------------------------ criterion 5

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let obs_len = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let tr = |rng: &mut ChaCha8Rng| Transition {
        obs: (0..obs_len).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect(),
        action: rng.random_range(0..6),
        reward: rng.random_range(-3.0f32..3.0),
        next_obs: (0..obs_len).map(|_| rng.random::<f32>() - 0.5).collect(),
        done: rng.random_bool(0.1),
    };

    // sealing at exactly 100 records
    let cfg = ReplayConfig {
        obs_len,
        ..ReplayConfig::default()
    };
    let mut s = ReplayStore::create(&dir.path().join("seal"), cfg).unwrap();
    let mut sealed_at = Vec::new();
    for i in 1..=250 {
        if s.append(tr(&mut rng)).unwrap() {
            sealed_at.push(i);
        }
    }
    let sealing_ok = sealed_at == vec![100, 200] && s.open_len() == 50;

    // fuzzed interleavings with a small store so eviction and swaps happen
    let cfg = ReplayConfig {
        capacity: 3000,
        fragment_len: 100,
        cache_fragments: 30,
        max_samples_per_fragment: 200,
        obs_len,
    };
    let mut s = ReplayStore::create(&dir.path().join("fuzz"), cfg.clone()).unwrap();
    let (mut max_cache, mut max_count, mut samples) = (0usize, 0u32, 0u64);
    let mut batch_ok = true;
    for _ in 0..100_000 {
        if !s.has_sealed() || rng.random_bool(0.35) {
            s.append(tr(&mut rng)).unwrap();
        } else {
            let n = rng.random_range(1..=8);
            batch_ok &= s.sample_batch(n, &mut rng).unwrap().len() == n;
            samples += 1;
        }
        let stats = s.cache_stats();
        max_cache = max_cache.max(stats.len());
        max_count = max_count.max(stats.iter().map(|x| x.1).max().unwrap_or(0));
        // 35% appends over 1e5 ops with capacity 3000 forces eviction
    }
    let files = fs::read_dir(dir.path().join("fuzz")).unwrap().count();
    let evicted = s.sealed_ids()[0] > 0 && files == s.sealed_ids().len() + 1;

    let mut bit_exact = true;
    for _ in 0..2000 {
        let t = tr(&mut rng);
        let mut buf = Vec::new();
        encode_record(&t, &mut buf);
        let back = decode_record(&buf, obs_len).unwrap();
        let mut again = Vec::new();
        encode_record(&back, &mut again);
        bit_exact &= buf == again && buf.len() == cfg.record_bytes();
    }
    let (fast, t) = within(start, 60.0);
    outcome(
        sealing_ok && max_cache <= 30 && max_count <= 200 && batch_ok && evicted && bit_exact && fast,
        format!(
            "sealed at {sealed_at:?}; max cached {max_cache} (<= 30); max live sample count {max_count} (quota 200) over {samples} batches; eviction ok: {evicted}; round-trip bit-exact: {bit_exact}; {t}"
        ),
    )
}

// ------------------------------------------------------------ criterion 6

fn schemes() -> Vec<SkipScheme> {
    vec![
        SkipScheme::none(),
        SkipScheme::repeat(4),
        SkipScheme::uniform(4),
        SkipScheme::non_uniform(2, 6),
        SkipScheme::dynamic(&[2, 6]),
    ]
}

/// Straight-road world with only the ego, on the right normal lane of the
/// first route.
fn lone_ego(map: &Arc<RoadMap>, wc: &Arc<WorldConfig>) -> WorldState {
    let route = map.routes[0].clone();
    let approach = map.lane(route.approach());
    let start = if approach.class == LaneClass::Normal && approach.right.is_some_and(|r| map.lane(r).class == LaneClass::Biking) {
        route.approach()
    } else {
        approach.right.expect("approach has a right neighbor")
    };
    let ego = VehicleState {
        position: Vec2::default(),
        heading: 0.0,
        speed: 5.0,
        lane_id: start,
        station: 10.0,
        lane_offset: 0.0,
        length: wc.vehicle_length,
        width: wc.vehicle_width,
    };
    WorldState::from_parts(map.clone(), wc.clone(), route, ego, Vec::<Npc>::new())
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let map = Arc::new(desk_map());
    let wc = Arc::new(WorldConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let all = schemes();
    let (mut worst_cons, mut worst_oracle): (f64, f64) = (0.0, 0.0);
    let mut episodes = 0;
    while episodes < 1000 {
        let Ok(w) = sample_episode(map.clone(), wc.clone(), rng.random(), rng.random_range(0..10)) else {
            continue;
        };
        episodes += 1;
        let scheme = &all[rng.random_range(0..all.len())];
        let mut env = TacticalEnv::new(EnvConfig::default(), w);
        let mut oracle = env.clone();
        let (mut meta_sum, mut inner_sum) = (0.0, 0.0);
        let mut first = true;
        for _ in 0..40 {
            if env.is_done() {
                break;
            }
            let meta = scheme.decode(rng.random_range(0..scheme.n_actions())).unwrap();
            let extra = if first { phase_extension(&mut rng, 4) } else { 0 };
            first = false;
            let out = meta_step(&mut env, meta, scheme, extra).unwrap();
            meta_sum += out.reward * out.steps_consumed as f64;
            // step-by-step oracle with the same inner decisions
            let mut rewards = Vec::new();
            for j in 0..out.steps_consumed {
                let a = if j == 0 || scheme.mode == tactix::skip::SkipMode::Repeat {
                    meta.action
                } else {
                    TacticalAction::NoOp
                };
                let o = oracle.step(a);
                rewards.push(o.reward.total);
                inner_sum += o.reward.total;
            }
            let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
            worst_oracle = worst_oracle.max((mean - out.reward).abs());
            if out.done != oracle.is_done() {
                worst_oracle = f64::INFINITY;
            }
        }
        worst_cons = worst_cons.max((meta_sum - inner_sum).abs());
    }

    // repeated switch after the lane boundary overshoots into the next lane
    let w = lone_ego(&map, &wc);
    let start_lane = w.ego.lane_id;
    let mid = map.lane(start_lane).left.unwrap();
    let far = map.lane(mid).left.unwrap();
    let left = MetaAction::plain(TacticalAction::SwitchLeft);
    let mut rep = TacticalEnv::new(EnvConfig::default(), w.clone());
    let r = meta_step(&mut rep, left, &SkipScheme::repeat(4), 0).unwrap();
    let crossed_in = r.inner.iter().position(|o| o.info.lane_after == mid);
    let repeat_post_cross_switches = r
        .inner
        .iter()
        .filter(|o| o.info.lane_before == mid && o.info.action == TacticalAction::SwitchLeft)
        .count();
    let repeat_overshoot = rep.plan().target == Some(far) && rep.plan().active_maneuver == Maneuver::ChangingLeft;
    let mut skip = TacticalEnv::new(EnvConfig::default(), w);
    let s = meta_step(&mut skip, left, &SkipScheme::uniform(4), 0).unwrap();
    let skip_post_cross_switches = s
        .inner
        .iter()
        .filter(|o| o.info.lane_before == mid && o.info.action.is_switch())
        .count();
    let skip_stays = skip.plan().target == Some(mid) && skip.world().ego.lane_id == mid;
    let fig1 = crossed_in == Some(2) && repeat_post_cross_switches == 1 && repeat_overshoot && skip_post_cross_switches == 0 && skip_stays;

    let mut counts = [0u32; 4];
    let mut prng = ChaCha8Rng::seed_from_u64(607);
    for _ in 0..10_000 {
        counts[phase_extension(&mut prng, 4) as usize] += 1;
    }
    let freqs = counts.map(|c| c as f64 / 10_000.0);
    let uniform = freqs.iter().all(|f| (f - 0.25).abs() <= 0.02);
    let (fast, t) = within(start, 30.0);
    outcome(
        worst_cons <= 1e-9 && worst_oracle <= 1e-9 && fig1 && uniform && fast,
        format!(
            "conservation error {worst_cons:.2e}, step-by-step oracle error {worst_oracle:.2e} over 1e3 episodes; boundary scenario: crossing in inner step {crossed_in:?}, repeat post-crossing switches {repeat_post_cross_switches} (overshoot {repeat_overshoot}), skip post-crossing switches {skip_post_cross_switches}; phase extension freqs {freqs:?}; {t}"
        ),
    )
}

// ------------------------------------------------------------ criterion 7

fn subset(a: &[TacticalAction], b: &[TacticalAction]) -> bool {
    a.iter().all(|x| b.contains(x))
}

fn rule2_entries(m: &Metrics) -> u64 {
    m.dangerous_entries
}

fn criterion_7(trained_rule2: &[(String, u64)]) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let fuzz = Fuzz::new(200, &mut rng);
    let none = MaskRuleSet::new(MaskRules::None);
    let r1 = MaskRuleSet::new(MaskRules::Rule1);
    let r2 = MaskRuleSet::new(MaskRules::Rule2);
    let mut ok = true;
    for _ in 0..10_000 {
        let w = fuzz.world(&mut rng);
        let a0 = allowed_actions(&none, &w);
        let a1 = allowed_actions(&r1, &w);
        let a2 = allowed_actions(&r2, &w);
        ok &= [&a0, &a1, &a2].iter().all(|a| a.contains(&TacticalAction::KeepLane));
        ok &= subset(&a2, &a1) && subset(&a1, &a0) && a0.len() == 3;
    }

    // rule-2 evaluation logs: random, rule-based and untrained policies
    let cfg = preset_config("12", RunConfig::desk()).unwrap();
    let suite = harness::suite_for(&cfg).unwrap();
    let map = cfg.load_map().unwrap();
    let worlds: Vec<WorldState> = (0..suite.episodes.len())
        .map(|i| suite.world(i, map.clone(), Arc::new(cfg.env.world.clone())).unwrap())
        .collect();
    let opts = EvalOptions {
        mask: r2,
        skip: SkipScheme::none(),
        record_actions: true,
    };
    let mut entries = Vec::new();
    let mut random = RandomPolicy {
        rng: ChaCha8Rng::seed_from_u64(1),
    };
    let rep = evaluate_worlds(&mut random, worlds.clone(), &cfg.env, &opts).unwrap();
    let logged = rep.actions.iter().filter(|a| a.entered_dangerous()).count() as u64;
    entries.push(("random".to_string(), rule2_entries(&rep.metrics) + logged));
    let rep = evaluate_worlds(&mut RuleBasedPolicy::default(), worlds.clone(), &cfg.env, &opts).unwrap();
    entries.push(("rule_based".to_string(), rule2_entries(&rep.metrics)));
    let mut untrained = GreedyPolicy {
        params: QParams::init(NetShape::new(tactix::OBS_LEN, 16, 16, 3), &mut rng),
    };
    let rep = evaluate_worlds(&mut untrained, worlds, &cfg.env, &opts).unwrap();
    entries.push(("untrained".to_string(), rule2_entries(&rep.metrics)));
    entries.extend(trained_rule2.iter().cloned());
    let zero = entries.iter().all(|(_, n)| *n == 0);
    let (fast, t) = within(start, 10.0);
    outcome(
        ok && zero && fast,
        format!("nonempty + ordering on 1e4 states: {ok}; rule2 dangerous entries per log: {entries:?}; {t}"),
    )
}

// ------------------------------------------------------------ criterion 8

const CHAIN: usize = 4;

/// States 0..3 plus an absorbing terminal; left at 0 pays 0.8, right at 3
/// pays 1.
fn chain_step(s: usize, a: usize) -> (usize, f64, bool) {
    match (s, a) {
        (0, 0) => (CHAIN, 0.8, true),
        (s, 0) => (s - 1, 0.0, false),
        (s, _) if s == CHAIN - 1 => (CHAIN, 1.0, true),
        (s, _) => (s + 1, 0.0, false),
    }
}

fn chain_obs(s: usize) -> Vec<f32> {
    let mut v = vec![0.0; CHAIN + 1];
    v[s] = 1.0;
    v
}

fn value_iteration(gamma: f64) -> Vec<[f64; 2]> {
    let mut q = vec![[0.0f64; 2]; CHAIN];
    for _ in 0..500 {
        let v: Vec<f64> = q.iter().map(|x| x[0].max(x[1])).collect();
        for (s, qs) in q.iter_mut().enumerate() {
            for (a, qa) in qs.iter_mut().enumerate() {
                let (n, r, done) = chain_step(s, a);
                *qa = r + if done { 0.0 } else { gamma * v[n] };
            }
        }
    }
    q
}

fn chain_run(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = TrainConfig {
        adam: tactix::agent::AdamConfig {
            lr: 1e-3,
            ..Default::default()
        },
        tau: 1e-2,
        eps_start: 1.0,
        eps_end: 0.1,
        eps_steps: 3000,
        ..TrainConfig::default()
    };
    let mut agent = DqnAgent::new(NetShape::new(CHAIN + 1, 16, 16, 2), cfg.clone(), &mut rng);
    let mut memory: Vec<Transition> = Vec::new();
    let (mut steps, mut s) = (0u64, rng.random_range(0..CHAIN));
    while agent.updates < 20_000 {
        let obs = chain_obs(s);
        let eps = epsilon(steps, &cfg);
        let a = tactix::agent::select_action(&agent.online, &obs, eps, &[true, true], &mut rng).unwrap();
        let (n, r, done) = chain_step(s, a);
        memory.push(Transition {
            obs,
            action: a as u8,
            reward: r as f32,
            next_obs: chain_obs(n),
            done,
        });
        steps += 1;
        s = if done { rng.random_range(0..CHAIN) } else { n };
        if memory.len() >= cfg.batch {
            for _ in 0..4 {
                let batch: Vec<Transition> =
                    (0..cfg.batch).map(|_| memory[rng.random_range(0..memory.len())].clone()).collect();
                agent.update(&batch).unwrap();
            }
        }
    }
    let q_star = value_iteration(cfg.gamma);
    (0..CHAIN).all(|s| {
        let best = if q_star[s][1] > q_star[s][0] { 1 } else { 0 };
        agent.greedy(&chain_obs(s), &[true, true]).unwrap() == best
    })
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let results: Vec<bool> = (1..=10).map(chain_run).collect();
    let optimal = results.iter().filter(|&&x| x).count();
    let q = value_iteration(0.9);
    let (fast, t) = within(start, 120.0);
    outcome(
        optimal >= 9 && fast,
        format!("optimal greedy policy in {optimal}/10 seeds after 20K updates (Q* = {q:.3?}); {t}"),
    )
}

// ------------------------------------------------------- criteria 9 and 10

struct Trend {
    /// preset -> seed -> suite metrics
    suite: BTreeMap<String, BTreeMap<u64, Metrics>>,
    /// preset -> seed -> slow-leader scenario metrics
    scenario: BTreeMap<String, BTreeMap<u64, Metrics>>,
    /// preset-10 checkpoints evaluated with rule-2 masking
    rule2: BTreeMap<u64, Metrics>,
    rule2_logged_entries: Vec<(String, u64)>,
    checkpoints: BTreeMap<(String, u64), PathBuf>,
    elapsed_s: f64,
}

const SEEDS: [u64; 3] = [1, 2, 3];

fn run_trend(root: &Path) -> Trend {
    let start = Instant::now();
    let base = RunConfig::desk();
    let suite = harness::suite_for(&base).unwrap();
    let map = base.load_map().unwrap();
    let scenario_worlds =
        scenario::slow_leader_worlds(map.clone(), Arc::new(base.env.world.clone()), &Default::default());
    let mut t = Trend {
        suite: BTreeMap::new(),
        scenario: BTreeMap::new(),
        rule2: BTreeMap::new(),
        rule2_logged_entries: Vec::new(),
        checkpoints: BTreeMap::new(),
        elapsed_s: 0.0,
    };
    for &seed in &SEEDS {
        let cfg = preset_config("01", base.clone()).unwrap();
        let m = harness::evaluate_seed(&cfg, None, seed, &suite, &root.join(format!("01/seed_{seed}"))).unwrap();
        t.suite.entry("01".into()).or_default().insert(seed, m);
    }
    for preset in ["03", "07", "08", "10"] {
        for &seed in &SEEDS {
            let cfg = preset_config(preset, base.clone()).unwrap();
            let dir = root.join(format!("{preset}/seed_{seed}"));
            let tick = Instant::now();
            let out = harness::train(&cfg, seed, &dir).unwrap();
            let m = harness::evaluate_seed(&cfg, Some(out.agent.online.clone()), seed, &suite, &dir).unwrap();
            eprintln!(
                "  trained preset {preset} seed {seed} in {:.0}s: success {:.3}, lon {:.2}, dangerous steps {}",
                tick.elapsed().as_secs_f64(),
                m.success_rate,
                m.lon_speed,
                m.dangerous_steps
            );
            t.suite.entry(preset.into()).or_default().insert(seed, m);
            t.checkpoints.insert((preset.into(), seed), out.checkpoint.clone());
            if preset != "03" {
                let mut policy = GreedyPolicy {
                    params: out.agent.online.clone(),
                };
                let opts = harness::eval_options(&cfg);
                let rep = evaluate_worlds(&mut policy, scenario_worlds.clone(), &cfg.env, &opts).unwrap();
                t.scenario.entry(preset.into()).or_default().insert(seed, rep.metrics);
            }
            if preset == "10" {
                let cfg12 = preset_config("12", base.clone()).unwrap();
                let m = harness::evaluate_seed(
                    &cfg12,
                    Some(out.agent.online.clone()),
                    seed,
                    &suite,
                    &root.join(format!("12/seed_{seed}")),
                )
                .unwrap();
                let logged = fs::read_to_string(root.join(format!("12/seed_{seed}/actions.jsonl")))
                    .unwrap()
                    .lines()
                    .map(|l| serde_json::from_str::<harness::ActionRecord>(l).unwrap())
                    .filter(|a| a.entered_dangerous())
                    .count() as u64;
                t.rule2_logged_entries.push((format!("preset 12 seed {seed}"), logged + m.dangerous_entries));
                t.rule2.insert(seed, m);
            }
        }
    }
    t.elapsed_s = start.elapsed().as_secs_f64();
    t
}

fn med(ms: &BTreeMap<u64, Metrics>, f: impl Fn(&Metrics) -> f64) -> f64 {
    harness::median(&ms.values().map(f).collect::<Vec<_>>())
}

fn per_seed(ms: &BTreeMap<u64, Metrics>, f: impl Fn(&Metrics) -> f64) -> String {
    let v: Vec<String> = ms.iter().map(|(s, m)| format!("s{s}={:.3}", f(m))).collect();
    v.join(" ")
}

fn criterion_9(t: &Trend) -> Outcome {
    let succ = |m: &Metrics| m.success_rate;
    let s01 = med(&t.suite["01"], succ);
    let s03 = med(&t.suite["03"], succ);
    let s10 = med(&t.suite["10"], succ);
    let s12 = med(&t.rule2, succ);
    let a = s10 >= 2.0 * s01;
    let b = s03 <= s10 - 0.1;
    let danger = |m: &Metrics| m.dangerous_steps as f64;
    let lon = |m: &Metrics| m.lon_speed;
    let d07 = med(&t.scenario["07"], danger);
    let d08 = med(&t.scenario["08"], danger);
    let d10 = med(&t.scenario["10"], danger);
    let l07 = med(&t.scenario["07"], lon);
    let l10 = med(&t.scenario["10"], lon);
    let c1 = d07 == 0.0 && l07 < l10;
    let c2 = d08 > 0.0 && d08 >= 3.0 * d10;
    let d = s12 >= s10 + 0.03;
    let fast = t.elapsed_s < 3600.0;
    let detail = format!(
        "(a) {}: uniform {s10:.3} vs 2 x random {s01:.3} [10: {} | 01: {}]; \
         (b) {}: no-skip {s03:.3} vs uniform {s10:.3} [03: {}]; \
         (c) {}: const1.0 scenario dangerous steps {d07} (need 0), lon {l07:.2} vs counter {l10:.2} [07 steps: {} lon: {} | 10 steps: {} lon: {}]; \
         const0.1 dangerous steps {d08} vs counter {d10} (need >= 3x and > 0) [08: {}]; \
         (d) {}: rule2 {s12:.3} vs none {s10:.3} [12: {}]; total {:.0}s of 3600s",
        pf(a),
        per_seed(&t.suite["10"], succ),
        per_seed(&t.suite["01"], succ),
        pf(b),
        per_seed(&t.suite["03"], succ),
        pf(c1 && c2),
        per_seed(&t.scenario["07"], danger),
        per_seed(&t.scenario["07"], lon),
        per_seed(&t.scenario["10"], danger),
        per_seed(&t.scenario["10"], lon),
        per_seed(&t.scenario["08"], danger),
        pf(d),
        per_seed(&t.rule2, succ),
        t.elapsed_s
    );
    outcome(a && b && c1 && c2 && d && fast, detail)
}

fn pf(x: bool) -> &'static str {
    if x {
        "pass"
    } else {
        "FAIL"
    }
}

fn criterion_10(t: &Trend, root: &Path) -> Outcome {
    let base = RunConfig::desk();
    let cfg = preset_config("10", base).unwrap();
    let suite = harness::suite_for(&cfg).unwrap();
    let dir = root.join("rerun/10/seed_1");
    let out = harness::train(&cfg, 1, &dir).unwrap();
    let m = harness::evaluate_seed(&cfg, Some(out.agent.online), 1, &suite, &dir).unwrap();
    let first = fs::read(&t.checkpoints[&("10".to_string(), 1)]).unwrap();
    let second = fs::read(&out.checkpoint).unwrap();
    let same_ckpt = first == second;
    let same_metrics = serde_json::to_string(&m).unwrap() == serde_json::to_string(&t.suite["10"][&1]).unwrap();
    let log_a = fs::read(root.join("10/seed_1/train_log.csv")).unwrap();
    let log_b = fs::read(dir.join("train_log.csv")).unwrap();
    outcome(
        same_ckpt && same_metrics && log_a == log_b,
        format!(
            "rerun of preset 10 seed 1: checkpoint identical {same_ckpt} ({} bytes), metrics identical {same_metrics}, training log identical {}",
            second.len(),
            log_a == log_b
        ),
    )
}

// ------------------------------------------------------------------- main

fn main() {
    let skip_trend = std::env::var("TACTIX_SKIP_TREND").is_ok_and(|v| v == "1");
    let mut results: BTreeMap<u32, Option<Outcome>> = BTreeMap::new();
    let run = |n: u32, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        eprintln!("criterion {n}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        o
    };
    results.insert(1, Some(run(1, &mut criterion_1)));
    results.insert(2, Some(run(2, &mut criterion_2)));
    results.insert(3, Some(run(3, &mut criterion_3)));
    results.insert(4, Some(run(4, &mut criterion_4)));
    results.insert(5, Some(run(5, &mut criterion_5)));
    results.insert(6, Some(run(6, &mut criterion_6)));
    results.insert(8, Some(run(8, &mut criterion_8)));
    let tmp = tempfile::tempdir().unwrap();
    let trend = if skip_trend {
        None
    } else {
        eprintln!("running the desk-scale trend suite (13 training runs)...");
        Some(run_trend(tmp.path()))
    };
    let trained_rule2 = trend.as_ref().map(|t| t.rule2_logged_entries.clone()).unwrap_or_default();
    results.insert(7, Some(run(7, &mut || criterion_7(&trained_rule2))));
    match &trend {
        Some(t) => {
            results.insert(9, Some(run(9, &mut || criterion_9(t))));
            results.insert(10, Some(run(10, &mut || criterion_10(t, tmp.path()))));
        }
        None => {
            results.insert(9, None);
            results.insert(10, None);
        }
    }

    println!();
    println!("acceptance summary");
    let mut failed = 0;
    for (n, o) in &results {
        match o {
            Some(o) => {
                if !o.pass {
                    failed += 1;
                }
                println!("criterion {n:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            }
            None => println!("criterion {n:>2}: SKIP | TACTIX_SKIP_TREND=1"),
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
