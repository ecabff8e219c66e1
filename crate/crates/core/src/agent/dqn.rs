//! Double-Q learning on the dueling network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::network::{NetShape, QParams};
use super::Transition;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub adam: AdamConfig,
    pub batch: usize,
    pub tau: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_steps: u64,
    pub updates_per_env_step: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            adam: AdamConfig::default(),
            batch: 8,
            tau: 1e-3,
            eps_start: 0.2,
            eps_end: 0.05,
            eps_steps: 30_000,
            updates_per_env_step: 8,
        }
    }
}

/// Linearly annealed exploration rate.
pub fn epsilon(step: u64, cfg: &TrainConfig) -> f64 {
    if step >= cfg.eps_steps {
        return cfg.eps_end;
    }
    let frac = step as f64 / cfg.eps_steps as f64;
    cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
}

/// Index of the largest allowed value; ties go to the lowest index.
///
/// # Panics
/// When nothing is allowed.
pub fn masked_argmax(q: &[f64], allowed: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in q.iter().zip(allowed).enumerate() {
        if ok && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best.expect("allowed set is empty")
}

/// Epsilon-greedy choice restricted to `allowed`.
pub fn select_action(params: &QParams, obs: &[f32], eps: f64, allowed: &[bool], rng: &mut impl Rng) -> Result<usize> {
    let q = params.q_values(obs)?;
    Ok(select_from_q(&q, eps, allowed, rng))
}

pub fn select_from_q(q: &[f64], eps: f64, allowed: &[bool], rng: &mut impl Rng) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        let choices: Vec<usize> = (0..q.len()).filter(|&i| allowed[i]).collect();
        assert!(!choices.is_empty(), "allowed set is empty");
        return choices[rng.random_range(0..choices.len())];
    }
    masked_argmax(q, allowed)
}

pub fn double_q_target(r: f64, done: bool, q_online_next: &[f64], q_target_next: &[f64], gamma: f64) -> f64 {
    if done {
        return r;
    }
    let all = vec![true; q_online_next.len()];
    r + gamma * q_target_next[masked_argmax(q_online_next, &all)]
}

/// Mean squared TD error over `batch` and its gradient with respect to the
/// online parameters. Targets are constants.
pub fn loss_and_grads(online: &QParams, target: &QParams, batch: &[Transition], gamma: f64) -> Result<(f64, Vec<f64>)> {
    let mut grads = vec![0.0; online.len()];
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for t in batch {
        let y = if t.done {
            t.reward as f64
        } else {
            let next = to_f64(&t.next_obs);
            let qo = online.forward(&next)?.q;
            let qt = target.forward(&next)?.q;
            double_q_target(t.reward as f64, false, &qo, &qt, gamma)
        };
        let trace = online.forward(&to_f64(&t.obs))?;
        let a = t.action as usize;
        if a >= trace.q.len() {
            return Err(Error::Shape {
                expected: trace.q.len(),
                got: a + 1,
            });
        }
        let err = trace.q[a] - y;
        loss += err * err / n;
        let mut dq = vec![0.0; trace.q.len()];
        dq[a] = 2.0 * err / n;
        online.backward(&trace, &dq, &mut grads);
    }
    Ok((loss, grads))
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// θ′ ← (1−τ)θ′ + τθ.
pub fn soft_sync(target: &mut QParams, online: &QParams, tau: f64) {
    for (t, &o) in target.data.iter_mut().zip(&online.data) {
        *t = (1.0 - tau) * *t + tau * o;
    }
}

/// Online and target networks with their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnAgent {
    pub online: QParams,
    pub target: QParams,
    pub adam: Adam,
    pub cfg: TrainConfig,
    pub updates: u64,
}

impl DqnAgent {
    pub fn new(shape: NetShape, cfg: TrainConfig, rng: &mut impl Rng) -> Self {
        let online = QParams::init(shape, rng);
        Self {
            target: online.clone(),
            adam: Adam::new(online.len()),
            online,
            cfg,
            updates: 0,
        }
    }

    /// One learner update: gradient step on the online net, then soft sync.
    pub fn update(&mut self, batch: &[Transition]) -> Result<f64> {
        let (loss, grads) = loss_and_grads(&self.online, &self.target, batch, self.cfg.gamma)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                loss,
                update: self.updates,
            });
        }
        self.adam.update(&mut self.online.data, &grads, &self.cfg.adam);
        soft_sync(&mut self.target, &self.online, self.cfg.tau);
        self.updates += 1;
        Ok(loss)
    }

    pub fn greedy(&self, obs: &[f32], allowed: &[bool]) -> Result<usize> {
        Ok(masked_argmax(&self.online.q_values(obs)?, allowed))
    }
}
