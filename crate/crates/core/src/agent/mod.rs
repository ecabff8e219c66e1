//! Dueling double-DQN learner.

pub mod adam;
pub mod checkpoint;
pub mod dqn;
pub mod network;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dqn::{
    double_q_target, epsilon, loss_and_grads, masked_argmax, select_action, select_from_q, soft_sync, DqnAgent,
    TrainConfig,
};
pub use network::{NetShape, QParams, Trace};

/// One stored experience. Observations and reward are kept in single
/// precision so the on-disk record round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    /// Index into the agent's action space (composite in dynamic mode).
    pub action: u8,
    pub reward: f32,
    pub next_obs: Vec<f32>,
    pub done: bool,
}
