//! Tactical lane-level driving decisions with deep Q-learning.
//!
//! The crate bundles a seedable lane/intersection micro-world, a rule-based
//! planner, the reward model, meta-action wrappers (repetition and
//! skipping), inference-time action masks, a dueling double-DQN learner
//! with hand-written gradients, a disk-backed fragment replay store, and
//! the training/evaluation harness.

pub mod agent;
pub mod env;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mask;
pub mod observation;
pub mod planner;
pub mod replay;
pub mod reward;
pub mod skip;
pub mod world;

pub use error::{Error, Result};
pub use observation::{FeatureFrame, Observation, FRAME_LEN, OBS_LEN};
pub use planner::{PlanState, TacticalAction};
pub use world::{RoadMap, TerminationCause, WorldConfig, WorldState};
