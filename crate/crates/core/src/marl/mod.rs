//! Centralised-training, decentralised-execution PPO with STL rewards.
//!
//! Each agent owns a recurrent actor over its local observation and a
//! recurrent critic over the concatenated observations of all agents.

mod buffer;
mod gae;
mod learner;
mod loss;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub use buffer::{AgentChunk, RolloutBuffer};
pub use gae::{compute_gae, normalize};
pub use learner::{AgentLearner, UpdateStats, ValueNormalizer};
pub use loss::{actor_objective, critic_loss, ActorLoss, ActorSample};
pub use trainer::{
    stl_reward, train, AgentEpisodeMetrics, EpisodeLog, EpisodeMetrics, TrainOutput, Trainer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Stl,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub entropy_coef: f64,
    /// Window length `L` for both the STL reward and the update chunks.
    pub rollout_len: usize,
    /// Minibatch size in windows.
    pub batch_size: usize,
    pub episodes: usize,
    /// Caps the environment's episode length when set.
    pub max_steps: Option<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub epochs: usize,
    pub episodes_per_update: usize,
    pub reward_mode: RewardMode,
    pub shield: bool,
    pub seed: u64,
    pub hidden: usize,
    pub recurrent: bool,
    pub normalize_advantages: bool,
    pub value_normalization: bool,
    pub max_grad_norm: f64,
    /// Weights `c_j` of the per-spec robustness terms; empty means all ones.
    pub stl_weights: Vec<f64>,
    /// Offset `b` added to the STL reward.
    pub stl_offset: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            entropy_coef: 0.01,
            rollout_len: 25,
            batch_size: 32,
            episodes: 100,
            max_steps: None,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            epochs: 4,
            episodes_per_update: 1,
            reward_mode: RewardMode::Stl,
            shield: false,
            seed: 0,
            hidden: 64,
            recurrent: true,
            normalize_advantages: true,
            value_normalization: true,
            max_grad_norm: 10.0,
            stl_weights: Vec::new(),
            stl_offset: 0.0,
        }
    }
}

impl TrainConfig {
    /// Defaults tuned for the particle world: one 25-step episode is a
    /// single window, so updates pool four episodes.
    pub fn particle() -> Self {
        Self {
            episodes_per_update: 4,
            ..Self::default()
        }
    }

    /// Defaults tuned for the lane world.
    pub fn lane() -> Self {
        Self {
            gamma: 0.99,
            rollout_len: 15,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if self.rollout_len == 0 || self.batch_size == 0 || self.epochs == 0 || self.episodes_per_update == 0 {
            return bad("rollout_len, batch_size, epochs and episodes_per_update must be at least 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.entropy_coef >= 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("entropy_coef must be >= 0 and max_grad_norm > 0");
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be at least 1");
        }
        if !self.stl_offset.is_finite() || self.stl_weights.iter().any(|w| !w.is_finite()) {
            return bad("STL reward weights and offset must be finite");
        }
        Ok(())
    }
}
