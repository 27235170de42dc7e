//! The interface the trainer drives. Both simulators implement it.

use rand_chacha::ChaCha8Rng;
use stlmarl_stl::Formula;

use crate::error::{CoreError, Result};
use crate::shield::ShieldAudit;

/// What one joint step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observations: Vec<Vec<f64>>,
    /// Actions actually executed (after shielding).
    pub applied: Vec<usize>,
    pub baseline_rewards: Vec<f64>,
    /// Collision events involving each agent during this step.
    pub agent_collisions: Vec<usize>,
    pub shield_fallbacks: Vec<bool>,
    /// Whether each agent has reached its destination so far this episode.
    pub reached: Vec<bool>,
    /// Trace row for the post-step state, ordered as `channel_names`.
    pub channels: Vec<f64>,
}

pub trait MultiAgentEnv {
    fn n_agents(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn episode_length(&self) -> usize;
    fn channel_names(&self) -> Vec<String>;
    /// Per agent, the STL specifications `φ_i1, φ_i2, ...`.
    fn formulas(&self) -> Vec<Vec<Formula>>;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>>;
    fn step(&mut self, requested: &[usize]) -> Result<Transition>;

    fn set_shield(&mut self, enabled: bool) -> Result<()> {
        if enabled {
            return Err(CoreError::Config(
                "this environment has no safety shield".into(),
            ));
        }
        Ok(())
    }

    /// Shield records of the last step, one per shielded agent.
    fn shield_audit(&self) -> &[ShieldAudit] {
        &[]
    }
}
