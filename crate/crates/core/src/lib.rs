//! Environments, CBF-QP shield, MAPPO-style trainer and experiment harness
//! for STL-guided multi-agent reinforcement learning.

pub mod env;
pub mod error;
pub mod harness;
pub mod lane;
pub mod marl;
pub mod particle;
pub mod qp;
pub mod shield;

pub use env::{MultiAgentEnv, Transition};
pub use error::{CoreError, Result};
pub use lane::{LaneConfig, LaneEnv};
pub use particle::{ParticleConfig, ParticleEnv, ParticleTask};
pub use qp::{CbfConstraint, QpProblem, QpSolution};
pub use shield::{ShieldAudit, ShieldConfig};
