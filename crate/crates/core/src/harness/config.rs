//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::MultiAgentEnv;
use crate::error::{CoreError, Result};
use crate::lane::{LaneConfig, LaneEnv};
use crate::marl::{RewardMode, TrainConfig};
use crate::particle::{ParticleConfig, ParticleEnv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum EnvConfig {
    Particle(ParticleConfig),
    Lane(LaneConfig),
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn MultiAgentEnv>> {
        Ok(match self {
            EnvConfig::Particle(c) => Box::new(ParticleEnv::new(c.clone())?),
            EnvConfig::Lane(c) => Box::new(LaneEnv::new(c.clone())?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EnvConfig::Particle(_) => "particle",
            EnvConfig::Lane(_) => "lane",
        }
    }

    pub fn default_train(&self) -> TrainConfig {
        match self {
            EnvConfig::Particle(_) => TrainConfig::particle(),
            EnvConfig::Lane(_) => TrainConfig::lane(),
        }
    }
}

/// One cell of the reward-mode × shield matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub reward_mode: RewardMode,
    #[serde(default)]
    pub shield: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    /// Write per-episode traces, rewards and shield audits of training.
    pub record_traces: bool,
    /// Trailing window of the smoothed curves.
    pub curve_window: usize,
    pub output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    kind: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    env: EnvSection,
    particle: Option<toml::Table>,
    lane: Option<toml::Table>,
    train: Option<toml::Table>,
    variants: Option<Vec<Variant>>,
    seeds: Option<Vec<u64>>,
    eval_episodes: Option<usize>,
    record_traces: Option<bool>,
    curve_window: Option<usize>,
    output_dir: Option<PathBuf>,
}

/// Overlays `user` keys onto the serialised defaults so that unknown keys
/// are still rejected by the strict deserialiser.
fn overlay<T: Serialize + for<'de> Deserialize<'de>>(defaults: &T, user: Option<toml::Table>, section: &str) -> Result<T> {
    let mut base = toml::Table::try_from(defaults)
        .map_err(|e| CoreError::Config(format!("[{section}] defaults: {e}")))?;
    for (k, v) in user.unwrap_or_default() {
        base.insert(k, v);
    }
    base.try_into()
        .map_err(|e: toml::de::Error| CoreError::Config(format!("[{section}] {}", e.message())))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let env = match raw.env.kind.as_str() {
            "particle" => {
                if raw.lane.is_some() {
                    return Err(CoreError::Config("[lane] given for a particle experiment".into()));
                }
                EnvConfig::Particle(overlay(&ParticleConfig::default(), raw.particle, "particle")?)
            }
            "lane" => {
                if raw.particle.is_some() {
                    return Err(CoreError::Config("[particle] given for a lane experiment".into()));
                }
                EnvConfig::Lane(overlay(&LaneConfig::default(), raw.lane, "lane")?)
            }
            other => {
                return Err(CoreError::Config(format!(
                    "unknown env kind `{other}` (expected `particle` or `lane`)"
                )))
            }
        };
        let train: TrainConfig = overlay(&env.default_train(), raw.train, "train")?;
        let variants = raw.variants.unwrap_or_else(|| {
            vec![Variant {
                name: "default".into(),
                reward_mode: train.reward_mode,
                shield: train.shield,
            }]
        });
        let cfg = Self {
            env,
            variants,
            seeds: raw.seeds.unwrap_or_else(|| vec![train.seed]),
            train,
            eval_episodes: raw.eval_episodes.unwrap_or(20),
            record_traces: raw.record_traces.unwrap_or(false),
            curve_window: raw.curve_window.unwrap_or(100),
            output_dir: raw.output_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        match &self.env {
            EnvConfig::Particle(c) => c.validate()?,
            EnvConfig::Lane(c) => c.validate()?,
        }
        if self.variants.is_empty() || self.seeds.is_empty() {
            return Err(CoreError::Config("need at least one variant and one seed".into()));
        }
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.variants.len() {
            return Err(CoreError::Config("variant names must be unique".into()));
        }
        if let Some(bad) = self.variants.iter().find(|v| {
            v.name.is_empty() || !v.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        }) {
            return Err(CoreError::Config(format!(
                "variant name `{}` must be nonempty and use only [A-Za-z0-9_-]",
                bad.name
            )));
        }
        if self.curve_window == 0 {
            return Err(CoreError::Config("curve_window must be at least 1".into()));
        }
        if matches!(self.env, EnvConfig::Particle(_)) && self.variants.iter().any(|v| v.shield) {
            return Err(CoreError::Config("the particle world has no safety shield".into()));
        }
        Ok(())
    }

    /// Training configuration of one run.
    pub fn run_config(&self, variant: &Variant, seed: u64) -> TrainConfig {
        TrainConfig {
            reward_mode: variant.reward_mode,
            shield: variant.shield,
            seed,
            ..self.train.clone()
        }
    }
}
