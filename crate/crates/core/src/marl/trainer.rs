//! Rollout collection, STL rewards and the training loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stlmarl_nn::{categorical, Checkpoint};
use stlmarl_stl::{window_robustness, Formula, Trace};

use super::buffer::{AgentChunk, RolloutBuffer};
use super::learner::{AgentLearner, UpdateStats};
use super::{RewardMode, TrainConfig};
use crate::env::MultiAgentEnv;
use crate::error::{CoreError, Result};
use crate::shield::ShieldAudit;

const STREAM_INIT: u64 = 0;
const STREAM_ENV: u64 = 1;
const STREAM_ACT: u64 = 2;
const STREAM_UPDATE: u64 = 3;
const STREAM_EVAL: u64 = 4;

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `Σⱼ cⱼ·ρ(φⱼ, ω, 0) + b` where `ω` is the current reward window of
/// `trace`: windows start every `window` steps and grow up to step `t`.
pub fn stl_reward(
    formulas: &[Formula],
    weights: &[f64],
    offset: f64,
    trace: &Trace,
    t: usize,
    window: usize,
) -> Result<f64> {
    let start = (t / window) * window;
    let mut r = offset;
    for (j, f) in formulas.iter().enumerate() {
        let c = weights.get(j).copied().unwrap_or(1.0);
        r += c * window_robustness(f, trace, start, t - start + 1)?;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentEpisodeMetrics {
    pub return_stl: f64,
    pub return_baseline: f64,
    pub collisions: usize,
    pub reached_dest: bool,
    pub shield_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub agents: Vec<AgentEpisodeMetrics>,
}

impl EpisodeMetrics {
    pub fn any_collision(&self) -> bool {
        self.agents.iter().any(|a| a.collisions > 0)
    }

    pub fn total_stl_return(&self) -> f64 {
        self.agents.iter().map(|a| a.return_stl).sum()
    }
}

/// Everything recorded about one episode, handed to the caller's observer.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: usize,
    pub trace: Trace,
    /// `stl_rewards[t][i]`, computed in both reward modes.
    pub stl_rewards: Vec<Vec<f64>>,
    /// Rewards the learner was trained on.
    pub rewards: Vec<Vec<f64>>,
    pub requested: Vec<Vec<usize>>,
    pub applied: Vec<Vec<usize>>,
    pub audit: Vec<Vec<ShieldAudit>>,
    pub metrics: EpisodeMetrics,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutput {
    pub metrics: Vec<EpisodeMetrics>,
    /// Per update, per agent.
    pub updates: Vec<Vec<UpdateStats>>,
}

struct Rollout<'a> {
    env: &'a mut dyn MultiAgentEnv,
    learners: &'a [AgentLearner],
    formulas: &'a [Vec<Formula>],
    cfg: &'a TrainConfig,
}

impl Rollout<'_> {
    /// Plays one episode. Sampling uses `act_rng`; `None` means greedy.
    fn run(
        &mut self,
        episode: usize,
        env_rng: &mut ChaCha8Rng,
        mut act_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(EpisodeLog, Vec<Vec<AgentChunk>>)> {
        let cfg = self.cfg;
        let n = self.env.n_agents();
        let horizon = cfg
            .max_steps
            .map_or(self.env.episode_length(), |m| m.min(self.env.episode_length()));
        let window = cfg.rollout_len;
        let mut obs = self.env.reset(env_rng)?;
        let mut h_actor: Vec<Vec<f64>> = self.learners.iter().map(|l| l.actor.initial_state()).collect();
        let mut h_critic: Vec<Vec<f64>> = self.learners.iter().map(|l| l.critic.initial_state()).collect();
        let mut trace = Trace::recording(self.env.channel_names(), 1.0)?;
        let mut chunks: Vec<Vec<AgentChunk>> = vec![Vec::new(); n];
        let mut metrics: Vec<AgentEpisodeMetrics> = (0..n)
            .map(|_| AgentEpisodeMetrics {
                return_stl: 0.0,
                return_baseline: 0.0,
                collisions: 0,
                reached_dest: false,
                shield_fallbacks: 0,
            })
            .collect();
        let mut log = EpisodeLog {
            episode,
            trace: trace.clone(),
            stl_rewards: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            requested: Vec::with_capacity(horizon),
            applied: Vec::with_capacity(horizon),
            audit: Vec::new(),
            metrics: EpisodeMetrics {
                episode,
                agents: Vec::new(),
            },
        };
        for t in 0..horizon {
            if t % window == 0 {
                for i in 0..n {
                    chunks[i].push(AgentChunk::new(h_actor[i].clone(), h_critic[i].clone(), episode, t));
                }
            }
            let state: Vec<f64> = obs.concat();
            let mut logits = Vec::with_capacity(n);
            let mut requested = Vec::with_capacity(n);
            let mut critic_out = Vec::with_capacity(n);
            for (i, l) in self.learners.iter().enumerate() {
                let (out, next) = l.actor.step(&obs[i], &h_actor[i])?;
                let a = match act_rng.as_deref_mut() {
                    Some(rng) => categorical::sample(&out, rng).0,
                    None => categorical::argmax(&out),
                };
                h_actor[i] = next;
                let (raw, v, next) = l.value(&state, &h_critic[i])?;
                h_critic[i] = next;
                logits.push(out);
                requested.push(a);
                critic_out.push((raw, v));
            }
            let tr = self.env.step(&requested)?;
            trace.push_row(&tr.channels)?;
            let mut stl_row = Vec::with_capacity(n);
            let mut reward_row = Vec::with_capacity(n);
            for i in 0..n {
                let r_stl = stl_reward(&self.formulas[i], &cfg.stl_weights, cfg.stl_offset, &trace, t, window)?;
                let r_base = tr.baseline_rewards[i];
                if !r_stl.is_finite() || !r_base.is_finite() {
                    return Err(CoreError::NonFinite("reward"));
                }
                let r = match cfg.reward_mode {
                    RewardMode::Stl => r_stl,
                    RewardMode::Baseline => r_base,
                };
                let m = &mut metrics[i];
                m.return_stl += r_stl;
                m.return_baseline += r_base;
                m.collisions += tr.agent_collisions[i];
                m.shield_fallbacks += usize::from(tr.shield_fallbacks[i]);
                m.reached_dest = tr.reached[i];
                let c = chunks[i].last_mut().expect("window opened above");
                c.observations.push(obs[i].clone());
                c.states.push(state.clone());
                c.actions.push(tr.applied[i]);
                c.log_probs.push(categorical::log_prob(&logits[i], tr.applied[i]));
                c.raw_values.push(critic_out[i].0);
                c.values.push(critic_out[i].1);
                c.rewards.push(r);
                stl_row.push(r_stl);
                reward_row.push(r);
            }
            let window_closes = (t + 1) % window == 0 && t + 1 < horizon;
            if window_closes {
                let next_state = tr.observations.concat();
                for (i, l) in self.learners.iter().enumerate() {
                    let (_, v, _) = l.value(&next_state, &h_critic[i])?;
                    chunks[i].last_mut().expect("open window").bootstrap = v;
                }
            }
            log.stl_rewards.push(stl_row);
            log.rewards.push(reward_row);
            log.requested.push(requested);
            log.applied.push(tr.applied);
            let audit = self.env.shield_audit();
            if !audit.is_empty() {
                log.audit.push(audit.to_vec());
            }
            obs = tr.observations;
        }
        log.trace = trace;
        log.metrics.agents = metrics;
        Ok((log, chunks))
    }
}

/// Owns the environment, the learners and the random streams of one run.
pub struct Trainer {
    cfg: TrainConfig,
    env: Box<dyn MultiAgentEnv>,
    learners: Vec<AgentLearner>,
    formulas: Vec<Vec<Formula>>,
    env_rng: ChaCha8Rng,
    act_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    episodes_done: usize,
    buffer: RolloutBuffer,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, mut env: Box<dyn MultiAgentEnv>) -> Result<Self> {
        cfg.validate()?;
        env.set_shield(cfg.shield)?;
        let n = env.n_agents();
        let mut init = stream(cfg.seed, STREAM_INIT);
        let learners = (0..n)
            .map(|_| AgentLearner::new(env.obs_dim(), n * env.obs_dim(), env.n_actions(), &cfg, &mut init))
            .collect::<Result<Vec<_>>>()?;
        let formulas = env.formulas();
        Ok(Self {
            env_rng: stream(cfg.seed, STREAM_ENV),
            act_rng: stream(cfg.seed, STREAM_ACT),
            update_rng: stream(cfg.seed, STREAM_UPDATE),
            cfg,
            env,
            learners,
            formulas,
            episodes_done: 0,
            buffer: RolloutBuffer::new(n),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn learners(&self) -> &[AgentLearner] {
        &self.learners
    }

    pub fn formulas(&self) -> &[Vec<Formula>] {
        &self.formulas
    }

    pub fn env(&self) -> &dyn MultiAgentEnv {
        self.env.as_ref()
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    /// Collects one stochastic episode into the buffer without updating.
    pub fn collect_episode(&mut self) -> Result<EpisodeLog> {
        let mut r = Rollout {
            env: self.env.as_mut(),
            learners: &self.learners,
            formulas: &self.formulas,
            cfg: &self.cfg,
        };
        let (log, chunks) = r.run(self.episodes_done, &mut self.env_rng, Some(&mut self.act_rng))?;
        for (i, c) in chunks.into_iter().enumerate() {
            self.buffer.chunks[i].extend(c);
        }
        self.episodes_done += 1;
        Ok(log)
    }

    pub fn buffer(&self) -> &RolloutBuffer {
        &self.buffer
    }

    /// Updates every agent on the buffered windows and clears the buffer.
    pub fn update(&mut self) -> Result<Vec<UpdateStats>> {
        let mut out = Vec::with_capacity(self.learners.len());
        for (i, l) in self.learners.iter_mut().enumerate() {
            out.push(l.update(&self.buffer.chunks[i], &self.cfg, &mut self.update_rng)?);
        }
        self.buffer.clear();
        Ok(out)
    }

    /// Runs the configured number of episodes (continuing from any that
    /// were already played), calling `observer` after each one.
    pub fn train(&mut self, observer: &mut dyn FnMut(&EpisodeLog) -> Result<()>) -> Result<TrainOutput> {
        let mut out = TrainOutput::default();
        while self.episodes_done < self.cfg.episodes {
            let log = self.collect_episode()?;
            observer(&log)?;
            log::debug!(
                "episode {} stl return {:.3}",
                log.episode,
                log.metrics.total_stl_return()
            );
            out.metrics.push(log.metrics);
            let last = self.episodes_done == self.cfg.episodes;
            if self.episodes_done % self.cfg.episodes_per_update == 0 || last {
                out.updates.push(self.update()?);
            }
        }
        Ok(out)
    }

    /// Greedy episodes on an independent environment stream.
    pub fn evaluate(
        &mut self,
        episodes: usize,
        observer: &mut dyn FnMut(&EpisodeLog) -> Result<()>,
    ) -> Result<Vec<EpisodeMetrics>> {
        let mut rng = stream(self.cfg.seed, STREAM_EVAL);
        let mut r = Rollout {
            env: self.env.as_mut(),
            learners: &self.learners,
            formulas: &self.formulas,
            cfg: &self.cfg,
        };
        let mut out = Vec::with_capacity(episodes);
        for e in 0..episodes {
            let (log, _) = r.run(e, &mut rng, None)?;
            observer(&log)?;
            out.push(log.metrics);
        }
        Ok(out)
    }

    pub fn checkpoint(&self, mut metadata: serde_json::Map<String, serde_json::Value>) -> Result<Checkpoint> {
        metadata.insert("train".into(), serde_json::to_value(&self.cfg)?);
        metadata.insert("episodes_done".into(), self.episodes_done.into());
        let arrays = self
            .learners
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.to_named_arrays(i))
            .collect();
        Ok(Checkpoint { metadata, arrays })
    }

    /// Restores network weights and the episode counter. Optimiser moments
    /// restart from zero.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        for (i, l) in self.learners.iter_mut().enumerate() {
            l.load_named_arrays(i, &ckpt.arrays)?;
        }
        if let Some(done) = ckpt.metadata.get("episodes_done").and_then(|v| v.as_u64()) {
            self.episodes_done = done as usize;
        }
        Ok(())
    }
}

/// Builds a trainer and runs it to completion.
pub fn train(
    cfg: TrainConfig,
    env: Box<dyn MultiAgentEnv>,
    observer: &mut dyn FnMut(&EpisodeLog) -> Result<()>,
) -> Result<(Trainer, TrainOutput)> {
    let mut trainer = Trainer::new(cfg, env)?;
    let out = trainer.train(observer)?;
    Ok((trainer, out))
}
