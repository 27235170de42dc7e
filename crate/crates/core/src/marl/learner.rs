//! Per-agent actor/critic pair and its PPO update.

use rand::seq::SliceRandom;
use rand::Rng;
use stlmarl_nn::{AdamState, Gradients, NamedArray, NetSpec, SequenceNet};

use super::buffer::AgentChunk;
use super::gae::{compute_gae, normalize};
use super::loss::{actor_objective, critic_loss, ActorSample};
use super::TrainConfig;
use crate::error::{CoreError, Result};

/// Running mean and variance of value targets; the critic regresses onto
/// standardised targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValueNormalizer {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl ValueNormalizer {
    pub fn update(&mut self, xs: &[f64]) {
        for &x in xs {
            self.count += 1.0;
            let d = x - self.mean;
            self.mean += d / self.count;
            self.m2 += d * (x - self.mean);
        }
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count).sqrt().max(1e-4)
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std()
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        y * self.std() + self.mean
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_objective: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub minibatches: usize,
}

#[derive(Debug, Clone)]
pub struct AgentLearner {
    pub actor: SequenceNet,
    pub critic: SequenceNet,
    actor_opt: AdamState,
    critic_opt: AdamState,
    pub value_norm: Option<ValueNormalizer>,
}

fn negate(g: &mut Gradients) {
    g.scale(-1.0);
}

impl AgentLearner {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        state_dim: usize,
        n_actions: usize,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let actor = SequenceNet::new(
            NetSpec {
                inputs: obs_dim,
                width: cfg.hidden,
                outputs: n_actions,
                recurrent: cfg.recurrent,
                head_gain: 0.01,
            },
            rng,
        )?;
        let critic = SequenceNet::new(
            NetSpec {
                inputs: state_dim,
                width: cfg.hidden,
                outputs: 1,
                recurrent: cfg.recurrent,
                head_gain: 1.0,
            },
            rng,
        )?;
        let actor_opt = AdamState::for_params(&actor.params(), cfg.actor_lr);
        let critic_opt = AdamState::for_params(&critic.params(), cfg.critic_lr);
        Ok(Self {
            actor,
            critic,
            actor_opt,
            critic_opt,
            value_norm: cfg.value_normalization.then(ValueNormalizer::default),
        })
    }

    /// `(raw critic output, value in reward units, next critic state)`.
    pub fn value(&self, state: &[f64], h: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
        let (out, next) = self.critic.step(state, h)?;
        let raw = out[0];
        let v = self.value_norm.as_ref().map_or(raw, |n| n.denormalize(raw));
        Ok((raw, v, next))
    }

    /// Advantages and returns for each chunk, in reward units.
    pub fn advantages(chunks: &[AgentChunk], gamma: f64, lambda: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        chunks
            .iter()
            .map(|c| compute_gae(&c.rewards, &c.values, c.bootstrap, gamma, lambda))
            .unzip()
    }

    /// Several epochs of minibatch updates on one agent's windows.
    pub fn update<R: Rng + ?Sized>(&mut self, chunks: &[AgentChunk], cfg: &TrainConfig, rng: &mut R) -> Result<UpdateStats> {
        let (mut adv, returns) = Self::advantages(chunks, cfg.gamma, cfg.gae_lambda);
        if cfg.normalize_advantages {
            let mut flat: Vec<f64> = adv.iter().flatten().copied().collect();
            normalize(&mut flat);
            let mut it = flat.into_iter();
            for a in adv.iter_mut().flatten() {
                *a = it.next().expect("same length");
            }
        }
        let targets: Vec<Vec<f64>> = match &mut self.value_norm {
            Some(n) => {
                n.update(&returns.iter().flatten().copied().collect::<Vec<_>>());
                returns.iter().map(|r| r.iter().map(|&x| n.normalize(x)).collect()).collect()
            }
            None => returns,
        };
        let mut stats = UpdateStats::default();
        let mut order: Vec<usize> = (0..chunks.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            for mb in order.chunks(cfg.batch_size) {
                self.actor_step(chunks, &adv, mb, cfg, &mut stats)?;
                self.critic_step(chunks, &targets, mb, cfg, &mut stats)?;
                stats.minibatches += 1;
            }
        }
        let k = stats.minibatches.max(1) as f64;
        stats.actor_objective /= k;
        stats.critic_loss /= k;
        stats.entropy /= k;
        stats.clip_fraction /= k;
        stats.actor_grad_norm /= k;
        stats.critic_grad_norm /= k;
        Ok(stats)
    }

    fn actor_step(
        &mut self,
        chunks: &[AgentChunk],
        adv: &[Vec<f64>],
        mb: &[usize],
        cfg: &TrainConfig,
        stats: &mut UpdateStats,
    ) -> Result<()> {
        let mut caches = Vec::with_capacity(mb.len());
        let mut samples = Vec::new();
        for &k in mb {
            let c = &chunks[k];
            let cache = self.actor.forward(&c.observations, &c.actor_h0)?;
            for (t, logits) in cache.outputs.iter().enumerate() {
                samples.push(ActorSample {
                    logits: logits.clone(),
                    action: c.actions[t],
                    old_log_prob: c.log_probs[t],
                    advantage: adv[k][t],
                });
            }
            caches.push(cache);
        }
        let loss = actor_objective(&samples, cfg.clip_eps, cfg.entropy_coef)?;
        let mut grads = self.actor.zero_gradients();
        let mut offset = 0;
        for cache in &caches {
            let n = cache.outputs.len();
            let g = self.actor.backward(cache, &loss.grad_logits[offset..offset + n])?;
            grads.add(&g);
            offset += n;
        }
        negate(&mut grads);
        if !grads.is_finite() {
            return Err(CoreError::NonFinite("actor gradient"));
        }
        stats.actor_grad_norm += grads.clip_norm(cfg.max_grad_norm);
        self.actor_opt.step(self.actor.params_mut(), &grads);
        stats.actor_objective += loss.objective;
        stats.entropy += loss.mean_entropy;
        stats.clip_fraction += loss.clip_fraction;
        Ok(())
    }

    fn critic_step(
        &mut self,
        chunks: &[AgentChunk],
        targets: &[Vec<f64>],
        mb: &[usize],
        cfg: &TrainConfig,
        stats: &mut UpdateStats,
    ) -> Result<()> {
        let mut caches = Vec::with_capacity(mb.len());
        let (mut values, mut old, mut rets) = (Vec::new(), Vec::new(), Vec::new());
        for &k in mb {
            let c = &chunks[k];
            let cache = self.critic.forward(&c.states, &c.critic_h0)?;
            values.extend(cache.outputs.iter().map(|o| o[0]));
            old.extend_from_slice(&c.raw_values);
            rets.extend_from_slice(&targets[k]);
            caches.push(cache);
        }
        let (loss, dv) = critic_loss(&values, &old, &rets, cfg.clip_eps);
        let mut grads = self.critic.zero_gradients();
        let mut offset = 0;
        for cache in &caches {
            let n = cache.outputs.len();
            let d: Vec<Vec<f64>> = dv[offset..offset + n].iter().map(|&x| vec![x]).collect();
            grads.add(&self.critic.backward(cache, &d)?);
            offset += n;
        }
        if !grads.is_finite() {
            return Err(CoreError::NonFinite("critic gradient"));
        }
        stats.critic_grad_norm += grads.clip_norm(cfg.max_grad_norm);
        self.critic_opt.step(self.critic.params_mut(), &grads);
        stats.critic_loss += loss;
        Ok(())
    }

    pub fn to_named_arrays(&self, agent: usize) -> Vec<NamedArray> {
        let mut out = self.actor.to_named_arrays(&format!("agent{agent}.actor"));
        out.extend(self.critic.to_named_arrays(&format!("agent{agent}.critic")));
        if let Some(n) = &self.value_norm {
            out.push(NamedArray {
                name: format!("agent{agent}.value_norm"),
                shape: [1, 3],
                data: vec![n.count, n.mean, n.m2],
            });
        }
        out
    }

    pub fn load_named_arrays(&mut self, agent: usize, arrays: &[NamedArray]) -> Result<()> {
        self.actor.load_named_arrays(&format!("agent{agent}.actor"), arrays)?;
        self.critic.load_named_arrays(&format!("agent{agent}.critic"), arrays)?;
        if let Some(n) = &mut self.value_norm {
            let name = format!("agent{agent}.value_norm");
            let a = arrays
                .iter()
                .find(|a| a.name == name)
                .ok_or_else(|| CoreError::Config(format!("checkpoint lacks {name}")))?;
            if a.data.len() != 3 {
                return Err(CoreError::Config(format!("{name} must hold 3 numbers")));
            }
            *n = ValueNormalizer {
                count: a.data[0],
                mean: a.data[1],
                m2: a.data[2],
            };
        }
        Ok(())
    }
}
