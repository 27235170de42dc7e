mod support;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stlmarl_core::marl::{
    actor_objective, compute_gae, critic_loss, ActorSample, RewardMode, TrainConfig, Trainer,
};
use stlmarl_core::{LaneConfig, LaneEnv, ParticleConfig, ParticleEnv, ParticleTask};
use stlmarl_nn::{categorical, NetSpec, SequenceNet};
use stlmarl_stl::robustness;
use support::{central_difference, gae_series, rel_err};

fn particle(n_agents: usize, task: ParticleTask) -> Box<ParticleEnv> {
    Box::new(
        ParticleEnv::new(ParticleConfig {
            n_agents,
            task,
            ..ParticleConfig::default()
        })
        .unwrap(),
    )
}

fn quick(episodes: usize) -> TrainConfig {
    TrainConfig {
        episodes,
        hidden: 16,
        episodes_per_update: 1,
        ..TrainConfig::particle()
    }
}

#[test]
fn gae_identities_are_exact() {
    let r = [1.0, -2.0, 0.5, 3.0];
    let v = [0.3, 0.1, -0.7, 2.0];
    let (boot, g) = (1.5, 0.9);
    let (adv0, ret0) = compute_gae(&r, &v, boot, g, 0.0);
    let next = [v[1], v[2], v[3], boot];
    for t in 0..4 {
        assert_eq!(adv0[t], r[t] + g * next[t] - v[t]);
        assert_eq!(ret0[t], adv0[t] + v[t]);
    }
    let (adv1, _) = compute_gae(&r, &v, boot, g, 1.0);
    let mut mc = boot;
    for t in (0..4).rev() {
        mc = r[t] + g * mc;
        assert!((adv1[t] - (mc - v[t])).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn gae_matches_the_explicit_sum(
        rewards in prop::collection::vec(-5.0f64..5.0, 1..40),
        seed in any::<u64>(),
        gamma in 0.0f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = rewards.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
        let boot = rng.random_range(-5.0..5.0);
        let (adv, ret) = compute_gae(&rewards, &values, boot, gamma, lambda);
        let brute = gae_series(&rewards, &values, boot, gamma, lambda);
        for t in 0..rewards.len() {
            prop_assert!((adv[t] - brute[t]).abs() <= 1e-12 * (1.0 + brute[t].abs()) * rewards.len() as f64);
            prop_assert!((ret[t] - (adv[t] + values[t])).abs() < 1e-12);
        }
    }
}

fn net(rng: &mut ChaCha8Rng, outputs: usize) -> SequenceNet {
    SequenceNet::new(
        NetSpec {
            inputs: 3,
            width: 5,
            outputs,
            recurrent: true,
            head_gain: 1.0,
        },
        rng,
    )
    .unwrap()
}

fn set_param(net: &mut SequenceNet, k: usize, value: f64) {
    let mut idx = k;
    for p in net.params_mut() {
        if idx < p.len() {
            p[idx] = value;
            return;
        }
        idx -= p.len();
    }
    panic!("parameter index out of range");
}

fn flat_params(net: &SequenceNet) -> Vec<f64> {
    net.params().concat()
}

#[test]
fn actor_gradient_through_the_network_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut actor = net(&mut rng, 4);
    let inputs: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let h0: Vec<f64> = (0..5).map(|_| rng.random_range(-0.5..0.5)).collect();
    let cache = actor.forward(&inputs, &h0).unwrap();
    // Old log-probs put half the ratios inside the clip band and half well outside.
    let spec: Vec<(usize, f64, f64)> = (0..6)
        .map(|t| {
            let a = rng.random_range(0..4);
            let lp = categorical::log_prob(&cache.outputs[t], a);
            let shift = if t % 2 == 0 { rng.random_range(-0.1..0.1) } else { 0.6 };
            let adv = if t % 3 == 0 { -1.3 } else { 0.8 };
            (a, lp - shift, adv)
        })
        .collect();
    let objective = |net: &SequenceNet| {
        let c = net.forward(&inputs, &h0).unwrap();
        let samples: Vec<ActorSample> = c
            .outputs
            .iter()
            .zip(&spec)
            .map(|(l, &(a, old, adv))| ActorSample {
                logits: l.clone(),
                action: a,
                old_log_prob: old,
                advantage: adv,
            })
            .collect();
        actor_objective(&samples, 0.2, 0.05).unwrap()
    };
    let loss = objective(&actor);
    let grads = actor.backward(&cache, &loss.grad_logits).unwrap();
    let analytic = grads.0.concat();
    let x0 = flat_params(&actor);
    for k in (0..x0.len()).step_by(3) {
        let mut f = |x: &[f64]| {
            set_param(&mut actor, k, x[k]);
            objective(&actor).objective
        };
        let numeric = central_difference(&mut f, &x0, k, 1e-6);
        set_param(&mut actor, k, x0[k]);
        assert!(rel_err(analytic[k], numeric) < 1e-5, "param {k}: {} vs {numeric}", analytic[k]);
    }
}

#[test]
fn critic_gradient_through_the_network_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut critic = net(&mut rng, 1);
    let inputs: Vec<Vec<f64>> = (0..7).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let h0 = critic.initial_state();
    let cache = critic.forward(&inputs, &h0).unwrap();
    let v: Vec<f64> = cache.outputs.iter().map(|o| o[0]).collect();
    // Mix of unclipped rows and rows whose value moved well past the band.
    let old: Vec<f64> = v.iter().enumerate().map(|(t, x)| if t % 2 == 0 { x - 0.05 } else { x - 0.7 }).collect();
    let returns: Vec<f64> = (0..7).map(|t| if t % 2 == 0 { 2.0 } else { -2.0 }).collect();
    let loss_of = |net: &SequenceNet| {
        let c = net.forward(&inputs, &h0).unwrap();
        let v: Vec<f64> = c.outputs.iter().map(|o| o[0]).collect();
        critic_loss(&v, &old, &returns, 0.2)
    };
    let (_, dv) = loss_of(&critic);
    let d: Vec<Vec<f64>> = dv.iter().map(|&x| vec![x]).collect();
    let analytic = critic.backward(&cache, &d).unwrap().0.concat();
    let x0 = flat_params(&critic);
    for k in 0..x0.len() {
        let mut f = |x: &[f64]| {
            set_param(&mut critic, k, x[k]);
            loss_of(&critic).0
        };
        let numeric = central_difference(&mut f, &x0, k, 1e-6);
        set_param(&mut critic, k, x0[k]);
        assert!(rel_err(analytic[k], numeric) < 1e-5, "param {k}: {} vs {numeric}", analytic[k]);
    }
}

#[test]
fn replayed_windows_reproduce_behaviour_log_probs() {
    let cfg = TrainConfig {
        rollout_len: 7,
        ..quick(1)
    };
    let mut t = Trainer::new(cfg, particle(3, ParticleTask::Coordination)).unwrap();
    t.collect_episode().unwrap();
    for (i, learner) in t.learners().iter().enumerate() {
        let chunks = &t.buffer().chunks[i];
        assert_eq!(chunks.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![7, 7, 7, 4]);
        assert!(chunks[0].bootstrap.is_finite());
        assert_eq!(chunks[3].bootstrap, 0.0);
        for c in chunks {
            let cache = learner.actor.forward(&c.observations, &c.actor_h0).unwrap();
            for (step, logits) in cache.outputs.iter().enumerate() {
                let lp = categorical::log_prob(logits, c.actions[step]);
                assert!((lp - c.log_probs[step]).abs() < 1e-12);
            }
            let cache = learner.critic.forward(&c.states, &c.critic_h0).unwrap();
            for (step, out) in cache.outputs.iter().enumerate() {
                assert!((out[0] - c.raw_values[step]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn stl_rewards_match_offline_recomputation() {
    for window in [1, 7, 25] {
        let cfg = TrainConfig {
            rollout_len: window,
            stl_offset: 0.5,
            stl_weights: vec![2.0, 1.0],
            ..quick(1)
        };
        let mut t = Trainer::new(cfg, particle(3, ParticleTask::Spread)).unwrap();
        let log = t.collect_episode().unwrap();
        for (step, row) in log.stl_rewards.iter().enumerate() {
            let start = step - step % window;
            let slice = log.trace.slice(start, step - start + 1).unwrap();
            for (i, &r) in row.iter().enumerate() {
                let mut expected = 0.5;
                for (j, f) in t.formulas()[i].iter().enumerate() {
                    let c = if j == 0 { 2.0 } else { 1.0 };
                    expected += c * robustness(f, &slice, 0).unwrap();
                }
                assert!((r - expected).abs() < 1e-12, "window {window} step {step} agent {i}");
                assert_eq!(log.rewards[step][i], r);
            }
        }
    }
}

#[test]
fn unit_window_reward_is_the_instantaneous_margin() {
    let cfg = TrainConfig {
        rollout_len: 1,
        ..quick(1)
    };
    let mut t = Trainer::new(cfg, particle(2, ParticleTask::Coordination)).unwrap();
    let log = t.collect_episode().unwrap();
    for step in 0..log.stl_rewards.len() {
        let row = log.trace.slice(step, 1).unwrap();
        for i in 0..2 {
            // Every temporal operator collapses to its first sample on a one-row trace.
            let mut expected = 0.0;
            for f in &t.formulas()[i] {
                expected += robustness(f, &row, 0).unwrap();
            }
            assert!((log.stl_rewards[step][i] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn baseline_mode_trains_on_environment_rewards() {
    let cfg = TrainConfig {
        reward_mode: RewardMode::Baseline,
        ..quick(1)
    };
    let mut t = Trainer::new(cfg, particle(3, ParticleTask::Coordination)).unwrap();
    let log = t.collect_episode().unwrap();
    let total: f64 = log.rewards.iter().map(|r| r[0]).sum();
    assert!((total - log.metrics.agents[0].return_baseline).abs() < 1e-9);
}

#[test]
fn training_is_deterministic_per_seed() {
    let run = |seed| {
        let cfg = TrainConfig { seed, ..quick(4) };
        let mut t = Trainer::new(cfg, particle(3, ParticleTask::Coordination)).unwrap();
        let out = t.train(&mut |_| Ok(())).unwrap();
        let weights = t.checkpoint(Default::default()).unwrap().arrays;
        (out.metrics, weights)
    };
    let (m1, w1) = run(3);
    let (m2, w2) = run(3);
    let (m3, _) = run(4);
    assert_eq!(m1, m2);
    assert_eq!(w1, w2);
    assert_ne!(m1, m3);
}

#[test]
fn single_agent_smoke() {
    let mut t = Trainer::new(quick(3), particle(1, ParticleTask::Spread)).unwrap();
    let out = t.train(&mut |_| Ok(())).unwrap();
    assert_eq!(out.metrics.len(), 3);
    assert_eq!(out.updates.len(), 3);
    assert!(out.metrics.iter().all(|m| m.total_stl_return().is_finite()));
}

#[test]
fn shielded_lane_training_smoke() {
    let cfg = TrainConfig {
        episodes: 2,
        hidden: 16,
        shield: true,
        ..TrainConfig::lane()
    };
    let mut t = Trainer::new(cfg, Box::new(LaneEnv::new(LaneConfig::default()).unwrap())).unwrap();
    let mut audits = 0;
    let out = t
        .train(&mut |log| {
            audits += log.audit.len();
            assert_eq!(log.requested.len(), log.applied.len());
            Ok(())
        })
        .unwrap();
    assert_eq!(out.metrics.len(), 2);
    assert!(audits > 0);
    let eval = t.evaluate(2, &mut |_| Ok(())).unwrap();
    assert_eq!(eval.len(), 2);
}

#[test]
fn shield_is_rejected_for_particle_worlds() {
    let cfg = TrainConfig { shield: true, ..quick(1) };
    assert!(Trainer::new(cfg, particle(3, ParticleTask::Spread)).is_err());
}

#[test]
fn checkpoint_roundtrip_restores_greedy_behaviour() {
    let mut a = Trainer::new(quick(2), particle(3, ParticleTask::Spread)).unwrap();
    a.train(&mut |_| Ok(())).unwrap();
    let ckpt = a.checkpoint(Default::default()).unwrap();
    let mut buf = Vec::new();
    ckpt.write(&mut buf).unwrap();
    let restored = stlmarl_nn::Checkpoint::read(buf.as_slice()).unwrap();
    let cfg = TrainConfig { seed: 0, ..quick(2) };
    let mut b = Trainer::new(TrainConfig { seed: 99, ..cfg.clone() }, particle(3, ParticleTask::Spread)).unwrap();
    b.load_checkpoint(&restored).unwrap();
    assert_eq!(b.episodes_done(), 2);
    // Evaluation streams differ by seed, so compare policies on one observation.
    let obs = vec![0.1; a.env().obs_dim()];
    for (la, lb) in a.learners().iter().zip(b.learners()) {
        let h = la.actor.initial_state();
        assert_eq!(la.actor.step(&obs, &h).unwrap(), lb.actor.step(&obs, &h).unwrap());
        assert_eq!(la.value_norm, lb.value_norm);
    }
}
