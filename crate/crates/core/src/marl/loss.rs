//! Clipped surrogate objective and clipped value loss, with their
//! gradients with respect to the network outputs.

use stlmarl_nn::categorical;

use crate::error::{CoreError, Result};

/// One decision as seen by the actor update.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorSample {
    pub logits: Vec<f64>,
    pub action: usize,
    /// Behavior-policy log-probability of `action`.
    pub old_log_prob: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLoss {
    /// `mean(min(r·A, clip(r)·A)) + σ·mean(H)`, to be maximised.
    pub objective: f64,
    pub mean_entropy: f64,
    pub clip_fraction: f64,
    /// `∂objective/∂logits` per sample.
    pub grad_logits: Vec<Vec<f64>>,
}

pub fn actor_objective(samples: &[ActorSample], clip_eps: f64, entropy_coef: f64) -> Result<ActorLoss> {
    let m = samples.len().max(1) as f64;
    let mut surrogate = 0.0;
    let mut entropy = 0.0;
    let mut clipped = 0usize;
    let mut grads = Vec::with_capacity(samples.len());
    for s in samples {
        let logp = categorical::log_prob(&s.logits, s.action);
        let ratio = (logp - s.old_log_prob).exp();
        if !ratio.is_finite() {
            return Err(CoreError::NonFinite("importance ratio"));
        }
        let a = s.advantage;
        let unclipped = ratio * a;
        let clipped_term = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * a;
        let h = categorical::entropy(&s.logits);
        surrogate += unclipped.min(clipped_term);
        entropy += h;
        let mut g: Vec<f64> = categorical::entropy_grad(&s.logits)
            .into_iter()
            .map(|x| entropy_coef * x / m)
            .collect();
        if clipped_term < unclipped {
            clipped += 1;
        } else {
            let dlogp = categorical::log_prob_grad(&s.logits, s.action);
            for (gi, d) in g.iter_mut().zip(dlogp) {
                *gi += a * ratio * d / m;
            }
        }
        grads.push(g);
    }
    Ok(ActorLoss {
        objective: surrogate / m + entropy_coef * entropy / m,
        mean_entropy: entropy / m,
        clip_fraction: clipped as f64 / m,
        grad_logits: grads,
    })
}

/// `mean(max((V − R̂)², (V_old + clip(V − V_old, −ε, ε) − R̂)²))` and its
/// gradient with respect to each `V`.
pub fn critic_loss(values: &[f64], old_values: &[f64], returns: &[f64], clip_eps: f64) -> (f64, Vec<f64>) {
    assert!(values.len() == old_values.len() && values.len() == returns.len());
    let m = values.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(values.len());
    for ((&v, &v_old), &r) in values.iter().zip(old_values).zip(returns) {
        let unclipped = (v - r).powi(2);
        let delta = v - v_old;
        let v_clip = v_old + delta.clamp(-clip_eps, clip_eps);
        let clipped = (v_clip - r).powi(2);
        if unclipped >= clipped {
            loss += unclipped;
            grads.push(2.0 * (v - r) / m);
        } else {
            loss += clipped;
            let inside = delta.abs() < clip_eps;
            grads.push(if inside { 2.0 * (v_clip - r) / m } else { 0.0 });
        }
    }
    (loss / m, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_policy_gives_mean_advantage() {
        let samples: Vec<ActorSample> = [(0, 1.5), (1, -0.5)]
            .iter()
            .map(|&(a, adv)| {
                let logits = vec![0.3, -0.2];
                ActorSample {
                    old_log_prob: categorical::log_prob(&logits, a),
                    logits,
                    action: a,
                    advantage: adv,
                }
            })
            .collect();
        let out = actor_objective(&samples, 0.2, 0.0).unwrap();
        assert!((out.objective - 0.5).abs() < 1e-12);
        assert_eq!(out.clip_fraction, 0.0);
    }

    #[test]
    fn positive_advantage_above_clip_has_no_ratio_gradient() {
        let logits = vec![2.0, 0.0];
        let s = ActorSample {
            old_log_prob: categorical::log_prob(&logits, 0) - 0.5,
            logits,
            action: 0,
            advantage: 1.0,
        };
        let out = actor_objective(&[s], 0.2, 0.0).unwrap();
        assert_eq!(out.clip_fraction, 1.0);
        assert!(out.grad_logits[0].iter().all(|g| *g == 0.0));
        assert!((out.objective - 1.2).abs() < 1e-12);
    }

    #[test]
    fn stale_snapshot_is_an_error() {
        let s = ActorSample {
            logits: vec![0.0, 0.0],
            action: 0,
            old_log_prob: -1e6,
            advantage: 1.0,
        };
        assert!(matches!(actor_objective(&[s], 0.2, 0.0), Err(CoreError::NonFinite(_))));
    }

    #[test]
    fn value_loss_vanishes_at_target() {
        let (l, g) = critic_loss(&[1.0, -2.0], &[1.0, -2.0], &[1.0, -2.0], 0.2);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn value_within_clip_range_matches_unclipped() {
        let (l, _) = critic_loss(&[1.1], &[1.0], &[3.0], 0.2);
        assert!((l - 1.9f64.powi(2)).abs() < 1e-12);
    }
}
