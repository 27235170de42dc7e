//! Categorical distribution parameterised by logits.

use rand::Rng;

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

pub fn log_prob(logits: &[f64], action: usize) -> f64 {
    log_softmax(logits)[action]
}

pub fn entropy(logits: &[f64]) -> f64 {
    log_softmax(logits)
        .iter()
        .map(|lp| {
            let p = lp.exp();
            if p > 0.0 {
                -p * lp
            } else {
                0.0
            }
        })
        .sum()
}

/// Draws an action by inverse CDF; returns it with its log-probability.
pub fn sample<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let lp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = lp.len() - 1;
    for (i, l) in lp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            chosen = i;
            break;
        }
    }
    (chosen, lp[chosen])
}

pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = i;
        }
    }
    best
}

/// `∂ log p(action) / ∂ logits`
pub fn log_prob_grad(logits: &[f64], action: usize) -> Vec<f64> {
    let mut g: Vec<f64> = softmax(logits).into_iter().map(|p| -p).collect();
    g[action] += 1.0;
    g
}

/// `∂ H / ∂ logits`
pub fn entropy_grad(logits: &[f64]) -> Vec<f64> {
    let lp = log_softmax(logits);
    let h: f64 = lp.iter().map(|l| -l.exp() * l).sum();
    lp.iter().map(|l| -l.exp() * (l + h)).collect()
}
