//! Generalized advantage estimation over one window.

/// Returns `(advantages, returns)` for one window, where `bootstrap` is the
/// value of the state following the window's last step (zero at episode end).
///
/// `δᵗ = rᵗ + γ·V(sᵗ⁺¹) − V(sᵗ)`, `Aᵗ = δᵗ + γλ·Aᵗ⁺¹`, `R̂ᵗ = Aᵗ + V(sᵗ)`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len(), "rewards and values must align");
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// In-place standardisation to zero mean and unit variance.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs {
        *x = (*x - mean) / std;
    }
}
