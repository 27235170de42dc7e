//! Analytic gradients against central finite differences.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stlmarl_nn::categorical;
use stlmarl_nn::{NetSpec, SequenceNet};

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

fn close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / scale <= REL_TOL
}

/// Scalar loss `Σ_t w_t · y_t` so that `∂L/∂y_t = w_t`.
fn loss(net: &SequenceNet, xs: &[Vec<f64>], h0: &[f64], w: &[Vec<f64>]) -> f64 {
    let cache = net.forward(xs, h0).unwrap();
    cache
        .outputs
        .iter()
        .zip(w)
        .map(|(y, wt)| y.iter().zip(wt).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

fn check_network(recurrent: bool, seed: u64, steps: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = NetSpec {
        inputs: 3,
        width: 5,
        outputs: 4,
        recurrent,
        head_gain: 1.0,
    };
    let mut net = SequenceNet::new(spec, &mut rng).unwrap();
    let xs: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let h0: Vec<f64> = (0..net.state_size())
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    let w: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let cache = net.forward(&xs, &h0).unwrap();
    let grads = net.backward(&cache, &w).unwrap();
    let n_arrays = grads.0.len();
    for k in 0..n_arrays {
        for i in 0..grads.0[k].len() {
            let orig = net.params()[k][i];
            net.params_mut()[k][i] = orig + H;
            let up = loss(&net, &xs, &h0, &w);
            net.params_mut()[k][i] = orig - H;
            let down = loss(&net, &xs, &h0, &w);
            net.params_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * H);
            assert!(
                close(grads.0[k][i], numeric),
                "array {} index {i}: analytic {} numeric {numeric}",
                net.param_names()[k],
                grads.0[k][i]
            );
        }
    }
}

#[test]
fn dense_trunk_gradients_match_finite_differences() {
    check_network(false, 11, 3);
}

#[test]
fn recurrent_bptt_gradients_match_finite_differences() {
    check_network(true, 12, 6);
}

#[test]
fn single_step_recurrent_gradients_match() {
    check_network(true, 13, 1);
}

fn random_logits(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-3.0..3.0)).collect()
}

#[test]
fn log_prob_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let z = random_logits(&mut rng, 5);
        let a = rng.random_range(0..5);
        let g = categorical::log_prob_grad(&z, a);
        for i in 0..5 {
            let (mut up, mut down) = (z.clone(), z.clone());
            up[i] += H;
            down[i] -= H;
            let numeric =
                (categorical::log_prob(&up, a) - categorical::log_prob(&down, a)) / (2.0 * H);
            assert!(close(g[i], numeric), "{} vs {numeric}", g[i]);
        }
    }
}

#[test]
fn entropy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let z = random_logits(&mut rng, 5);
        let g = categorical::entropy_grad(&z);
        for i in 0..5 {
            let (mut up, mut down) = (z.clone(), z.clone());
            up[i] += H;
            down[i] -= H;
            let numeric = (categorical::entropy(&up) - categorical::entropy(&down)) / (2.0 * H);
            assert!(close(g[i], numeric), "{} vs {numeric}", g[i]);
        }
    }
}

proptest! {
    #[test]
    fn probabilities_form_a_distribution(z in prop::collection::vec(-50.0f64..50.0, 1..8)) {
        let p = categorical::softmax(&z);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let h = categorical::entropy(&z);
        prop_assert!(h >= -1e-12 && h <= (z.len() as f64).ln() + 1e-12);
    }
}
