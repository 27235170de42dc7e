//! Test-only oracles and generators shared by the integration tests and the
//! acceptance suite.

#![allow(dead_code)]

use rand::Rng;
use stlmarl_core::qp::{CbfConstraint, QpProblem};

pub const A_LIMIT: f64 = 4.0;
pub const STEER_LIMIT: f64 = 0.5;

/// A random two-control shield-shaped QP: box `[-4,4]×[-0.5,0.5]`, 1 to 4
/// halfspaces, all strictly satisfied at a random anchor point so the
/// feasible set has interior.
pub fn random_qp<R: Rng>(rng: &mut R) -> QpProblem {
    let anchor = [
        rng.random_range(-3.5..3.5),
        rng.random_range(-0.4..0.4),
    ];
    let k = rng.random_range(1..=4);
    let constraints = (0..k)
        .map(|j| {
            let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let margin = rng.random_range(0.05..1.0);
            let b = margin - (a[0] * anchor[0] + a[1] * anchor[1]);
            CbfConstraint {
                a: a.to_vec(),
                b,
                label: format!("c{j}"),
            }
        })
        .collect();
    let nominal = vec![rng.random_range(-6.0..6.0), rng.random_range(-1.0..1.0)];
    QpProblem::new(
        nominal,
        vec![-A_LIMIT, -STEER_LIMIT],
        vec![A_LIMIT, STEER_LIMIT],
        constraints,
        4,
    )
    .unwrap()
}

fn feasible(p: &QpProblem, u: [f64; 2]) -> bool {
    (0..2).all(|j| u[j] >= p.lower[j] && u[j] <= p.upper[j])
        && p.constraints.iter().all(|c| c.a[0] * u[0] + c.a[1] * u[1] + c.b >= 0.0)
}

fn objective(p: &QpProblem, u: [f64; 2]) -> f64 {
    0.5 * ((u[0] - p.nominal[0]).powi(2) + (u[1] - p.nominal[1]).powi(2))
}

/// All rows of the problem as `(g, c)` with `g·u + c ≥ 0`.
fn rows(p: &QpProblem) -> Vec<([f64; 2], f64)> {
    let mut out: Vec<([f64; 2], f64)> = p.constraints.iter().map(|c| ([c.a[0], c.a[1]], c.b)).collect();
    for j in 0..2 {
        let mut g = [0.0; 2];
        g[j] = 1.0;
        out.push((g, -p.lower[j]));
        g[j] = -1.0;
        out.push((g, p.upper[j]));
    }
    out
}

fn feasible_tol(p: &QpProblem, u: [f64; 2], tol: f64) -> bool {
    rows(p).iter().all(|(g, c)| g[0] * u[0] + g[1] * u[1] + c >= -tol)
}

/// Minimum of the objective along one row's boundary line: a dense 1-D
/// grid locates the feasible segment, bisection sharpens its ends and a
/// golden-section search minimises the convex restriction.
fn scan_line(p: &QpProblem, g: [f64; 2], c: f64) -> Option<(f64, [f64; 2])> {
    let nn = g[0] * g[0] + g[1] * g[1];
    if nn == 0.0 {
        return None;
    }
    let p0 = [-c * g[0] / nn, -c * g[1] / nn];
    let norm = nn.sqrt();
    let d = [-g[1] / norm, g[0] / norm];
    let at = |t: f64| [p0[0] + t * d[0], p0[1] + t * d[1]];
    let tol = 1e-11;
    let ok = |t: f64| feasible_tol(p, at(t), tol);
    let span = p0[0].hypot(p0[1]) + 10.0;
    let n = 20_000;
    let ts: Vec<f64> = (0..=n).map(|k| -span + 2.0 * span * k as f64 / n as f64).collect();
    let first = ts.iter().position(|&t| ok(t))?;
    let last = ts.iter().rposition(|&t| ok(t))?;
    let sharpen = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if ok(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lo = if first > 0 { sharpen(ts[first], ts[first - 1]) } else { ts[first] };
    let hi = if last < n { sharpen(ts[last], ts[last + 1]) } else { ts[last] };
    let f = |t: f64| objective(p, at(t));
    let (mut a, mut b) = (lo, hi);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let t = 0.5 * (a + b);
    Some((f(t), at(t)))
}

/// Grid-search reference minimum: the nominal point when feasible, a dense
/// grid over the box, and a dense refined scan along every boundary line
/// (the minimiser of a projection onto a polygon lies on its boundary
/// whenever the nominal point is outside). `None` when nothing is feasible.
pub fn grid_oracle(p: &QpProblem) -> Option<(f64, [f64; 2])> {
    let mut best: Option<(f64, [f64; 2])> = None;
    let mut consider = |cand: Option<(f64, [f64; 2])>| {
        if let Some((f, u)) = cand {
            if best.is_none_or(|(b, _)| f < b) {
                best = Some((f, u));
            }
        }
    };
    let nominal = [p.nominal[0], p.nominal[1]];
    if feasible(p, nominal) {
        consider(Some((0.0, nominal)));
    }
    let n = 200;
    for i in 0..=n {
        for j in 0..=n {
            let u = [
                p.lower[0] + (p.upper[0] - p.lower[0]) * i as f64 / n as f64,
                p.lower[1] + (p.upper[1] - p.lower[1]) * j as f64 / n as f64,
            ];
            if feasible(p, u) {
                consider(Some((objective(p, u), u)));
            }
        }
    }
    for (g, c) in rows(p) {
        consider(scan_line(p, g, c));
    }
    best
}

/// `Σ_l (γλ)^l δ^{t+l}` summed term by term.
pub fn gae_series(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta: Vec<f64> = (0..n).map(|t| rewards[t] + gamma * next(t) - values[t]).collect();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            let mut w = 1.0;
            for d in &delta[t..] {
                acc += w * d;
                w *= gamma * lambda;
            }
            acc
        })
        .collect()
}

/// Central difference of `f` at `x` along coordinate `k`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += h;
    xm[k] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Relative error with a floor on the scale so near-zero gradients compare
/// absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}
