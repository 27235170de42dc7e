//! Test-only reference evaluator and random generators.
//!
//! The reference evaluator is a literal top-down transcription of the
//! quantitative semantics: it recomputes every subformula at every time
//! point it needs and shares no code with the library's evaluator.

#![allow(dead_code)]

use rand::Rng;
use stlmarl_stl::{Comparator, Expr, Formula, Interval, Trace};

pub const CHANNELS: [&str; 3] = ["x", "y", "z"];

/// `None` means "undefined" (empty window, domain error or missing channel).
pub fn oracle_expr(expr: &Expr, trace: &Trace, t: usize) -> Option<f64> {
    let v = match expr {
        Expr::Const(c) => *c,
        Expr::Channel(n) => *trace.channel(n)?.get(t)?,
        Expr::Add(a, b) => oracle_expr(a, trace, t)? + oracle_expr(b, trace, t)?,
        Expr::Sub(a, b) => oracle_expr(a, trace, t)? - oracle_expr(b, trace, t)?,
        Expr::Mul(a, b) => oracle_expr(a, trace, t)? * oracle_expr(b, trace, t)?,
        Expr::Div(a, b) => {
            let n = oracle_expr(a, trace, t)?;
            let d = oracle_expr(b, trace, t)?;
            if d == 0.0 {
                return None;
            }
            n / d
        }
        Expr::Neg(a) => -oracle_expr(a, trace, t)?,
        Expr::Abs(a) => oracle_expr(a, trace, t)?.abs(),
        Expr::Sqrt(a) => {
            let x = oracle_expr(a, trace, t)?;
            if x < 0.0 {
                return None;
            }
            x.sqrt()
        }
        Expr::Min(a, b) => oracle_expr(a, trace, t)?.min(oracle_expr(b, trace, t)?),
        Expr::Max(a, b) => oracle_expr(a, trace, t)?.max(oracle_expr(b, trace, t)?),
    };
    v.is_finite().then_some(v)
}

fn clamp(iv: &Interval, t: usize, n: usize) -> Option<(usize, usize)> {
    let lo = t + iv.lo();
    (lo < n).then(|| (lo, (t + iv.hi()).min(n - 1)))
}

pub fn oracle_robustness(f: &Formula, trace: &Trace, t: usize) -> Option<f64> {
    let n = trace.len();
    match f {
        Formula::Predicate { expr, cmp, threshold } => {
            let v = oracle_expr(expr, trace, t)?;
            Some(match cmp {
                Comparator::Ge => v - threshold,
                Comparator::Le => threshold - v,
            })
        }
        Formula::Not(a) => Some(-oracle_robustness(a, trace, t)?),
        Formula::And(a, b) => {
            Some(oracle_robustness(a, trace, t)?.min(oracle_robustness(b, trace, t)?))
        }
        Formula::Or(a, b) => {
            Some(oracle_robustness(a, trace, t)?.max(oracle_robustness(b, trace, t)?))
        }
        Formula::Always(iv, a) => {
            let (lo, hi) = clamp(iv, t, n)?;
            let mut best = f64::INFINITY;
            for s in lo..=hi {
                best = best.min(oracle_robustness(a, trace, s)?);
            }
            Some(best)
        }
        Formula::Eventually(iv, a) => {
            let (lo, hi) = clamp(iv, t, n)?;
            let mut best = f64::NEG_INFINITY;
            for s in lo..=hi {
                best = best.max(oracle_robustness(a, trace, s)?);
            }
            Some(best)
        }
        Formula::Until(iv, a, b) => {
            let (lo, hi) = clamp(iv, t, n)?;
            let mut sup = f64::NEG_INFINITY;
            for s in lo..=hi {
                let mut inf = f64::INFINITY;
                for r in t..=s {
                    inf = inf.min(oracle_robustness(a, trace, r)?);
                }
                sup = sup.max(oracle_robustness(b, trace, s)?.min(inf));
            }
            Some(sup)
        }
    }
}

pub fn random_expr<R: Rng>(rng: &mut R, depth: usize) -> Expr {
    let leaf = depth == 0 || rng.random_bool(0.4);
    if leaf {
        return if rng.random_bool(0.75) {
            Expr::channel(CHANNELS[rng.random_range(0..CHANNELS.len())])
        } else {
            Expr::Const((rng.random_range(-8..=8) as f64) * 0.5)
        };
    }
    let op = rng.random_range(0..10);
    let raw = rng.random_bool(0.5);
    let mut sub = || Box::new(random_expr(rng, depth - 1));
    match op {
        0 => Expr::Add(sub(), sub()),
        1 => Expr::Sub(sub(), sub()),
        2 => Expr::Mul(sub(), sub()),
        // Mostly safe denominators and radicands, occasionally raw ones.
        3 => {
            let num = sub();
            let den = sub();
            Expr::Div(num, Box::new(Expr::Add(Box::new(Expr::Abs(den)), Box::new(Expr::Const(1.0)))))
        }
        4 => Expr::Neg(sub()),
        5 => Expr::Abs(sub()),
        6 => Expr::Sqrt(Box::new(Expr::Abs(sub()))),
        7 => Expr::Min(sub(), sub()),
        8 => Expr::Max(sub(), sub()),
        _ => {
            if raw {
                Expr::Sqrt(sub())
            } else {
                Expr::Div(sub(), sub())
            }
        }
    }
}

fn random_interval<R: Rng>(rng: &mut R) -> Interval {
    let lo = rng.random_range(0..=3);
    let hi = lo + rng.random_range(0..=6);
    Interval::new(lo, hi).unwrap()
}

/// Random formula of depth at most `depth` using every operator.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize) -> Formula {
    if depth <= 1 || rng.random_bool(0.25) {
        let expr = random_expr(rng, 2);
        let threshold = (rng.random_range(-8..=8) as f64) * 0.5;
        return if rng.random_bool(0.5) {
            Formula::ge(expr, threshold)
        } else {
            Formula::le(expr, threshold)
        };
    }
    let d = depth - 1;
    match rng.random_range(0..7) {
        0 => Formula::not(random_formula(rng, d)),
        1 => Formula::and(random_formula(rng, d), random_formula(rng, d)),
        2 => Formula::or(random_formula(rng, d), random_formula(rng, d)),
        3 => Formula::always(random_interval(rng), random_formula(rng, d)),
        4 => Formula::eventually(random_interval(rng), random_formula(rng, d)),
        _ => {
            let iv = random_interval(rng);
            Formula::until(iv, random_formula(rng, d), random_formula(rng, d))
        }
    }
}

pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> Trace {
    let len = rng.random_range(1..=max_len);
    Trace::from_channels(
        CHANNELS.iter().map(|name| {
            let series = (0..len)
                .map(|_| (rng.random_range(-20..=20) as f64) * 0.25)
                .collect();
            (*name, series)
        }),
        1.0,
    )
    .unwrap()
}
