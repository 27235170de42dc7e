//! Quantitative (robustness) semantics over finite traces.
//!
//! Evaluation is bottom-up: every subformula is turned into a robustness
//! signal over all steps of the (sub-)trace, and temporal operators take
//! minima/maxima over clamped windows of their child signal. An entry that
//! cannot be evaluated (empty window, domain error) is kept as an error and
//! only surfaces if an enclosing operator actually needs it.

use crate::ast::{Comparator, Expr, Formula, Interval};
use crate::error::{Result, StlError};
use crate::trace::Trace;

type Signal = Vec<Result<f64>>;

/// Contiguous range of a trace with time rebased to its first step.
#[derive(Clone, Copy)]
struct View<'a> {
    trace: &'a Trace,
    start: usize,
    len: usize,
}

impl<'a> View<'a> {
    fn channel(&self, name: &str) -> Result<&'a [f64]> {
        self.trace
            .channel(name)
            .map(|s| &s[self.start..self.start + self.len])
            .ok_or_else(|| StlError::MissingChannel(name.to_string()))
    }
}

fn finite(t: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(StlError::Domain {
            t,
            message: "non-finite value".into(),
        })
    }
}

fn expr_at(expr: &Expr, view: &View<'_>, t: usize) -> Result<f64> {
    let value = match expr {
        Expr::Const(c) => *c,
        Expr::Channel(name) => view.channel(name)?[t],
        Expr::Add(a, b) => expr_at(a, view, t)? + expr_at(b, view, t)?,
        Expr::Sub(a, b) => expr_at(a, view, t)? - expr_at(b, view, t)?,
        Expr::Mul(a, b) => expr_at(a, view, t)? * expr_at(b, view, t)?,
        Expr::Div(a, b) => {
            let num = expr_at(a, view, t)?;
            let den = expr_at(b, view, t)?;
            if den == 0.0 {
                return Err(StlError::Domain {
                    t,
                    message: "division by zero".into(),
                });
            }
            num / den
        }
        Expr::Neg(a) => -expr_at(a, view, t)?,
        Expr::Abs(a) => expr_at(a, view, t)?.abs(),
        Expr::Sqrt(a) => {
            let x = expr_at(a, view, t)?;
            if x < 0.0 {
                return Err(StlError::Domain {
                    t,
                    message: format!("square root of negative value {x}"),
                });
            }
            x.sqrt()
        }
        Expr::Min(a, b) => expr_at(a, view, t)?.min(expr_at(b, view, t)?),
        Expr::Max(a, b) => expr_at(a, view, t)?.max(expr_at(b, view, t)?),
    };
    finite(t, value)
}

/// Value of `expr` at step `t` of `trace`.
pub fn eval_expr(expr: &Expr, trace: &Trace, t: usize) -> Result<f64> {
    if t >= trace.len() {
        return Err(StlError::IndexOutOfRange { t, len: trace.len() });
    }
    let view = View {
        trace,
        start: 0,
        len: trace.len(),
    };
    expr_at(expr, &view, t)
}

/// Clamped window `[t + lo, min(t + hi, n - 1)]`.
fn window(iv: Interval, t: usize, n: usize) -> Result<(usize, usize)> {
    let from = t + iv.lo();
    if from >= n {
        return Err(StlError::EmptyWindow { from, last: n - 1 });
    }
    Ok((from, (t + iv.hi()).min(n - 1)))
}

fn fold_window(
    signal: &Signal,
    from: usize,
    to: usize,
    pick: fn(f64, f64) -> f64,
) -> Result<f64> {
    let mut acc = signal[from].clone()?;
    for entry in &signal[from + 1..=to] {
        acc = pick(acc, entry.clone()?);
    }
    Ok(acc)
}

fn combine(a: &Signal, b: &Signal, pick: fn(f64, f64) -> f64) -> Signal {
    a.iter()
        .zip(b)
        .map(|(x, y)| Ok(pick(x.clone()?, y.clone()?)))
        .collect()
}

fn signal(formula: &Formula, view: &View<'_>) -> Result<Signal> {
    let n = view.len;
    Ok(match formula {
        Formula::Predicate {
            expr,
            cmp,
            threshold,
        } => {
            // Resolve channels eagerly so a missing channel is reported even
            // when every window is empty.
            for name in formula.channels() {
                view.channel(&name)?;
            }
            (0..n)
                .map(|t| {
                    let value = expr_at(expr, view, t)?;
                    match cmp {
                        Comparator::Ge => Ok(value - threshold),
                        Comparator::Le => Ok(threshold - value),
                    }
                })
                .collect()
        }
        Formula::Not(f) => signal(f, view)?
            .into_iter()
            .map(|r| r.map(|v| -v))
            .collect(),
        Formula::And(a, b) => combine(&signal(a, view)?, &signal(b, view)?, f64::min),
        Formula::Or(a, b) => combine(&signal(a, view)?, &signal(b, view)?, f64::max),
        Formula::Always(iv, f) => {
            let inner = signal(f, view)?;
            (0..n)
                .map(|t| {
                    let (from, to) = window(*iv, t, n)?;
                    fold_window(&inner, from, to, f64::min)
                })
                .collect()
        }
        Formula::Eventually(iv, f) => {
            let inner = signal(f, view)?;
            (0..n)
                .map(|t| {
                    let (from, to) = window(*iv, t, n)?;
                    fold_window(&inner, from, to, f64::max)
                })
                .collect()
        }
        Formula::Until(iv, lhs, rhs) => {
            let left = signal(lhs, view)?;
            let right = signal(rhs, view)?;
            (0..n)
                .map(|t| {
                    let (from, to) = window(*iv, t, n)?;
                    let mut prefix_min = f64::INFINITY;
                    let mut best = f64::NEG_INFINITY;
                    for s in t..=to {
                        prefix_min = prefix_min.min(left[s].clone()?);
                        if s >= from {
                            best = best.max(right[s].clone()?.min(prefix_min));
                        }
                    }
                    Ok(best)
                })
                .collect()
        }
    })
}

fn robustness_in(formula: &Formula, view: View<'_>, t: usize) -> Result<f64> {
    if t >= view.len {
        return Err(StlError::IndexOutOfRange { t, len: view.len });
    }
    let mut sig = signal(formula, &view)?;
    sig.swap_remove(t)
}

/// Robustness degree of `formula` on `trace` at step `t`.
pub fn robustness(formula: &Formula, trace: &Trace, t: usize) -> Result<f64> {
    let view = View {
        trace,
        start: 0,
        len: trace.len(),
    };
    robustness_in(formula, view, t)
}

/// Robustness at every step of the trace; entries whose windows are empty
/// (or hit a domain error) are errors.
pub fn robustness_signal(formula: &Formula, trace: &Trace) -> Result<Vec<Result<f64>>> {
    let view = View {
        trace,
        start: 0,
        len: trace.len(),
    };
    signal(formula, &view)
}

/// Boolean verdict derived from the robustness sign. A robustness of exactly
/// zero counts as satisfied.
pub fn satisfies(formula: &Formula, trace: &Trace, t: usize) -> Result<bool> {
    robustness(formula, trace, t).map(|rho| rho >= 0.0)
}

/// Robustness of `formula` over the partial trajectory
/// `window_start..window_start + window_len`, with time rebased so that the
/// window's first step is time zero and evaluated there.
///
/// Intervals reaching past the end of the window are clamped to it, so a
/// formula written with a horizon at least as long as the window is
/// evaluated exactly as if its horizon were the window length.
pub fn window_robustness(
    formula: &Formula,
    trace: &Trace,
    window_start: usize,
    window_len: usize,
) -> Result<f64> {
    if window_len == 0 {
        return Err(StlError::EmptyWindow {
            from: window_start,
            last: window_start,
        });
    }
    if window_start + window_len > trace.len() {
        return Err(StlError::Trace(format!(
            "window {window_start}..{} does not fit a trace of length {}",
            window_start + window_len,
            trace.len()
        )));
    }
    let view = View {
        trace,
        start: window_start,
        len: window_len,
    };
    robustness_in(formula, view, 0)
}
