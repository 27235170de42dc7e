//! Qualitative satisfaction, evaluated directly on truth values.
//!
//! This is an independent route to a verdict: it never computes robustness,
//! so agreement with the sign of [`crate::robustness`] is a meaningful check.

use crate::ast::{Comparator, Formula};
use crate::error::{Result, StlError};
use crate::semantics::eval_expr;
use crate::trace::Trace;

/// Whether `(trace, t)` satisfies `formula` under the Boolean semantics.
pub fn holds(formula: &Formula, trace: &Trace, t: usize) -> Result<bool> {
    let n = trace.len();
    if t >= n {
        return Err(StlError::IndexOutOfRange { t, len: n });
    }
    let span = |lo: usize, hi: usize| -> Result<std::ops::RangeInclusive<usize>> {
        if t + lo >= n {
            return Err(StlError::EmptyWindow { from: t + lo, last: n - 1 });
        }
        Ok(t + lo..=(t + hi).min(n - 1))
    };
    match formula {
        Formula::Predicate {
            expr,
            cmp,
            threshold,
        } => {
            let value = eval_expr(expr, trace, t)?;
            Ok(match cmp {
                Comparator::Ge => value >= *threshold,
                Comparator::Le => value <= *threshold,
            })
        }
        Formula::Not(f) => Ok(!holds(f, trace, t)?),
        Formula::And(a, b) => {
            let (x, y) = (holds(a, trace, t)?, holds(b, trace, t)?);
            Ok(x && y)
        }
        Formula::Or(a, b) => {
            let (x, y) = (holds(a, trace, t)?, holds(b, trace, t)?);
            Ok(x || y)
        }
        Formula::Always(iv, f) => {
            let mut all = true;
            for s in span(iv.lo(), iv.hi())? {
                all &= holds(f, trace, s)?;
            }
            Ok(all)
        }
        Formula::Eventually(iv, f) => {
            let mut any = false;
            for s in span(iv.lo(), iv.hi())? {
                any |= holds(f, trace, s)?;
            }
            Ok(any)
        }
        Formula::Until(iv, lhs, rhs) => {
            let window = span(iv.lo(), iv.hi())?;
            let mut prefix = true;
            let mut found = false;
            for s in t..=*window.end() {
                prefix &= holds(lhs, trace, s)?;
                if s >= *window.start() {
                    found |= prefix && holds(rhs, trace, s)?;
                }
            }
            Ok(found)
        }
    }
}
