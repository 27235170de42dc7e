//! Signal temporal logic over finite, discretely sampled traces.
//!
//! Formulas are written in a small text grammar (see [`parse_formula`]) and
//! evaluated either qualitatively ([`satisfies`], [`boolean::holds`]) or
//! quantitatively through the robustness degree ([`robustness`]). Temporal
//! intervals are integer step offsets; windows that run past the end of the
//! trace are clamped, and a window that becomes empty after clamping is an
//! error rather than a default value.

pub mod ast;
pub mod boolean;
mod error;
pub mod parser;
pub mod semantics;
pub mod trace;

pub use ast::{Comparator, Expr, Formula, Interval};
pub use error::{Result, StlError};
pub use parser::parse_formula;
pub use semantics::{eval_expr, robustness, robustness_signal, satisfies, window_robustness};
pub use trace::Trace;
