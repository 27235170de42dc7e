//! Abstract syntax for numeric expressions and STL formulas.
//!
//! The [`std::fmt::Display`] implementations print text that
//! [`crate::parse_formula`] reads back into a structurally identical tree.

use std::fmt;

/// Real-valued expression over trace channels, evaluated pointwise in time.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Channel(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
    Sqrt(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn channel(name: impl Into<String>) -> Self {
        Expr::Channel(name.into())
    }

    /// Channel names referenced by the expression, in first-use order.
    pub fn channels(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Channel(name) => {
                if !out.iter().any(|n| n == name) {
                    out.push(name.clone());
                }
            }
            Expr::Neg(e) | Expr::Abs(e) | Expr::Sqrt(e) => e.channels(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => {
                a.channels(out);
                b.channels(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    /// `expr >= c`, robustness `expr - c`.
    Ge,
    /// `expr <= c`, robustness `c - expr`.
    Le,
}

/// Closed interval of integer step offsets `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    lo: usize,
    hi: usize,
}

impl Interval {
    pub fn new(lo: usize, hi: usize) -> Option<Self> {
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Predicate {
        expr: Expr,
        cmp: Comparator,
        threshold: f64,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Always(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn ge(expr: Expr, threshold: f64) -> Self {
        Formula::Predicate {
            expr,
            cmp: Comparator::Ge,
            threshold,
        }
    }

    pub fn le(expr: Expr, threshold: f64) -> Self {
        Formula::Predicate {
            expr,
            cmp: Comparator::Le,
            threshold,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn always(iv: Interval, f: Formula) -> Self {
        Formula::Always(iv, Box::new(f))
    }

    pub fn eventually(iv: Interval, f: Formula) -> Self {
        Formula::Eventually(iv, Box::new(f))
    }

    pub fn until(iv: Interval, a: Formula, b: Formula) -> Self {
        Formula::Until(iv, Box::new(a), Box::new(b))
    }

    /// Left-nested conjunction of a nonempty list.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        parts.into_iter().reduce(Formula::and)
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Predicate { .. } => 1,
            Formula::Not(f) | Formula::Always(_, f) | Formula::Eventually(_, f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// Channel names referenced anywhere in the formula.
    pub fn channels(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_channels(&mut out);
        out
    }

    fn collect_channels(&self, out: &mut Vec<String>) {
        match self {
            Formula::Predicate { expr, .. } => expr.channels(out),
            Formula::Not(f) | Formula::Always(_, f) | Formula::Eventually(_, f) => {
                f.collect_channels(out)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.collect_channels(out);
                b.collect_channels(out);
            }
        }
    }
}

fn fmt_number(value: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // `{}` on f64 is the shortest representation that parses back exactly.
    write!(f, "{value}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_number(*c, f),
            Expr::Channel(name) => f.write_str(name),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            // Parenthesised so that `-(2)` stays a negation of a constant
            // instead of folding into the literal `-2`.
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Predicate {
                expr,
                cmp,
                threshold,
            } => {
                let op = match cmp {
                    Comparator::Ge => ">=",
                    Comparator::Le => "<=",
                };
                write!(f, "{expr} {op} ")?;
                fmt_number(*threshold, f)
            }
            Formula::Not(a) => write!(f, "!({a})"),
            Formula::And(a, b) => write!(f, "({a}) & ({b})"),
            Formula::Or(a, b) => write!(f, "({a}) | ({b})"),
            Formula::Always(iv, a) => write!(f, "G{iv} ({a})"),
            Formula::Eventually(iv, a) => write!(f, "F{iv} ({a})"),
            Formula::Until(iv, a, b) => write!(f, "({a}) U{iv} ({b})"),
        }
    }
}
