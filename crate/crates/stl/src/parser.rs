//! Recursive-descent parser for the formula language.
//!
//! ```text
//! formula := disj
//! disj    := conj { "|" conj }
//! conj    := unary { "&" unary }
//! unary   := "!" unary | "G[" int "," int "]" unary | "F[" int "," int "]" unary
//!          | atom [ "U[" int "," int "]" unary ]
//! atom    := "(" formula ")" | expr ("<=" | ">=") number
//! expr    := term { ("+" | "-") term }
//! term    := factor { ("*" | "/") factor }
//! factor  := number | ident | "-" factor | "(" expr ")"
//!          | "abs(" expr ")" | "sqrt(" expr ")"
//!          | "min(" expr "," expr ")" | "max(" expr "," expr ")"
//! ```
//!
//! Whitespace is insignificant. A `-` directly followed by a numeric literal
//! is read as a negative constant, and the threshold after a comparator may
//! carry a sign.

use crate::ast::{Comparator, Expr, Formula, Interval};
use crate::error::{Result, StlError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number { value: f64, integral: bool },
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Bang,
    Amp,
    Pipe,
    Ge,
    Le,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        let push = |tokens: &mut Vec<Token>, tok| {
            tokens.push(Token {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut integral = true;
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme: String = chars[begin..i].iter().collect();
            let value: f64 = lexeme.parse().map_err(|_| StlError::Syntax {
                line: start_line,
                column: start_col,
                message: format!("invalid number `{lexeme}`"),
            })?;
            column += i - begin;
            push(&mut tokens, Tok::Number { value, integral });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - begin;
            push(&mut tokens, Tok::Ident(chars[begin..i].iter().collect()));
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            ('>', Some('=')) => (Tok::Ge, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (',', _) => (Tok::Comma, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('&', Some('&')) | ('|', Some('|')) | ('=', Some('=')) | ('!', Some('=')) => {
                return Err(StlError::UnknownOperator {
                    line: start_line,
                    column: start_col,
                    op: format!("{c}{}", next.unwrap()),
                })
            }
            ('!', _) => (Tok::Bang, 1),
            ('&', _) => (Tok::Amp, 1),
            ('|', _) => (Tok::Pipe, 1),
            ('<' | '>' | '=' | '~' | '^' | '%', _) => {
                return Err(StlError::UnknownOperator {
                    line: start_line,
                    column: start_col,
                    op: c.to_string(),
                })
            }
            _ => {
                return Err(StlError::Syntax {
                    line: start_line,
                    column: start_col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        i += width;
        column += width;
        push(&mut tokens, tok);
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(tokens)
}

/// Parses a formula from its text form.
pub fn parse_formula(text: &str) -> Result<Formula> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let formula = parser.formula()?;
    parser.expect(&Tok::Eof, "end of input")?;
    Ok(formula)
}

/// Parses a standalone numeric expression.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    parser.expect(&Tok::Eof, "end of input")?;
    Ok(expr)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const FUNCTIONS: [&str; 4] = ["abs", "sqrt", "min", "max"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, column) = self.here();
        Err(StlError::Syntax {
            line,
            column,
            message: message.into(),
        })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Number { value, .. } => format!("number {value}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
            other => format!("{other:?}"),
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        if self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.syntax(format!("expected {what}, found {}", Self::describe(self.peek())))
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let mut lhs = self.conj()?;
        while *self.peek() == Tok::Pipe {
            self.advance();
            let rhs = self.conj()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.advance();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    /// `G`, `F` or `U` immediately followed by `[`.
    fn temporal_keyword(&self) -> Option<char> {
        match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(name), Tok::LBracket) => match name.as_str() {
                "G" => Some('G'),
                "F" => Some('F'),
                "U" => Some('U'),
                _ => None,
            },
            _ => None,
        }
    }

    fn unary(&mut self) -> Result<Formula> {
        if *self.peek() == Tok::Bang {
            self.advance();
            return Ok(Formula::not(self.unary()?));
        }
        match self.temporal_keyword() {
            Some('G') => {
                self.advance();
                let iv = self.interval()?;
                return Ok(Formula::always(iv, self.unary()?));
            }
            Some('F') => {
                self.advance();
                let iv = self.interval()?;
                return Ok(Formula::eventually(iv, self.unary()?));
            }
            Some(_) => return self.syntax("`U` needs a left operand"),
            None => {}
        }
        if let (Tok::Ident(name), Tok::LBracket) = (self.peek(), self.peek_at(1)) {
            let (line, column) = self.here();
            return Err(StlError::UnknownOperator {
                line,
                column,
                op: name.clone(),
            });
        }
        let lhs = self.atom()?;
        if self.temporal_keyword() == Some('U') {
            self.advance();
            let iv = self.interval()?;
            let rhs = self.unary()?;
            return Ok(Formula::until(iv, lhs, rhs));
        }
        Ok(lhs)
    }

    fn interval(&mut self) -> Result<Interval> {
        let (line, column) = self.here();
        self.expect(&Tok::LBracket, "`[`")?;
        let lo = self.bound()?;
        self.expect(&Tok::Comma, "`,` in interval")?;
        let hi = self.bound()?;
        self.expect(&Tok::RBracket, "`]`")?;
        Interval::new(lo, hi).ok_or_else(|| StlError::Interval {
            line,
            column,
            message: format!("lower bound {lo} exceeds upper bound {hi}"),
        })
    }

    fn bound(&mut self) -> Result<usize> {
        let (line, column) = self.here();
        match self.peek().clone() {
            Tok::Minus => Err(StlError::Interval {
                line,
                column,
                message: "interval bounds must be nonnegative".into(),
            }),
            Tok::Number { value, integral } => {
                if !integral || value > u32::MAX as f64 {
                    return Err(StlError::Interval {
                        line,
                        column,
                        message: format!("interval bound {value} is not a step count"),
                    });
                }
                self.advance();
                Ok(value as usize)
            }
            other => self.syntax(format!(
                "expected interval bound, found {}",
                Self::describe(&other)
            )),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        if *self.peek() == Tok::LParen {
            let start = self.pos;
            self.advance();
            let grouped = self.formula().and_then(|f| {
                self.expect(&Tok::RParen, "`)`")?;
                Ok(f)
            });
            match grouped {
                Ok(f) => return Ok(f),
                Err(first) => {
                    let reached = self.pos;
                    self.pos = start;
                    // Not a parenthesised formula: retry as a predicate whose
                    // expression starts with a parenthesised term. Report
                    // whichever attempt got further.
                    return match self.predicate() {
                        Ok(f) => Ok(f),
                        Err(second) if self.pos >= reached => Err(second),
                        Err(_) => Err(first),
                    };
                }
            }
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Formula> {
        let expr = self.expr()?;
        let cmp = match self.peek() {
            Tok::Ge => Comparator::Ge,
            Tok::Le => Comparator::Le,
            other => {
                return self.syntax(format!(
                    "expected `>=` or `<=`, found {}",
                    Self::describe(other)
                ))
            }
        };
        self.advance();
        let threshold = self.signed_number()?;
        Ok(Formula::Predicate {
            expr,
            cmp,
            threshold,
        })
    }

    fn signed_number(&mut self) -> Result<f64> {
        let negative = if *self.peek() == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Number { value, .. } => {
                self.advance();
                Ok(if negative { -value } else { value })
            }
            other => self.syntax(format!("expected number, found {}", Self::describe(&other))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.advance();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.advance();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.advance();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.advance();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Number { value, .. } => {
                self.advance();
                Ok(Expr::Const(value))
            }
            Tok::Minus => {
                self.advance();
                if let Tok::Number { value, .. } = *self.peek() {
                    self.advance();
                    return Ok(Expr::Const(-value));
                }
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek_at(1) == Tok::LParen {
                    if !FUNCTIONS.contains(&name.as_str()) {
                        let (line, column) = self.here();
                        return Err(StlError::UnknownOperator {
                            line,
                            column,
                            op: name,
                        });
                    }
                    self.advance();
                    self.advance();
                    let first = self.expr()?;
                    let result = match name.as_str() {
                        "abs" => Expr::Abs(Box::new(first)),
                        "sqrt" => Expr::Sqrt(Box::new(first)),
                        _ => {
                            self.expect(&Tok::Comma, "`,`")?;
                            let second = self.expr()?;
                            if name == "min" {
                                Expr::Min(Box::new(first), Box::new(second))
                            } else {
                                Expr::Max(Box::new(first), Box::new(second))
                            }
                        }
                    };
                    self.expect(&Tok::RParen, "`)`")?;
                    return Ok(result);
                }
                self.advance();
                Ok(Expr::Channel(name))
            }
            other => self.syntax(format!("expected expression, found {}", Self::describe(&other))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: usize, b: usize) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn always_predicate() {
        let f = parse_formula("G[0,5] (x >= 0)").unwrap();
        assert_eq!(f, Formula::always(iv(0, 5), Formula::ge(Expr::channel("x"), 0.0)));
    }

    #[test]
    fn eventually_min() {
        let f = parse_formula("F[0,2] (min(x, y) <= 1.5)").unwrap();
        let expr = Expr::Min(Box::new(Expr::channel("x")), Box::new(Expr::channel("y")));
        assert_eq!(f, Formula::eventually(iv(0, 2), Formula::le(expr, 1.5)));
    }

    #[test]
    fn reversed_interval_is_rejected() {
        assert!(matches!(
            parse_formula("G[3,1] (x >= 0)"),
            Err(StlError::Interval { .. })
        ));
    }

    #[test]
    fn negative_and_fractional_bounds_are_rejected() {
        assert!(matches!(parse_formula("G[-1,2] (x >= 0)"), Err(StlError::Interval { .. })));
        assert!(matches!(parse_formula("F[0,2.5] (x >= 0)"), Err(StlError::Interval { .. })));
    }

    #[test]
    fn unknown_operators() {
        for text in ["x == 1", "x < 1", "x >= 1 && y >= 2", "X[0,1] (x >= 0)", "foo(x) >= 1"] {
            assert!(
                matches!(parse_formula(text), Err(StlError::UnknownOperator { .. })),
                "{text}"
            );
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_formula("G[0,1] (x >= 0)\n  & (y >=)") {
            Err(StlError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 10)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse_formula("a >= 0 | b >= 0 & c >= 0").unwrap();
        let a = Formula::ge(Expr::channel("a"), 0.0);
        let b = Formula::ge(Expr::channel("b"), 0.0);
        let c = Formula::ge(Expr::channel("c"), 0.0);
        assert_eq!(f, Formula::or(a.clone(), Formula::and(b.clone(), c.clone())));

        let f = parse_formula("a >= 0 & b >= 0 & c >= 0").unwrap();
        assert_eq!(f, Formula::and(Formula::and(a, b), c));
    }

    #[test]
    fn until_and_parenthesised_expressions() {
        let f = parse_formula("(x >= 0) U[0,3] (y >= 0)").unwrap();
        assert!(matches!(f, Formula::Until(..)));
        let f = parse_formula("(x + 1) * 2 >= -3").unwrap();
        let expr = Expr::Mul(
            Box::new(Expr::Add(Box::new(Expr::channel("x")), Box::new(Expr::Const(1.0)))),
            Box::new(Expr::Const(2.0)),
        );
        assert_eq!(f, Formula::ge(expr, -3.0));
    }

    #[test]
    fn channel_named_like_keyword() {
        let f = parse_formula("F >= 1 & G <= 2").unwrap();
        assert_eq!(f.channels(), vec!["F".to_string(), "G".to_string()]);
    }

    #[test]
    fn printed_forms_reparse() {
        for text in [
            "G[0,5] (x >= 0)",
            "!(a >= 1) | F[1,4] (-(b) * 3 <= -0.5)",
            "(x >= 0) U[0,3] (y >= 0) & sqrt(abs(z)) / 2 >= 1e-3",
            "F[0,24] G[0,3] (max(d_a1_lm2_1, -2) <= 0.1)",
        ] {
            let f = parse_formula(text).unwrap();
            let printed = f.to_string();
            assert_eq!(parse_formula(&printed).unwrap(), f, "{printed}");
        }
    }
}
