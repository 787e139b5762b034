//! Tiny predicate language over small-group counts, used to define
//! probability measures on aggregated states (or sub-chain keys).
//!
//! Examples: `S_broken == 0`, `S_idle + S_log == 2`, `Servers.S_idle >= 1`.
//! Bare state names must be unambiguous across the layout; the qualified
//! `Group.State` form always works.

use pepa::statespace::StateLayout;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeasureError {
    #[error("measure: unexpected character `{0}`")]
    BadChar(char),
    #[error("measure: unexpected token `{0}`, expected {1}")]
    Unexpected(String, String),
    #[error("measure: unexpected end of expression")]
    UnexpectedEnd,
    #[error("measure: unknown state `{0}`")]
    UnknownState(String),
    #[error("measure: `{0}` is ambiguous; qualify it as Group.State")]
    Ambiguous(String),
    #[error("measure: expected a {expected} operand")]
    TypeMismatch { expected: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Count(usize),
    Literal(i64),
    Sum(Vec<(bool, Expr)>), // (negated, term)
    Compare(Box<Expr>, Cmp, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Eq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Lt => "<",
            Cmp::Gt => ">",
        };
        f.write_str(s)
    }
}

/// A compiled predicate over count vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    expr: Expr,
}

impl Predicate {
    /// Compile an expression against a layout (coordinate names).
    pub fn compile(text: &str, layout: &StateLayout) -> Result<Predicate, MeasureError> {
        let tokens = lex(text)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            layout,
        };
        let expr = parser.or_expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(MeasureError::Unexpected(
                parser.tokens[parser.pos].text(),
                "end of expression".into(),
            ));
        }
        match eval(&expr, &vec![0; layout.dimension]) {
            Value::Bool(_) => Ok(Predicate { expr }),
            Value::Int(_) => Err(MeasureError::TypeMismatch {
                expected: "boolean",
            }),
        }
    }

    pub fn matches(&self, counts: &[u32]) -> bool {
        match eval(&self.expr, counts) {
            Value::Bool(b) => b,
            Value::Int(_) => unreachable!("type-checked at compile time"),
        }
    }
}

enum Value {
    Int(i64),
    Bool(bool),
}

fn eval(expr: &Expr, counts: &[u32]) -> Value {
    match expr {
        Expr::Count(i) => Value::Int(i64::from(counts[*i])),
        Expr::Literal(v) => Value::Int(*v),
        Expr::Sum(terms) => {
            let mut total = 0i64;
            for (negated, term) in terms {
                let v = match eval(term, counts) {
                    Value::Int(v) => v,
                    Value::Bool(_) => unreachable!("type-checked"),
                };
                total += if *negated { -v } else { v };
            }
            Value::Int(total)
        }
        Expr::Compare(a, op, b) => {
            let (Value::Int(x), Value::Int(y)) = (eval(a, counts), eval(b, counts)) else {
                unreachable!("type-checked")
            };
            Value::Bool(match op {
                Cmp::Eq => x == y,
                Cmp::Ne => x != y,
                Cmp::Le => x <= y,
                Cmp::Ge => x >= y,
                Cmp::Lt => x < y,
                Cmp::Gt => x > y,
            })
        }
        Expr::And(a, b) => {
            let (Value::Bool(x), Value::Bool(y)) = (eval(a, counts), eval(b, counts)) else {
                unreachable!("type-checked")
            };
            Value::Bool(x && y)
        }
        Expr::Or(a, b) => {
            let (Value::Bool(x), Value::Bool(y)) = (eval(a, counts), eval(b, counts)) else {
                unreachable!("type-checked")
            };
            Value::Bool(x || y)
        }
        Expr::Not(a) => match eval(a, counts) {
            Value::Bool(x) => Value::Bool(!x),
            Value::Int(_) => unreachable!("type-checked"),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    Number(i64),
    Op(&'static str),
}

impl Token {
    fn text(&self) -> String {
        match self {
            Token::Name(s) => s.clone(),
            Token::Number(n) => n.to_string(),
            Token::Op(o) => (*o).to_owned(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, MeasureError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut name = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_alphanumeric() || n == '_' || n == '.' {
                    name.push(n);
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(Token::Name(name));
        } else if c.is_ascii_digit() {
            let mut num = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_digit() {
                    num.push(n);
                    chars.next();
                } else {
                    break;
                }
            }
            tokens.push(Token::Number(num.parse().expect("digits")));
        } else {
            chars.next();
            let two = |chars: &mut std::iter::Peekable<std::str::Chars>, next: char, a: &'static str, b: &'static str| {
                if chars.peek() == Some(&next) {
                    chars.next();
                    a
                } else {
                    b
                }
            };
            let op = match c {
                '=' => {
                    if chars.peek() == Some(&'=') {
                        chars.next();
                        "=="
                    } else {
                        return Err(MeasureError::BadChar('='));
                    }
                }
                '!' => two(&mut chars, '=', "!=", "!"),
                '<' => two(&mut chars, '=', "<=", "<"),
                '>' => two(&mut chars, '=', ">=", ">"),
                '&' => {
                    if chars.peek() == Some(&'&') {
                        chars.next();
                        "&&"
                    } else {
                        return Err(MeasureError::BadChar('&'));
                    }
                }
                '|' => {
                    if chars.peek() == Some(&'|') {
                        chars.next();
                        "||"
                    } else {
                        return Err(MeasureError::BadChar('|'));
                    }
                }
                '+' => "+",
                '-' => "-",
                '(' => "(",
                ')' => ")",
                other => return Err(MeasureError::BadChar(other)),
            };
            tokens.push(Token::Op(op));
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    layout: &'a StateLayout,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn or_expr(&mut self) -> Result<Expr, MeasureError> {
        let mut left = self.and_expr()?;
        while self.matches_op("||") {
            let right = self.and_expr()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, MeasureError> {
        let mut left = self.cmp_expr()?;
        while self.matches_op("&&") {
            let right = self.cmp_expr()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn matches_op(&mut self, op: &str) -> bool {
        if let Some(Token::Op(o)) = self.peek() {
            if *o == op {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn cmp_expr(&mut self) -> Result<Expr, MeasureError> {
        if self.matches_op("!") {
            let inner = self.cmp_expr()?;
            return Ok(Expr::Not(Box::new(inner)));
        }
        let left = self.sum_expr()?;
        let op = match self.peek() {
            Some(Token::Op("==")) => Some(Cmp::Eq),
            Some(Token::Op("!=")) => Some(Cmp::Ne),
            Some(Token::Op("<=")) => Some(Cmp::Le),
            Some(Token::Op(">=")) => Some(Cmp::Ge),
            Some(Token::Op("<")) => Some(Cmp::Lt),
            Some(Token::Op(">")) => Some(Cmp::Gt),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let right = self.sum_expr()?;
            Ok(Expr::Compare(Box::new(left), op, Box::new(right)))
        } else {
            Ok(left)
        }
    }

    fn sum_expr(&mut self) -> Result<Expr, MeasureError> {
        let first = self.term()?;
        let mut terms = vec![(false, first)];
        loop {
            if self.matches_op("+") {
                terms.push((false, self.term()?));
            } else if self.matches_op("-") {
                terms.push((true, self.term()?));
            } else {
                break;
            }
        }
        if terms.len() == 1 {
            Ok(terms.pop().expect("one term").1)
        } else {
            Ok(Expr::Sum(terms))
        }
    }

    fn term(&mut self) -> Result<Expr, MeasureError> {
        match self.peek().cloned() {
            Some(Token::Number(n)) => {
                self.pos += 1;
                Ok(Expr::Literal(n))
            }
            Some(Token::Name(name)) => {
                self.pos += 1;
                Ok(Expr::Count(self.resolve(&name)?))
            }
            Some(Token::Op("(")) => {
                self.pos += 1;
                let inner = self.or_expr()?;
                if !self.matches_op(")") {
                    return Err(MeasureError::Unexpected(
                        self.peek().map_or("end".into(), Token::text),
                        "`)`".into(),
                    ));
                }
                Ok(inner)
            }
            Some(other) => Err(MeasureError::Unexpected(other.text(), "a term".into())),
            None => Err(MeasureError::UnexpectedEnd),
        }
    }

    fn resolve(&self, name: &str) -> Result<usize, MeasureError> {
        if let Some((group, state)) = name.split_once('.') {
            let slot = self
                .layout
                .slot(group)
                .ok_or_else(|| MeasureError::UnknownState(name.to_owned()))?;
            let idx = slot
                .states
                .iter()
                .position(|s| s == state)
                .ok_or_else(|| MeasureError::UnknownState(name.to_owned()))?;
            return Ok(slot.offset + idx);
        }
        let mut hits = Vec::new();
        for slot in &self.layout.slots {
            for (i, state) in slot.states.iter().enumerate() {
                if state == name {
                    hits.push(slot.offset + i);
                }
            }
        }
        match hits.len() {
            0 => Err(MeasureError::UnknownState(name.to_owned())),
            1 => Ok(hits[0]),
            _ => Err(MeasureError::Ambiguous(name.to_owned())),
        }
    }
}
