//! A small, pure subset of GREL.
//!
//! Supported: an optional `grel:` tag, the `value` token, string literals,
//! `+`, parentheses, cell references (`cells["label"].value` and
//! `cells.label.value`) and the calls `toLowercase`, `toUppercase`, `trim`,
//! `toNumber`, `toString` in either method (`value.trim()`) or function
//! (`trim(value)`) form. Everything else is reported as opaque.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    ToLowercase,
    ToUppercase,
    Trim,
    ToNumber,
    ToString,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "toLowercase" => Func::ToLowercase,
            "toUppercase" => Func::ToUppercase,
            "trim" => Func::Trim,
            "toNumber" => Func::ToNumber,
            "toString" => Func::ToString,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::ToLowercase => "toLowercase",
            Func::ToUppercase => "toUppercase",
            Func::Trim => "trim",
            Func::ToNumber => "toNumber",
            Func::ToString => "toString",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Value,
    Str(String),
    Cell(String),
    Call(Func, Box<Expr>),
    Concat(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported expression: {0}")]
pub struct Unsupported(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Plus,
}

fn tokenize(src: &str) -> Result<Vec<Tok>, Unsupported> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '.' => {
                chars.next();
                toks.push(Tok::Dot);
            }
            '(' => {
                chars.next();
                toks.push(Tok::LParen);
            }
            ')' => {
                chars.next();
                toks.push(Tok::RParen);
            }
            '[' => {
                chars.next();
                toks.push(Tok::LBracket);
            }
            ']' => {
                chars.next();
                toks.push(Tok::RBracket);
            }
            '+' => {
                chars.next();
                toks.push(Tok::Plus);
            }
            '"' | '\'' => {
                let quote = c;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(Unsupported("unterminated string".into())),
                        Some(ch) if ch == quote => break,
                        Some('\\') => match chars.next() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('r') => s.push('\r'),
                            Some(other @ ('"' | '\'' | '\\' | '/')) => s.push(other),
                            _ => return Err(Unsupported("unsupported escape".into())),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                toks.push(Tok::Str(s));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        s.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Ident(s));
            }
            other => return Err(Unsupported(format!("unexpected character {other:?}"))),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), Unsupported> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(Unsupported(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, Unsupported> {
        let mut lhs = self.postfix()?;
        while self.peek() == Some(&Tok::Plus) {
            self.next();
            let rhs = self.postfix()?;
            lhs = Expr::Concat(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Expr, Unsupported> {
        let mut e = self.primary()?;
        while self.peek() == Some(&Tok::Dot) {
            self.next();
            let name = match self.next() {
                Some(Tok::Ident(n)) => n,
                other => {
                    return Err(Unsupported(format!(
                        "expected method name, found {other:?}"
                    )))
                }
            };
            let func = Func::from_name(&name)
                .ok_or_else(|| Unsupported(format!("unsupported method {name}")))?;
            self.expect(Tok::LParen)?;
            self.expect(Tok::RParen)?;
            e = Expr::Call(func, Box::new(e));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, Unsupported> {
        match self.next() {
            Some(Tok::Str(s)) => Ok(Expr::Str(s)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(id)) if id == "value" => Ok(Expr::Value),
            Some(Tok::Ident(id)) if id == "cells" => {
                let label = match self.next() {
                    Some(Tok::LBracket) => {
                        let label = match self.next() {
                            Some(Tok::Str(s)) => s,
                            other => {
                                return Err(Unsupported(format!(
                                    "expected column label, found {other:?}"
                                )))
                            }
                        };
                        self.expect(Tok::RBracket)?;
                        label
                    }
                    Some(Tok::Dot) => match self.next() {
                        Some(Tok::Ident(name)) => name,
                        other => {
                            return Err(Unsupported(format!(
                                "expected column identifier, found {other:?}"
                            )))
                        }
                    },
                    other => return Err(Unsupported(format!("bad cell reference at {other:?}"))),
                };
                self.expect(Tok::Dot)?;
                match self.next() {
                    Some(Tok::Ident(v)) if v == "value" => Ok(Expr::Cell(label)),
                    other => Err(Unsupported(format!("expected .value, found {other:?}"))),
                }
            }
            Some(Tok::Ident(id)) => {
                let func = Func::from_name(&id)
                    .ok_or_else(|| Unsupported(format!("unsupported identifier {id}")))?;
                self.expect(Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            other => Err(Unsupported(format!("unexpected token {other:?}"))),
        }
    }
}

/// Strips the language tag. Returns `None` for non-GREL languages.
fn strip_language(src: &str) -> Option<&str> {
    let trimmed = src.trim_start();
    if let Some(rest) = trimmed.strip_prefix("grel:") {
        return Some(rest);
    }
    let tag_len = trimmed
        .find(|c: char| !c.is_ascii_alphanumeric())
        .unwrap_or(trimmed.len());
    if tag_len > 0 && trimmed[tag_len..].starts_with(':') {
        // jython:, clojure:, or anything else tagged
        return None;
    }
    Some(trimmed)
}

/// Parses an expression in the supported subset.
pub fn parse_expression(src: &str) -> Result<Expr, Unsupported> {
    let body =
        strip_language(src).ok_or_else(|| Unsupported("expression language is not GREL".into()))?;
    let toks = tokenize(body)?;
    if toks.is_empty() {
        return Err(Unsupported("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Unsupported(format!("trailing input at token {}", p.pos)));
    }
    Ok(e)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpressionAnalysis {
    pub referenced_columns: BTreeSet<String>,
    pub reads_own_value: bool,
    /// Outside the supported subset; callers must assume every column is read.
    pub opaque: bool,
}

impl ExpressionAnalysis {
    fn opaque() -> Self {
        ExpressionAnalysis {
            opaque: true,
            ..Default::default()
        }
    }
}

/// Finds the columns an expression reads.
///
/// `_own_column` is accepted for symmetry with callers; `value` is reported
/// through `reads_own_value` rather than by label.
pub fn analyze_expression(expression: &str, _own_column: &str) -> ExpressionAnalysis {
    let Ok(expr) = parse_expression(expression) else {
        return ExpressionAnalysis::opaque();
    };
    let mut out = ExpressionAnalysis::default();
    collect(&expr, &mut out);
    out
}

fn collect(e: &Expr, out: &mut ExpressionAnalysis) {
    match e {
        Expr::Value => out.reads_own_value = true,
        Expr::Str(_) => {}
        Expr::Cell(label) => {
            out.referenced_columns.insert(label.clone());
        }
        Expr::Call(_, inner) => collect(inner, out),
        Expr::Concat(a, b) => {
            collect(a, out);
            collect(b, out);
        }
    }
}

/// Runtime value of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Str(String),
    Num(f64),
}

/// Integers print without a decimal point; everything else uses the
/// shortest representation that round-trips.
pub fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Str(s) => f.write_str(s),
            Val::Num(n) => f.write_str(&format_number(*n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no column named {0:?}")]
    UnknownColumn(String),
    #[error("{func} cannot be applied to {input:?}")]
    BadArgument { func: &'static str, input: String },
}

fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    let n: f64 = t.parse().ok()?;
    n.is_finite().then_some(n)
}

impl Expr {
    /// Evaluates against the current cell `value` and a column lookup.
    pub fn eval<'a, F>(&self, value: &str, cell: &F) -> Result<Val, EvalError>
    where
        F: Fn(&str) -> Option<&'a str>,
    {
        Ok(match self {
            Expr::Value => Val::Str(value.to_owned()),
            Expr::Str(s) => Val::Str(s.clone()),
            Expr::Cell(label) => Val::Str(
                cell(label)
                    .ok_or_else(|| EvalError::UnknownColumn(label.clone()))?
                    .to_owned(),
            ),
            Expr::Concat(a, b) => match (a.eval(value, cell)?, b.eval(value, cell)?) {
                (Val::Num(x), Val::Num(y)) => Val::Num(x + y),
                (x, y) => Val::Str(format!("{x}{y}")),
            },
            Expr::Call(func, inner) => {
                let arg = inner.eval(value, cell)?;
                match (func, arg) {
                    (Func::ToLowercase, v) => Val::Str(v.to_string().to_lowercase()),
                    (Func::ToUppercase, v) => Val::Str(v.to_string().to_uppercase()),
                    (Func::Trim, Val::Str(s)) => Val::Str(s.trim().to_owned()),
                    (Func::ToString, v) => Val::Str(v.to_string()),
                    (Func::ToNumber, Val::Num(n)) => Val::Num(n),
                    (Func::ToNumber, Val::Str(s)) => match parse_number(&s) {
                        Some(n) => Val::Num(n),
                        None => {
                            return Err(EvalError::BadArgument {
                                func: func.name(),
                                input: s,
                            })
                        }
                    },
                    (f, v) => {
                        return Err(EvalError::BadArgument {
                            func: f.name(),
                            input: v.to_string(),
                        })
                    }
                }
            }
        })
    }
}
