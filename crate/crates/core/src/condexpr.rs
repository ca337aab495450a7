//! Condition expressions guarding constraints and stating data constraints.
//!
//! Grammar (keywords are lowercase and case-sensitive):
//!
//! ```text
//! expr       := or
//! or         := and ("or" and)*
//! and        := not ("and" not)*
//! not        := "not" not | atom
//! atom       := comparison | "(" expr ")"
//! comparison := operand (cmpop operand)?
//! operand    := "$" ident | literal
//! ```
//!
//! Literals are double-quoted strings, optionally signed integers, or
//! `YYYY-MM-DD` dates. Evaluation is three-valued (strong Kleene) so that
//! conditions can be checked while a draft still has unentered values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::value::{is_ident_char, is_ident_start, Value};

pub type Env = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Ref(String),
    Literal(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CondExpr {
    Or(Box<CondExpr>, Box<CondExpr>),
    And(Box<CondExpr>, Box<CondExpr>),
    Not(Box<CondExpr>),
    Compare(CmpOp, Operand, Operand),
    Ref(String),
    Literal(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    pub fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::True, _) | (_, Tri::True) => Tri::True,
            (Tri::False, Tri::False) => Tri::False,
            _ => Tri::Unknown,
        }
    }

    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }
}

impl std::ops::Not for Tri {
    type Output = Tri;

    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("kind mismatch: {0}")]
pub struct KindMismatch(pub String);

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ref(String),
    Lit(Value),
    Op(CmpOp),
    And,
    Or,
    Not,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, position: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            position,
            message: message.into(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek_char() {
                if c.is_whitespace() {
                    self.pos += c.len_utf8();
                } else {
                    break;
                }
            }
            let start = self.pos;
            let Some(c) = self.peek_char() else {
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                ')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                '$' => {
                    self.pos += 1;
                    let name = self.take_while(is_ident_char);
                    if name.is_empty() || !name.starts_with(is_ident_start) {
                        return Err(self.err(start, "expected identifier after '$'"));
                    }
                    Tok::Ref(name.to_string())
                }
                '"' => Tok::Lit(Value::String(self.string_literal()?)),
                '=' => {
                    self.pos += 1;
                    Tok::Op(CmpOp::Eq)
                }
                '!' => {
                    if self.src[self.pos..].starts_with("!=") {
                        self.pos += 2;
                        Tok::Op(CmpOp::Ne)
                    } else {
                        return Err(self.err(start, "expected '!='"));
                    }
                }
                '<' | '>' => {
                    self.pos += 1;
                    let eq = self.peek_char() == Some('=');
                    if eq {
                        self.pos += 1;
                    }
                    Tok::Op(match (c, eq) {
                        ('<', false) => CmpOp::Lt,
                        ('<', true) => CmpOp::Le,
                        ('>', false) => CmpOp::Gt,
                        _ => CmpOp::Ge,
                    })
                }
                '+' | '-' | '0'..='9' => self.number_or_date()?,
                c if c.is_ascii_alphabetic() => {
                    let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
                    match word {
                        "and" => Tok::And,
                        "or" => Tok::Or,
                        "not" => Tok::Not,
                        other => {
                            return Err(self.err(start, format!("unexpected word '{other}'")));
                        }
                    }
                }
                other => return Err(self.err(start, format!("unexpected character '{other}'"))),
            };
            out.push((start, tok));
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if pred(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        &self.src[start..self.pos]
    }

    fn string_literal(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek_char() else {
                return Err(self.err(start, "unterminated string literal"));
            };
            self.pos += c.len_utf8();
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let Some(e) = self.peek_char() else {
                        return Err(self.err(start, "unterminated string literal"));
                    };
                    self.pos += e.len_utf8();
                    match e {
                        '"' | '\\' => out.push(e),
                        _ => return Err(self.err(self.pos - 1, format!("unknown escape '\\{e}'"))),
                    }
                }
                _ => out.push(c),
            }
        }
    }

    fn number_or_date(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let bytes = rest.as_bytes();
        let is_date = bytes.len() >= 10
            && bytes[..10].iter().enumerate().all(|(i, b)| match i {
                4 | 7 => *b == b'-',
                _ => b.is_ascii_digit(),
            })
            && !rest[10..].starts_with(is_ident_char);
        if is_date {
            let text = &rest[..10];
            let date = NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .map_err(|_| self.err(start, format!("invalid date '{text}'")))?;
            self.pos += 10;
            return Ok(Tok::Lit(Value::Date(date)));
        }
        let mut end = 0;
        if bytes[0] == b'+' || bytes[0] == b'-' {
            end = 1;
        }
        let digits_start = end;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end == digits_start {
            return Err(self.err(start, "expected digits"));
        }
        let text = &rest[..end];
        let n = text
            .parse::<i64>()
            .map_err(|_| self.err(start, format!("integer out of range '{text}'")))?;
        self.pos += end;
        Ok(Tok::Lit(Value::Integer(n)))
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.idx).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            position: self.here(),
            message: message.into(),
        }
    }

    fn or(&mut self) -> Result<CondExpr, ParseError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.idx += 1;
            let rhs = self.and()?;
            lhs = CondExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<CondExpr, ParseError> {
        let mut lhs = self.not()?;
        while self.peek() == Some(&Tok::And) {
            self.idx += 1;
            let rhs = self.not()?;
            lhs = CondExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<CondExpr, ParseError> {
        if self.peek() == Some(&Tok::Not) {
            self.idx += 1;
            return Ok(CondExpr::Not(Box::new(self.not()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<CondExpr, ParseError> {
        if self.peek() == Some(&Tok::LParen) {
            self.idx += 1;
            let inner = self.or()?;
            if self.peek() != Some(&Tok::RParen) {
                return Err(self.err("expected ')'"));
            }
            self.idx += 1;
            return Ok(inner);
        }
        let lhs = self.operand()?;
        if let Some(Tok::Op(op)) = self.peek() {
            let op = *op;
            self.idx += 1;
            let rhs = self.operand()?;
            return Ok(CondExpr::Compare(op, lhs, rhs));
        }
        Ok(match lhs {
            Operand::Ref(name) => CondExpr::Ref(name),
            Operand::Literal(v) => CondExpr::Literal(v),
        })
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match self.peek() {
            Some(Tok::Ref(name)) => {
                let name = name.clone();
                self.idx += 1;
                Ok(Operand::Ref(name))
            }
            Some(Tok::Lit(v)) => {
                let v = v.clone();
                self.idx += 1;
                Ok(Operand::Literal(v))
            }
            Some(_) => Err(self.err("expected '$name' or a literal")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

pub fn parse_cond(src: &str) -> Result<CondExpr, ParseError> {
    let toks = Lexer { src, pos: 0 }.tokens()?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: src.len(),
    };
    if p.toks.is_empty() {
        return Err(p.err("empty condition"));
    }
    let expr = p.or()?;
    if p.idx != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(expr)
}

impl FromStr for CondExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cond(s)
    }
}

// ---------------------------------------------------------------------------
// Canonical printer

fn write_literal(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match v {
        Value::String(s) => {
            f.write_str("\"")?;
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    f.write_str("\\")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str("\"")
        }
        Value::Integer(i) => write!(f, "{i}"),
        Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Ref(name) => write!(f, "${name}"),
            Operand::Literal(v) => write_literal(f, v),
        }
    }
}

impl CondExpr {
    fn precedence(&self) -> u8 {
        match self {
            CondExpr::Or(..) => 1,
            CondExpr::And(..) => 2,
            CondExpr::Not(_) => 3,
            _ => 4,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.write_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            CondExpr::Or(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" or ")?;
                b.write_prec(f, 2)
            }
            CondExpr::And(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str(" and ")?;
                b.write_prec(f, 3)
            }
            CondExpr::Not(a) => {
                f.write_str("not ")?;
                a.write_prec(f, 3)
            }
            CondExpr::Compare(op, l, r) => write!(f, "{l} {} {r}", op.symbol()),
            CondExpr::Ref(name) => write!(f, "${name}"),
            CondExpr::Literal(v) => write_literal(f, v),
        }
    }
}

impl fmt::Display for CondExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl Serialize for CondExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CondExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_cond(&text).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn lookup<'e>(operand: &'e Operand, env: &'e Env) -> Option<&'e Value> {
    match operand {
        Operand::Ref(name) => env.get(name),
        Operand::Literal(v) => Some(v),
    }
}

fn truthiness(v: &Value, what: &str) -> Result<Tri, KindMismatch> {
    match v {
        Value::Integer(i) => Ok(Tri::from_bool(*i != 0)),
        Value::String(s) => Ok(Tri::from_bool(!s.is_empty())),
        Value::Date(_) => Err(KindMismatch(format!("{what} is a date, not a condition"))),
    }
}

pub fn eval_cond(e: &CondExpr, env: &Env) -> Result<Tri, KindMismatch> {
    Ok(match e {
        CondExpr::Or(a, b) => {
            let (a, b) = (eval_cond(a, env)?, eval_cond(b, env)?);
            a.or(b)
        }
        CondExpr::And(a, b) => {
            let (a, b) = (eval_cond(a, env)?, eval_cond(b, env)?);
            a.and(b)
        }
        CondExpr::Not(a) => !eval_cond(a, env)?,
        CondExpr::Compare(op, l, r) => {
            let (Some(lv), Some(rv)) = (lookup(l, env), lookup(r, env)) else {
                return Ok(Tri::Unknown);
            };
            let ord = lv.compare(rv).ok_or_else(|| {
                KindMismatch(format!("cannot compare {l} ({}) with {r} ({})", lv.kind(), rv.kind()))
            })?;
            Tri::from_bool(match op {
                CmpOp::Eq => ord.is_eq(),
                CmpOp::Ne => ord.is_ne(),
                CmpOp::Lt => ord.is_lt(),
                CmpOp::Le => ord.is_le(),
                CmpOp::Gt => ord.is_gt(),
                CmpOp::Ge => ord.is_ge(),
            })
        }
        CondExpr::Ref(name) => match env.get(name) {
            Some(v) => truthiness(v, &format!("${name}"))?,
            None => Tri::Unknown,
        },
        CondExpr::Literal(v) => truthiness(v, "literal")?,
    })
}

pub fn free_refs(e: &CondExpr) -> BTreeSet<String> {
    fn walk(e: &CondExpr, out: &mut BTreeSet<String>) {
        match e {
            CondExpr::Or(a, b) | CondExpr::And(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            CondExpr::Not(a) => walk(a, out),
            CondExpr::Compare(_, l, r) => {
                for o in [l, r] {
                    if let Operand::Ref(name) = o {
                        out.insert(name.clone());
                    }
                }
            }
            CondExpr::Ref(name) => {
                out.insert(name.clone());
            }
            CondExpr::Literal(_) => {}
        }
    }
    let mut out = BTreeSet::new();
    walk(e, &mut out);
    out
}
