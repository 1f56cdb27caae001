// SPDX-License-Identifier: Apache-2.0

//! ACSL clause subset: lexing, parsing of predicates/terms, clause
//! splitting, and the lexical normal form used for deduplication.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AcslError {
    #[error("unexpected character {0:?} in annotation")]
    BadChar(char),
    #[error("unexpected {found} in annotation, expected {expected}")]
    Unexpected { found: String, expected: String },
    #[error("unsupported clause `{0}`")]
    UnsupportedClause(String),
    #[error("empty annotation")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClauseKind {
    Requires,
    Ensures,
    LoopInvariant,
    Assert,
}

impl ClauseKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ClauseKind::Requires => "requires",
            ClauseKind::Ensures => "ensures",
            ClauseKind::LoopInvariant => "loop invariant",
            ClauseKind::Assert => "assert",
        }
    }

    pub fn is_contract(self) -> bool {
        matches!(self, ClauseKind::Requires | ClauseKind::Ensures)
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// `\result`, `\forall`, `\valid`, ...
    Builtin(String),
    Int(i128),
    Punct(&'static str),
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Builtin(s) => format!("\\{s}"),
            Tok::Int(v) => v.to_string(),
            Tok::Punct(p) => p.to_string(),
        }
    }
}

const PUNCTS: &[&str] = &[
    "<==>", "==>", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "^^", "..", "->", "(", ")", "[", "]", "{", "}", ";",
    ",", ".", "?", ":", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^",
];

pub fn lex(text: &str) -> Result<Vec<Tok>, AcslError> {
    let b = text.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() || (c == b'@' && out.is_empty()) || c == b'@' && at_line_start(b, i) {
            i += 1;
            continue;
        }
        if c == b'/' && b.get(i + 1) == Some(&b'/') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'\\' {
            let start = i;
            i += 1;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            out.push(match word.strip_prefix('\\') {
                Some(w) => Tok::Builtin(w.to_string()),
                None => Tok::Ident(word.to_string()),
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let hex = c == b'0' && matches!(b.get(i + 1), Some(b'x' | b'X'));
            if hex {
                i += 2;
            }
            while i < b.len() && (b[i].is_ascii_hexdigit() && (hex || b[i].is_ascii_digit())) {
                i += 1;
            }
            let digits = &text[start..i];
            while i < b.len() && matches!(b[i], b'u' | b'U' | b'l' | b'L') {
                i += 1;
            }
            let v = if hex {
                i128::from_str_radix(&digits[2..], 16)
            } else {
                digits.parse()
            }
            .map_err(|_| AcslError::Unexpected {
                found: digits.to_string(),
                expected: "integer literal".into(),
            })?;
            out.push(Tok::Int(v));
            continue;
        }
        if c == b'\'' && i + 2 < b.len() && b[i + 2] == b'\'' {
            out.push(Tok::Int(b[i + 1] as i128));
            i += 3;
            continue;
        }
        match PUNCTS.iter().find(|p| text[i..].starts_with(**p)) {
            Some(p) => {
                out.push(Tok::Punct(p));
                i += p.len();
            }
            None => return Err(AcslError::BadChar(text[i..].chars().next().unwrap())),
        }
    }
    Ok(out)
}

fn at_line_start(b: &[u8], i: usize) -> bool {
    b[..i]
        .iter()
        .rev()
        .take_while(|c| **c != b'\n')
        .all(|c| c.is_ascii_whitespace())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ABinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitOr,
    BitXor,
    And,
    Or,
    Xor,
    Implies,
    Equiv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AUnOp {
    Neg,
    Not,
    BitNot,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AExpr {
    Int(i128),
    Bool(bool),
    Var(String),
    Result,
    Old(Box<AExpr>),
    /// `\at(e, Label)`; only `Pre`/`Old` and `Here` are meaningful to the mock backend.
    At(Box<AExpr>, String),
    Unary(AUnOp, Box<AExpr>),
    Binary(ABinOp, Box<AExpr>, Box<AExpr>),
    Cond(Box<AExpr>, Box<AExpr>, Box<AExpr>),
    Index(Box<AExpr>, Box<AExpr>),
    Deref(Box<AExpr>),
    Member(Box<AExpr>, String),
    /// Builtin (`\valid`, `\abs`, ...) or user logic function application.
    App(String, Vec<AExpr>),
    Range(Box<AExpr>, Box<AExpr>),
    Quant {
        forall: bool,
        vars: Vec<String>,
        body: Box<AExpr>,
    },
    Let(String, Box<AExpr>, Box<AExpr>),
    Cast(String, Box<AExpr>),
}

impl AExpr {
    pub fn walk(&self, f: &mut dyn FnMut(&AExpr)) {
        f(self);
        match self {
            AExpr::Old(e) | AExpr::At(e, _) | AExpr::Unary(_, e) | AExpr::Deref(e) => e.walk(f),
            AExpr::Member(e, _) | AExpr::Cast(_, e) => e.walk(f),
            AExpr::Binary(_, a, b) | AExpr::Index(a, b) | AExpr::Range(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            AExpr::Let(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            AExpr::Cond(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            AExpr::App(_, args) => args.iter().for_each(|a| a.walk(f)),
            AExpr::Quant { body, .. } => body.walk(f),
            AExpr::Int(_) | AExpr::Bool(_) | AExpr::Var(_) | AExpr::Result => {}
        }
    }

    pub fn mentions_result(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, AExpr::Result));
        found
    }
}

/// A clause split out of an annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawClause {
    pub kind: ClauseKind,
    pub label: Option<String>,
    pub predicate: String,
}

struct P {
    toks: Vec<Tok>,
    pos: usize,
}

fn unexpected(t: Option<&Tok>, expected: &str) -> AcslError {
    AcslError::Unexpected {
        found: t
            .map(|t| format!("`{}`", t.text()))
            .unwrap_or_else(|| "end of clause".into()),
        expected: expected.into(),
    }
}

const BINDER_TYPES: &[&str] = &[
    "int", "integer", "unsigned", "signed", "char", "short", "long", "size_t", "boolean", "real",
];

impl P {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn is(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), AcslError> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(unexpected(self.peek(), &format!("`{p}`")))
        }
    }

    fn expr(&mut self) -> Result<AExpr, AcslError> {
        let lhs = self.cond()?;
        if self.eat("<==>") {
            let rhs = self.expr()?;
            return Ok(AExpr::Binary(ABinOp::Equiv, Box::new(lhs), Box::new(rhs)));
        }
        if self.eat("==>") {
            let rhs = self.expr()?;
            return Ok(AExpr::Binary(ABinOp::Implies, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn cond(&mut self) -> Result<AExpr, AcslError> {
        let c = self.binary(0)?;
        if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.cond()?;
            return Ok(AExpr::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn binop(&self) -> Option<(ABinOp, u8)> {
        use ABinOp::*;
        let Some(Tok::Punct(p)) = self.peek() else {
            return None;
        };
        Some(match *p {
            "||" => (Or, 1),
            "^^" => (Xor, 2),
            "&&" => (And, 3),
            "|" => (BitOr, 4),
            "^" => (BitXor, 5),
            "&" => (BitAnd, 6),
            "==" => (Eq, 7),
            "!=" => (Ne, 7),
            "<" => (Lt, 7),
            "<=" => (Le, 7),
            ">" => (Gt, 7),
            ">=" => (Ge, 7),
            "<<" => (Shl, 8),
            ">>" => (Shr, 8),
            "+" => (Add, 9),
            "-" => (Sub, 9),
            "*" => (Mul, 10),
            "/" => (Div, 10),
            "%" => (Rem, 10),
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> Result<AExpr, AcslError> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.binop() {
            if prec < min {
                break;
            }
            self.pos += 1;
            if prec == 7 {
                // relation chains: a <= b < c  ==>  a <= b && b < c
                let rhs = self.binary(8)?;
                let mut acc = AExpr::Binary(op, Box::new(lhs), Box::new(rhs.clone()));
                let mut last = rhs;
                while let Some((op2, 7)) = self.binop() {
                    self.pos += 1;
                    let next = self.binary(8)?;
                    let link = AExpr::Binary(op2, Box::new(last), Box::new(next.clone()));
                    acc = AExpr::Binary(ABinOp::And, Box::new(acc), Box::new(link));
                    last = next;
                }
                lhs = acc;
                continue;
            }
            let rhs = self.binary(prec + 1)?;
            lhs = AExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        if min <= 8 && self.is("..") {
            self.pos += 1;
            let hi = self.binary(9)?;
            lhs = AExpr::Range(Box::new(lhs), Box::new(hi));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<AExpr, AcslError> {
        if self.eat("-") {
            return Ok(AExpr::Unary(AUnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat("+") {
            return self.unary();
        }
        if self.eat("!") {
            return Ok(AExpr::Unary(AUnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat("~") {
            return Ok(AExpr::Unary(AUnOp::BitNot, Box::new(self.unary()?)));
        }
        if self.eat("*") {
            return Ok(AExpr::Deref(Box::new(self.unary()?)));
        }
        if self.is("(") {
            if let Some(Tok::Ident(t)) = self.toks.get(self.pos + 1) {
                if BINDER_TYPES.contains(&t.as_str()) {
                    self.pos += 1;
                    let mut ty = Vec::new();
                    while let Some(Tok::Ident(w)) = self.peek() {
                        ty.push(w.clone());
                        self.pos += 1;
                    }
                    self.expect(")")?;
                    let e = self.unary()?;
                    return Ok(AExpr::Cast(ty.join(" "), Box::new(e)));
                }
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<AExpr, AcslError> {
        let mut e = self.primary()?;
        loop {
            if self.eat("[") {
                let i = self.expr()?;
                self.expect("]")?;
                e = AExpr::Index(Box::new(e), Box::new(i));
            } else if self.eat(".") || self.eat("->") {
                let arrow = matches!(self.toks.get(self.pos - 1), Some(Tok::Punct("->")));
                let f = match self.peek() {
                    Some(Tok::Ident(f)) => f.clone(),
                    t => return Err(unexpected(t, "field name")),
                };
                self.pos += 1;
                let base = if arrow { AExpr::Deref(Box::new(e)) } else { e };
                e = AExpr::Member(Box::new(base), f);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn args(&mut self) -> Result<Vec<AExpr>, AcslError> {
        self.expect("(")?;
        let mut v = Vec::new();
        if !self.eat(")") {
            loop {
                v.push(self.expr()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(")")?;
        }
        Ok(v)
    }

    fn binder_vars(&mut self) -> Result<Vec<String>, AcslError> {
        let mut vars = Vec::new();
        let mut last: Option<String> = None;
        loop {
            match self.peek() {
                Some(Tok::Ident(w)) => {
                    last = Some(w.clone());
                    self.pos += 1;
                }
                Some(Tok::Punct("*")) => self.pos += 1,
                Some(Tok::Punct(",")) => {
                    vars.push(last.take().ok_or_else(|| unexpected(self.peek(), "binder name"))?);
                    self.pos += 1;
                }
                Some(Tok::Punct(";")) => {
                    vars.push(last.take().ok_or_else(|| unexpected(self.peek(), "binder name"))?);
                    self.pos += 1;
                    return Ok(vars);
                }
                t => return Err(unexpected(t, "binder declaration")),
            }
        }
    }

    fn primary(&mut self) -> Result<AExpr, AcslError> {
        let t = self.peek().cloned();
        match t {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(AExpr::Int(v))
            }
            Some(Tok::Ident(n)) => {
                self.pos += 1;
                if self.is("(") {
                    let args = self.args()?;
                    return Ok(AExpr::App(n, args));
                }
                Ok(AExpr::Var(n))
            }
            Some(Tok::Builtin(b)) => {
                self.pos += 1;
                match b.as_str() {
                    "result" => Ok(AExpr::Result),
                    "true" => Ok(AExpr::Bool(true)),
                    "false" => Ok(AExpr::Bool(false)),
                    "null" => Ok(AExpr::Int(0)),
                    "old" => {
                        let mut a = self.args()?;
                        if a.len() != 1 {
                            return Err(unexpected(self.peek(), "one argument to \\old"));
                        }
                        Ok(AExpr::Old(Box::new(a.remove(0))))
                    }
                    "at" => {
                        self.expect("(")?;
                        let e = self.expr()?;
                        self.expect(",")?;
                        let label = match self.peek() {
                            Some(Tok::Ident(l)) => l.clone(),
                            t => return Err(unexpected(t, "label")),
                        };
                        self.pos += 1;
                        self.expect(")")?;
                        Ok(AExpr::At(Box::new(e), label))
                    }
                    "forall" | "exists" => {
                        let vars = self.binder_vars()?;
                        let body = self.expr()?;
                        Ok(AExpr::Quant {
                            forall: b == "forall",
                            vars,
                            body: Box::new(body),
                        })
                    }
                    "let" => {
                        let name = match self.peek() {
                            Some(Tok::Ident(n)) => n.clone(),
                            t => return Err(unexpected(t, "let binder")),
                        };
                        self.pos += 1;
                        self.expect("=")?;
                        let v = self.expr()?;
                        self.expect(";")?;
                        let body = self.expr()?;
                        Ok(AExpr::Let(name, Box::new(v), Box::new(body)))
                    }
                    _ => {
                        let args = if self.is("(") { self.args()? } else { Vec::new() };
                        Ok(AExpr::App(format!("\\{b}"), args))
                    }
                }
            }
            Some(Tok::Punct("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            t => Err(unexpected(t.as_ref(), "term")),
        }
    }
}

/// Parses a predicate (no trailing semicolon).
pub fn parse_predicate(text: &str) -> Result<AExpr, AcslError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(AcslError::Empty);
    }
    let mut p = P { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(unexpected(p.peek(), "end of predicate"));
    }
    Ok(e)
}

/// Splits the body of one annotation comment into its clauses.
///
/// Clauses of kinds outside the supported set (`assigns`, `loop variant`,
/// `behavior`, ...) are returned as `Err(UnsupportedClause)` entries so
/// callers can choose to ignore them.
pub fn split_clauses(annotation: &str) -> Vec<Result<RawClause, AcslError>> {
    let mut out = Vec::new();
    for piece in split_top_level(annotation) {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        out.push(parse_clause_text(piece));
    }
    out
}

/// Parses `kind [label:] predicate[;]`.
pub fn parse_clause_text(text: &str) -> Result<RawClause, AcslError> {
    let text = strip_at_prefixes(text);
    let text = text.trim().trim_end_matches(';').trim();
    let (kind, rest) = if let Some(r) = strip_keyword(text, "requires") {
        (ClauseKind::Requires, r)
    } else if let Some(r) = strip_keyword(text, "ensures") {
        (ClauseKind::Ensures, r)
    } else if let Some(r) = strip_keyword(text, "assert") {
        (ClauseKind::Assert, r)
    } else if let Some(r) = strip_keyword(text, "loop").and_then(|r| strip_keyword(r.trim_start(), "invariant")) {
        (ClauseKind::LoopInvariant, r)
    } else {
        let head: String = text.split_whitespace().take(2).collect::<Vec<_>>().join(" ");
        return Err(AcslError::UnsupportedClause(head));
    };
    let rest = rest.trim();
    let (label, predicate) = split_label(rest);
    if predicate.is_empty() {
        return Err(AcslError::Empty);
    }
    parse_predicate(predicate)?;
    Ok(RawClause {
        kind,
        label,
        predicate: predicate.to_string(),
    })
}

fn strip_at_prefixes(text: &str) -> String {
    text.lines()
        .map(|l| {
            let t = l.trim_start();
            t.strip_prefix('@').unwrap_or(t)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn strip_keyword<'a>(text: &'a str, kw: &str) -> Option<&'a str> {
    let rest = text.strip_prefix(kw)?;
    match rest.chars().next() {
        Some(c) if c.is_alphanumeric() || c == '_' => None,
        _ => Some(rest),
    }
}

fn split_label(rest: &str) -> (Option<String>, &str) {
    let ident_end = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    if ident_end > 0 && !rest.as_bytes()[0].is_ascii_digit() {
        let after = rest[ident_end..].trim_start();
        if after.starts_with(':') && !after.starts_with("::") {
            return (Some(rest[..ident_end].to_string()), after[1..].trim());
        }
    }
    (None, rest)
}

/// Splits at top-level `;`, skipping the binder-terminating `;` of
/// `\forall`, `\exists` and the `;` of `\let x = e;`.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    // depth of each quantifier whose binder `;` is still ahead
    let mut binders: Vec<i32> = Vec::new();
    let mut i = 0;
    while let Some(c) = s[i..].chars().next() {
        if c == '\\' {
            let end = s[i + 1..]
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .map(|k| i + 1 + k)
                .unwrap_or(s.len());
            if matches!(&s[i + 1..end], "forall" | "exists" | "let") {
                binders.push(depth);
            }
            cur.push_str(&s[i..end]);
            i = end;
            continue;
        }
        i += c.len_utf8();
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                depth -= 1;
                binders.retain(|d| *d <= depth);
            }
            ';' if binders.last() == Some(&depth) => {
                binders.pop();
            }
            ';' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

/// Canonical token spacing of a predicate.
pub fn normalize_predicate(pred: &str) -> String {
    match lex(pred) {
        Ok(toks) => toks.iter().map(Tok::text).collect::<Vec<_>>().join(" "),
        Err(_) => pred.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}

/// Dedup key: kind plus canonical predicate, with labels and the trailing
/// semicolon removed. Case is preserved.
pub fn dedup_key(kind: ClauseKind, predicate: &str) -> String {
    let p = predicate.trim().trim_end_matches(';');
    let (_, p) = split_label(p.trim());
    format!("{} {}", kind.keyword(), normalize_predicate(p))
}
