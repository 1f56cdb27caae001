// SPDX-License-Identifier: Apache-2.0

//! Tokenizer for the supported C subset.
//!
//! ACSL annotation comments (`/*@ ... */` and `//@ ...`) are surfaced as
//! [`TokKind::Annot`] tokens; every other comment is discarded.

use super::ast::Span;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokKind {
    Ident(String),
    Int(i128),
    Float(f64),
    Char(i128),
    Str(String),
    Punct(&'static str),
    /// Content of an annotation comment, without the delimiters.
    Annot(String),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokKind,
    pub span: Span,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokKind::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, s: &str) -> bool {
        matches!(&self.kind, TokKind::Ident(q) if q == s)
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TokKind::Ident(s) => Some(s),
            _ => None,
        }
    }
}

// Longest first so that maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "(", ")", "[", "]", "{", "}", ";", ",", ".", "?", ":", "+", "-", "*", "/", "%", "<", ">",
    "=", "!", "~", "&", "|", "^",
];

/// Maps byte offsets to 1-based line/column pairs.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        Self { starts }
    }

    pub fn line_col(&self, offset: usize) -> (usize, usize) {
        let line = match self.starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line + 1, offset - self.starts[line] + 1)
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    Lexer::new(text).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    lines: LineIndex,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            lines: LineIndex::new(src),
            at_line_start: true,
        }
    }

    fn err(&self, offset: usize, msg: impl Into<String>) -> ParseError {
        let (line, column) = self.lines.line_col(offset);
        ParseError::Syntax {
            line,
            column,
            message: msg.into(),
        }
    }

    fn peek(&self, k: usize) -> u8 {
        *self.bytes.get(self.pos + k).unwrap_or(&0)
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws_and_comments(&mut out)?;
            if self.pos >= self.bytes.len() {
                out.push(Token {
                    kind: TokKind::Eof,
                    span: Span::new(self.pos, self.pos),
                });
                return Ok(out);
            }
            let start = self.pos;
            let c = self.peek(0);
            if c == b'#' && self.at_line_start {
                return Err(self.err(
                    start,
                    "preprocessor directive found; run the unit through a preprocessor first",
                ));
            }
            self.at_line_start = false;
            let kind = if c.is_ascii_alphabetic() || c == b'_' {
                while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' {
                    self.pos += 1;
                }
                TokKind::Ident(self.src[start..self.pos].to_string())
            } else if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_ascii_digit()) {
                self.number()?
            } else if c == b'\'' {
                TokKind::Char(self.char_lit()?)
            } else if c == b'"' {
                TokKind::Str(self.str_lit()?)
            } else if let Some(p) = PUNCTS.iter().find(|p| self.src[self.pos..].starts_with(**p)) {
                self.pos += p.len();
                TokKind::Punct(p)
            } else {
                return Err(self.err(start, format!("unexpected character {:?}", c as char)));
            };
            out.push(Token {
                kind,
                span: Span::new(start, self.pos),
            });
        }
    }

    fn skip_ws_and_comments(&mut self, out: &mut Vec<Token>) -> Result<(), ParseError> {
        loop {
            let c = self.peek(0);
            if c == b'\n' {
                self.at_line_start = true;
                self.pos += 1;
            } else if c == b' ' || c == b'\t' || c == b'\r' || c == 0x0c {
                self.pos += 1;
            } else if c == b'\\' && self.peek(1) == b'\n' {
                self.pos += 2;
            } else if c == b'/' && self.peek(1) == b'*' {
                let start = self.pos;
                let end = self.src[self.pos + 2..]
                    .find("*/")
                    .map(|i| self.pos + 2 + i)
                    .ok_or_else(|| self.err(start, "unterminated comment"))?;
                if self.peek(2) == b'@' {
                    out.push(Token {
                        kind: TokKind::Annot(self.src[start + 3..end].to_string()),
                        span: Span::new(start, end + 2),
                    });
                }
                self.pos = end + 2;
            } else if c == b'/' && self.peek(1) == b'/' {
                let start = self.pos;
                let end = self.src[self.pos..]
                    .find('\n')
                    .map(|i| self.pos + i)
                    .unwrap_or(self.bytes.len());
                if self.peek(2) == b'@' {
                    out.push(Token {
                        kind: TokKind::Annot(self.src[start + 3..end].to_string()),
                        span: Span::new(start, end),
                    });
                }
                self.pos = end;
            } else {
                return Ok(());
            }
        }
    }

    fn number(&mut self) -> Result<TokKind, ParseError> {
        let start = self.pos;
        let is_hex = self.peek(0) == b'0' && matches!(self.peek(1), b'x' | b'X');
        if is_hex {
            self.pos += 2;
            while self.peek(0).is_ascii_hexdigit() {
                self.pos += 1;
            }
        } else {
            while self.peek(0).is_ascii_digit() {
                self.pos += 1;
            }
        }
        let mut is_float = false;
        if !is_hex && (self.peek(0) == b'.' || matches!(self.peek(0), b'e' | b'E')) {
            is_float = true;
            if self.peek(0) == b'.' {
                self.pos += 1;
                while self.peek(0).is_ascii_digit() {
                    self.pos += 1;
                }
            }
            if matches!(self.peek(0), b'e' | b'E') {
                self.pos += 1;
                if matches!(self.peek(0), b'+' | b'-') {
                    self.pos += 1;
                }
                while self.peek(0).is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let digits_end = self.pos;
        while matches!(self.peek(0), b'u' | b'U' | b'l' | b'L' | b'f' | b'F') {
            self.pos += 1;
        }
        let text = &self.src[start..digits_end];
        if is_float {
            return text
                .parse::<f64>()
                .map(TokKind::Float)
                .map_err(|_| self.err(start, "malformed floating literal"));
        }
        let value = if is_hex {
            i128::from_str_radix(&text[2..], 16)
        } else if text.len() > 1 && text.starts_with('0') {
            i128::from_str_radix(&text[1..], 8)
        } else {
            text.parse::<i128>()
        };
        value
            .map(TokKind::Int)
            .map_err(|_| self.err(start, "malformed integer literal"))
    }

    fn escape(&mut self) -> Result<i128, ParseError> {
        // positioned after the backslash
        let c = self.peek(0);
        self.pos += 1;
        Ok(match c {
            b'n' => 10,
            b't' => 9,
            b'r' => 13,
            b'0'..=b'7' => {
                let mut v = (c - b'0') as i128;
                for _ in 0..2 {
                    if matches!(self.peek(0), b'0'..=b'7') {
                        v = v * 8 + (self.peek(0) - b'0') as i128;
                        self.pos += 1;
                    }
                }
                v
            }
            b'x' => {
                let mut v = 0i128;
                while self.peek(0).is_ascii_hexdigit() {
                    v = v * 16 + (self.peek(0) as char).to_digit(16).unwrap() as i128;
                    self.pos += 1;
                }
                v
            }
            b'a' => 7,
            b'b' => 8,
            b'f' => 12,
            b'v' => 11,
            other => other as i128,
        })
    }

    fn char_lit(&mut self) -> Result<i128, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let v = match self.peek(0) {
            b'\\' => {
                self.pos += 1;
                self.escape()?
            }
            b'\'' | b'\n' | 0 => return Err(self.err(start, "malformed character literal")),
            c => {
                self.pos += 1;
                c as i128
            }
        };
        if self.peek(0) != b'\'' {
            return Err(self.err(start, "unterminated character literal"));
        }
        self.pos += 1;
        Ok(v)
    }

    fn str_lit(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut s = String::new();
        loop {
            match self.peek(0) {
                b'"' => {
                    self.pos += 1;
                    return Ok(s);
                }
                b'\\' => {
                    self.pos += 1;
                    let v = self.escape()?;
                    s.push(char::from_u32(v as u32).unwrap_or('?'));
                }
                b'\n' | 0 => return Err(self.err(start, "unterminated string literal")),
                _ => {
                    let ch = self.src[self.pos..].chars().next().unwrap();
                    s.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn annotations_are_tokens_plain_comments_are_not() {
        let k = kinds("/* c */ x /*@ assert x; */ //@ ensures y;\n// z\n");
        assert_eq!(
            k,
            vec![
                TokKind::Ident("x".into()),
                TokKind::Annot(" assert x; ".into()),
                TokKind::Annot(" ensures y;".into()),
                TokKind::Eof
            ]
        );
    }

    #[test]
    fn directive_is_rejected_with_position() {
        let err = tokenize("int x;\n  #include <stdio.h>\n").unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn literals() {
        assert_eq!(
            kinds("0x1F 017 '\\n' 42u \"a/*@b\""),
            vec![
                TokKind::Int(31),
                TokKind::Int(15),
                TokKind::Char(10),
                TokKind::Int(42),
                TokKind::Str("a/*@b".into()),
                TokKind::Eof
            ]
        );
    }
}
