// SPDX-License-Identifier: Apache-2.0

//! C frontend: lexing, parsing, declaration extraction, and ACSL
//! instrumentation of source text.

pub mod ast;
mod instrument;
pub mod lexer;
mod parser;
mod refs;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::*;
pub use instrument::{
    instrument, labeled_source, strip_instrumentation, strip_labels, AttachmentError, InstrumentedSource,
};
pub use lexer::LineIndex;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no declarations found")]
    EmptyUnit,
}

/// One C translation unit handed to the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub text: String,
    pub preprocessed: bool,
}

impl SourceUnit {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
            preprocessed: true,
        }
    }
}

/// Parses a unit into its top-level declarations, in source order.
pub fn parse_unit(unit: &SourceUnit) -> Result<Vec<Declaration>, ParseError> {
    parse_text(&unit.text, &BTreeSet::new())
}

/// Parses `text`, treating `type_names` as typedef names declared elsewhere
/// (used for segment code whose typedefs live in dependency segments).
pub fn parse_text(text: &str, type_names: &BTreeSet<String>) -> Result<Vec<Declaration>, ParseError> {
    let mut p = parser::Parser::new(text)?;
    for n in type_names {
        p.declare_type(n);
    }
    let decls = p.parse_unit()?;
    if decls.is_empty() {
        return Err(ParseError::EmptyUnit);
    }
    Ok(decls)
}

/// Evaluates an integer constant expression. `lookup` resolves identifiers
/// (enumerators); unknown identifiers make the expression non-constant.
pub fn const_eval(e: &Expr, lookup: &dyn Fn(&str) -> Option<i128>) -> Option<i128> {
    use BinOp::*;
    Some(match &e.kind {
        ExprKind::Int(v) | ExprKind::Char(v) => *v,
        ExprKind::Ident(n) => lookup(n)?,
        ExprKind::Unary { op, operand, .. } => {
            let v = const_eval(operand, lookup)?;
            match op {
                UnOp::Neg => v.checked_neg()?,
                UnOp::Plus => v,
                UnOp::Not => (v == 0) as i128,
                UnOp::BitNot => !v,
                _ => return None,
            }
        }
        ExprKind::Binary { op, lhs, rhs, .. } => {
            let a = const_eval(lhs, lookup)?;
            let b = const_eval(rhs, lookup)?;
            match op {
                Add => a.checked_add(b)?,
                Sub => a.checked_sub(b)?,
                Mul => a.checked_mul(b)?,
                Div => a.checked_div(b)?,
                Rem => a.checked_rem(b)?,
                Shl => a.checked_shl(u32::try_from(b).ok()?)?,
                Shr => a.checked_shr(u32::try_from(b).ok()?)?,
                Lt => (a < b) as i128,
                Le => (a <= b) as i128,
                Gt => (a > b) as i128,
                Ge => (a >= b) as i128,
                Eq => (a == b) as i128,
                Ne => (a != b) as i128,
                BitAnd => a & b,
                BitOr => a | b,
                BitXor => a ^ b,
                And => (a != 0 && b != 0) as i128,
                Or => (a != 0 || b != 0) as i128,
            }
        }
        ExprKind::Cond(c, a, b) => {
            if const_eval(c, lookup)? != 0 {
                const_eval(a, lookup)?
            } else {
                const_eval(b, lookup)?
            }
        }
        ExprKind::Cast(_, inner) => const_eval(inner, lookup)?,
        _ => return None,
    })
}

/// Text of a function prototype for `decl` (`int f(int x);`), taken from
/// the source up to the body.
pub fn prototype_text(src: &str, decl: &Declaration) -> Option<String> {
    let f = decl.function()?;
    let head = &src[decl.span.start..f.body.span.start];
    Some(format!("{};", head.trim_end()))
}
