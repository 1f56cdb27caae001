// SPDX-License-Identifier: Apache-2.0

//! Evaluation of ACSL predicates over concrete interpreter states.

use std::collections::HashMap;

use crate::acsl::{ABinOp, AExpr, AUnOp};
use crate::frontend::{CType, IntType};

use super::interp::{Memory, Val};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SpecErr {
    /// The clause cannot be interpreted (unknown name, unsupported construct).
    Invalid(String),
    /// The clause reads memory it has no right to; counts as a violation.
    Memory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AVal {
    Int(i128),
    Ptr { buf: usize, off: i128 },
    PtrRange { buf: usize, lo: i128, hi: i128 },
    Range(i128, i128),
}

pub(crate) type Scope = HashMap<String, (usize, CType)>;

/// Where names in a clause resolve.
pub(crate) struct SpecCtx<'a> {
    pub cur: &'a Memory,
    pub pre: Option<&'a Memory>,
    pub scopes: &'a [Scope],
    pub globals: &'a Scope,
    pub enums: &'a HashMap<String, i128>,
    pub result: Option<Val>,
    /// Formal parameters read their pre-state value (postconditions).
    pub params: &'a [String],
    pub params_in_pre: bool,
    pub quant_window: i128,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SpecErr> {
    Err(SpecErr::Invalid(msg.into()))
}

impl<'a> SpecCtx<'a> {
    pub fn holds(&self, e: &AExpr) -> Result<bool, SpecErr> {
        let mut binds = Vec::new();
        Ok(self.int(e, &mut binds, false)? != 0)
    }

    pub fn value(&self, e: &AExpr) -> Result<i128, SpecErr> {
        let mut binds = Vec::new();
        self.int(e, &mut binds, false)
    }

    fn lookup(&self, name: &str) -> Option<(usize, CType)> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .or_else(|| self.globals.get(name))
            .cloned()
    }

    fn mem(&self, pre: bool) -> Result<&Memory, SpecErr> {
        if pre {
            self.pre
                .ok_or_else(|| SpecErr::Invalid("\\old used outside a postcondition".into()))
        } else {
            Ok(self.cur)
        }
    }

    fn int(&self, e: &AExpr, b: &mut Vec<(String, AVal)>, pre: bool) -> Result<i128, SpecErr> {
        match self.eval(e, b, pre)? {
            AVal::Int(v) => Ok(v),
            AVal::Ptr { .. } => Ok(1),
            _ => invalid("range used as a value"),
        }
    }

    fn read(&self, buf: usize, off: i128, pre: bool) -> Result<AVal, SpecErr> {
        let m = self.mem(pre)?;
        match m.read(buf, off) {
            Ok(v) => from_val(v),
            Err(msg) => Err(SpecErr::Memory(msg)),
        }
    }

    fn eval(&self, e: &AExpr, b: &mut Vec<(String, AVal)>, pre: bool) -> Result<AVal, SpecErr> {
        use ABinOp::*;
        Ok(match e {
            AExpr::Int(v) => AVal::Int(*v),
            AExpr::Bool(v) => AVal::Int(*v as i128),
            AExpr::Var(n) => {
                if let Some((_, v)) = b.iter().rev().find(|(k, _)| k == n) {
                    return Ok(*v);
                }
                if let Some((buf, ty)) = self.lookup(n) {
                    if let CType::Array(..) = ty {
                        return Ok(AVal::Ptr { buf, off: 0 });
                    }
                    let use_pre = pre || (self.params_in_pre && self.params.iter().any(|p| p == n));
                    return self.read(buf, 0, use_pre);
                }
                if let Some(v) = self.enums.get(n) {
                    return Ok(AVal::Int(*v));
                }
                return invalid(format!("unknown identifier `{n}`"));
            }
            AExpr::Result => match self.result {
                Some(v) => from_val(v)?,
                None => return invalid("\\result used outside a postcondition of a non-void function"),
            },
            AExpr::Old(inner) => {
                self.mem(true)?;
                self.eval(inner, b, true)?
            }
            AExpr::At(inner, label) => match label.as_str() {
                "Pre" | "Old" => {
                    self.mem(true)?;
                    self.eval(inner, b, true)?
                }
                "Here" => self.eval(inner, b, pre)?,
                other => return invalid(format!("label `{other}` is not supported")),
            },
            AExpr::Unary(op, x) => {
                let v = self.int(x, b, pre)?;
                AVal::Int(match op {
                    AUnOp::Neg => v.checked_neg().ok_or_else(|| SpecErr::Invalid("overflow".into()))?,
                    AUnOp::Not => (v == 0) as i128,
                    AUnOp::BitNot => !v,
                })
            }
            AExpr::Binary(op, l, r) => match op {
                And => AVal::Int((self.int(l, b, pre)? != 0 && self.int(r, b, pre)? != 0) as i128),
                Or => AVal::Int((self.int(l, b, pre)? != 0 || self.int(r, b, pre)? != 0) as i128),
                Implies => AVal::Int((self.int(l, b, pre)? == 0 || self.int(r, b, pre)? != 0) as i128),
                Equiv => AVal::Int(((self.int(l, b, pre)? != 0) == (self.int(r, b, pre)? != 0)) as i128),
                Xor => AVal::Int(((self.int(l, b, pre)? != 0) != (self.int(r, b, pre)? != 0)) as i128),
                _ => {
                    let lv = self.eval(l, b, pre)?;
                    let rv = self.eval(r, b, pre)?;
                    binary(*op, lv, rv)?
                }
            },
            AExpr::Cond(c, x, y) => {
                if self.int(c, b, pre)? != 0 {
                    self.eval(x, b, pre)?
                } else {
                    self.eval(y, b, pre)?
                }
            }
            AExpr::Index(a, i) => {
                let base = self.eval(a, b, pre)?;
                let idx = self.int(i, b, pre)?;
                match base {
                    AVal::Ptr { buf, off } => self.read(buf, off + idx, pre)?,
                    _ => return invalid("indexing a non-pointer"),
                }
            }
            AExpr::Deref(p) => match self.eval(p, b, pre)? {
                AVal::Ptr { buf, off } => self.read(buf, off, pre)?,
                AVal::Int(_) => return Err(SpecErr::Memory("dereference of a null or integer pointer".into())),
                _ => return invalid("dereference of a range"),
            },
            AExpr::Member(..) => return invalid("struct member access is not supported"),
            AExpr::Range(lo, hi) => AVal::Range(self.int(lo, b, pre)?, self.int(hi, b, pre)?),
            AExpr::App(f, args) => self.app(f, args, b, pre)?,
            AExpr::Quant { forall, vars, body } => AVal::Int(self.quant(*forall, vars, body, b, pre)? as i128),
            AExpr::Let(n, v, body) => {
                let val = self.eval(v, b, pre)?;
                b.push((n.clone(), val));
                let r = self.eval(body, b, pre);
                b.pop();
                r?
            }
            AExpr::Cast(ty, x) => {
                let v = self.eval(x, b, pre)?;
                match (v, cast_type(ty)) {
                    (AVal::Int(v), Some(Some(t))) => AVal::Int(t.wrap(v)),
                    (v, Some(None)) => v,
                    _ => return invalid(format!("cast to `{ty}` is not supported")),
                }
            }
        })
    }

    fn app(&self, f: &str, args: &[AExpr], b: &mut Vec<(String, AVal)>, pre: bool) -> Result<AVal, SpecErr> {
        match (f, args.len()) {
            ("\\valid" | "\\valid_read", 1) => {
                let ok = match self.eval(&args[0], b, pre)? {
                    AVal::Ptr { buf, off } => self.mem(pre)?.in_bounds(buf, off),
                    AVal::PtrRange { buf, lo, hi } => {
                        lo > hi || (self.mem(pre)?.in_bounds(buf, lo) && self.mem(pre)?.in_bounds(buf, hi))
                    }
                    AVal::Int(_) => false,
                    AVal::Range(..) => return invalid("\\valid of an integer range"),
                };
                Ok(AVal::Int(ok as i128))
            }
            ("\\separated", _) => {
                let mut spans = Vec::new();
                for a in args {
                    spans.push(match self.eval(a, b, pre)? {
                        AVal::Ptr { buf, off } => (buf, off, off),
                        AVal::PtrRange { buf, lo, hi } => (buf, lo, hi),
                        _ => return invalid("\\separated expects pointers"),
                    });
                }
                let mut ok = true;
                for i in 0..spans.len() {
                    for j in i + 1..spans.len() {
                        let (a, b2) = (spans[i], spans[j]);
                        if a.0 == b2.0 && a.1 <= a.2 && b2.1 <= b2.2 && a.1 <= b2.2 && b2.1 <= a.2 {
                            ok = false;
                        }
                    }
                }
                Ok(AVal::Int(ok as i128))
            }
            ("\\abs", 1) => Ok(AVal::Int(self.int(&args[0], b, pre)?.abs())),
            ("\\max", 2) => Ok(AVal::Int(self.int(&args[0], b, pre)?.max(self.int(&args[1], b, pre)?))),
            ("\\min", 2) => Ok(AVal::Int(self.int(&args[0], b, pre)?.min(self.int(&args[1], b, pre)?))),
            _ => invalid(format!("unknown logic function `{f}`")),
        }
    }

    fn quant(
        &self,
        forall: bool,
        vars: &[String],
        body: &AExpr,
        b: &mut Vec<(String, AVal)>,
        pre: bool,
    ) -> Result<bool, SpecErr> {
        let Some((v, rest)) = vars.split_first() else {
            return Ok(self.int(body, b, pre)? != 0);
        };
        let guard = match (forall, body) {
            (true, AExpr::Binary(ABinOp::Implies, g, _)) => Some(g.as_ref()),
            (false, AExpr::Binary(ABinOp::And, g, _)) => Some(g.as_ref()),
            _ => None,
        };
        let (lo, hi) = match guard {
            Some(g) => self.bounds(v, g, b, pre)?,
            None => (None, None),
        };
        let lo = lo.unwrap_or(-self.quant_window);
        let hi = hi.unwrap_or(self.quant_window);
        if hi - lo > 100_000 {
            return invalid(format!("quantifier over `{v}` has too large a range"));
        }
        let mut k = lo;
        while k <= hi {
            b.push((v.clone(), AVal::Int(k)));
            let r = self.quant(forall, rest, body, b, pre);
            b.pop();
            let r = match r {
                // the guard may index memory outside its own range
                Err(SpecErr::Memory(_)) if guard.is_some() && !self.guard_holds(guard.unwrap(), v, k, b, pre) => {
                    !forall
                }
                other => other?,
            };
            if forall && !r {
                return Ok(false);
            }
            if !forall && r {
                return Ok(true);
            }
            k += 1;
        }
        Ok(forall)
    }

    fn guard_holds(&self, g: &AExpr, v: &str, k: i128, b: &mut Vec<(String, AVal)>, pre: bool) -> bool {
        b.push((v.to_string(), AVal::Int(k)));
        let r = self.int(g, b, pre).map(|x| x != 0).unwrap_or(true);
        b.pop();
        r
    }

    /// Syntactic bounds on `v` from conjuncts `e <= v`, `v < e`, etc.
    fn bounds(
        &self,
        v: &str,
        g: &AExpr,
        b: &mut Vec<(String, AVal)>,
        pre: bool,
    ) -> Result<(Option<i128>, Option<i128>), SpecErr> {
        let mut conj = Vec::new();
        flatten_and(g, &mut conj);
        let (mut lo, mut hi): (Option<i128>, Option<i128>) = (None, None);
        let is_v = |e: &AExpr| matches!(e, AExpr::Var(n) if n == v);
        for c in conj {
            let AExpr::Binary(op, l, r) = c else { continue };
            // normalize to `v op e`
            let (op, e) = if is_v(l) && !mentions(r, v) {
                (*op, r.as_ref())
            } else if is_v(r) && !mentions(l, v) {
                let flipped = match op {
                    ABinOp::Lt => ABinOp::Gt,
                    ABinOp::Le => ABinOp::Ge,
                    ABinOp::Gt => ABinOp::Lt,
                    ABinOp::Ge => ABinOp::Le,
                    other => *other,
                };
                (flipped, l.as_ref())
            } else {
                continue;
            };
            let Ok(x) = self.int(e, b, pre) else { continue };
            match op {
                ABinOp::Lt => hi = Some(hi.map_or(x - 1, |h| h.min(x - 1))),
                ABinOp::Le => hi = Some(hi.map_or(x, |h| h.min(x))),
                ABinOp::Gt => lo = Some(lo.map_or(x + 1, |l| l.max(x + 1))),
                ABinOp::Ge => lo = Some(lo.map_or(x, |l| l.max(x))),
                ABinOp::Eq => {
                    lo = Some(x);
                    hi = Some(x);
                }
                _ => {}
            }
        }
        Ok((lo, hi))
    }
}

fn flatten_and<'e>(e: &'e AExpr, out: &mut Vec<&'e AExpr>) {
    match e {
        AExpr::Binary(ABinOp::And, a, b) => {
            flatten_and(a, out);
            flatten_and(b, out);
        }
        other => out.push(other),
    }
}

fn mentions(e: &AExpr, v: &str) -> bool {
    let mut found = false;
    e.walk(&mut |x| found |= matches!(x, AExpr::Var(n) if n == v));
    found
}

fn from_val(v: Val) -> Result<AVal, SpecErr> {
    match v {
        Val::Int(i) => Ok(AVal::Int(i)),
        Val::Ptr { buf, off } => Ok(AVal::Ptr { buf, off }),
        Val::Undef => Err(SpecErr::Memory("read of an uninitialized value".into())),
    }
}

/// `Some(Some(t))` for C integer casts, `Some(None)` for mathematical ones.
fn cast_type(ty: &str) -> Option<Option<IntType>> {
    Some(match ty {
        "integer" => None,
        "int" | "signed" | "signed int" => Some(IntType::INT),
        "unsigned" | "unsigned int" => Some(IntType::UINT),
        "char" | "signed char" => Some(IntType::CHAR),
        "unsigned char" => Some(IntType { bits: 8, signed: false }),
        "short" | "short int" => Some(IntType { bits: 16, signed: true }),
        "unsigned short" => Some(IntType {
            bits: 16,
            signed: false,
        }),
        "long" | "long long" | "long int" => Some(IntType::LONG),
        "unsigned long" | "size_t" | "unsigned long long" => Some(IntType::ULONG),
        _ => return None,
    })
}

fn binary(op: ABinOp, l: AVal, r: AVal) -> Result<AVal, SpecErr> {
    use ABinOp::*;
    let overflow = || SpecErr::Invalid("arithmetic overflow in annotation".into());
    Ok(match (l, r) {
        (AVal::Int(a), AVal::Int(b)) => AVal::Int(match op {
            Add => a.checked_add(b).ok_or_else(overflow)?,
            Sub => a.checked_sub(b).ok_or_else(overflow)?,
            Mul => a.checked_mul(b).ok_or_else(overflow)?,
            Div | Rem if b == 0 => return Err(SpecErr::Memory("division by zero in annotation".into())),
            // ACSL integer division truncates toward zero like C
            Div => a / b,
            Rem => a % b,
            Shl => a
                .checked_shl(u32::try_from(b).map_err(|_| overflow())?)
                .ok_or_else(overflow)?,
            Shr => a >> u32::try_from(b).map_err(|_| overflow())?.min(127),
            Lt => (a < b) as i128,
            Le => (a <= b) as i128,
            Gt => (a > b) as i128,
            Ge => (a >= b) as i128,
            Eq => (a == b) as i128,
            Ne => (a != b) as i128,
            BitAnd => a & b,
            BitOr => a | b,
            BitXor => a ^ b,
            And | Or | Xor | Implies | Equiv => unreachable!("handled lazily"),
        }),
        (AVal::Ptr { buf, off }, AVal::Int(i)) if matches!(op, Add | Sub) => AVal::Ptr {
            buf,
            off: if op == Add { off + i } else { off - i },
        },
        (AVal::Int(i), AVal::Ptr { buf, off }) if op == Add => AVal::Ptr { buf, off: off + i },
        (AVal::Ptr { buf, off }, AVal::Range(lo, hi)) if op == Add => AVal::PtrRange {
            buf,
            lo: off + lo,
            hi: off + hi,
        },
        (AVal::Ptr { buf: b1, off: o1 }, AVal::Ptr { buf: b2, off: o2 }) => match op {
            Eq => AVal::Int((b1 == b2 && o1 == o2) as i128),
            Ne => AVal::Int((b1 != b2 || o1 != o2) as i128),
            Sub if b1 == b2 => AVal::Int(o1 - o2),
            Lt | Le | Gt | Ge if b1 == b2 => return binary(op, AVal::Int(o1), AVal::Int(o2)),
            _ => return invalid("comparison of pointers into different blocks"),
        },
        (AVal::Ptr { .. }, AVal::Int(0)) | (AVal::Int(0), AVal::Ptr { .. }) if matches!(op, Eq | Ne) => {
            AVal::Int((op == Ne) as i128)
        }
        _ => return invalid("ill-typed operands in annotation"),
    })
}
