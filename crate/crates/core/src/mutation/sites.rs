// SPDX-License-Identifier: Apache-2.0

//! Collection of mutable syntax sites and their rewrites.

use std::collections::BTreeSet;

use crate::frontend::{BinOp, Block, CType, Declaration, Expr, ExprKind, ForInit, Span, Stmt, StmtKind, UnOp, VarDecl};

use super::catalog::{MutationOperator, Rule};

/// A text replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Default)]
struct Facts {
    binops: Vec<(BinOp, Span)>,
    incdec: Vec<(bool, Span)>,
    compound: Vec<(BinOp, Span)>,
    /// Rvalue use of an integer variable and the other integer variables in scope.
    operands: Vec<(Span, Vec<String>)>,
    indices: Vec<Span>,
    literals: Vec<(Span, i128)>,
    expr_stmts: Vec<Span>,
    /// Conditions; `true` for `if`.
    conds: Vec<(Span, bool)>,
    /// From the end of the then-branch to the end of the else-branch.
    elses: Vec<Span>,
    loop_breaks: Vec<Span>,
    returns: Vec<Span>,
    returned_assigns: Vec<Span>,
    inits: Vec<Span>,
    local_types: Vec<(Span, String)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Breakable {
    Loop,
    Switch,
}

struct Collector<'a> {
    src: &'a str,
    facts: Facts,
    scopes: Vec<Vec<(String, bool)>>,
    breakables: Vec<Breakable>,
    returned: BTreeSet<String>,
    seen_specs: BTreeSet<Span>,
}

impl<'a> Collector<'a> {
    fn lookup(&self, name: &str) -> Option<bool> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, int)| *int)
    }

    fn int_vars(&self) -> Vec<String> {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for s in &self.scopes {
            for (n, _) in s {
                names.insert(n);
            }
        }
        names
            .into_iter()
            .filter(|n| self.lookup(n) == Some(true))
            .map(str::to_string)
            .collect()
    }

    fn declare(&mut self, v: &VarDecl) {
        if let Some(init) = &v.init {
            self.expr(init, false);
            if v.ty.is_integer() && !matches!(init.kind, ExprKind::InitList(_)) {
                self.facts.inits.push(init.span);
            }
        }
        if matches!(v.ty, CType::Int(_)) && self.seen_specs.insert(v.spec.span) {
            let text = v
                .spec
                .span
                .text(self.src)
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ");
            self.facts.local_types.push((v.spec.span, text));
        }
        let int = v.ty.is_integer();
        self.scopes.last_mut().expect("scope").push((v.name.clone(), int));
    }

    fn expr(&mut self, e: &Expr, lvalue: bool) {
        match &e.kind {
            ExprKind::Int(v) => self.facts.literals.push((e.span, *v)),
            ExprKind::Ident(n) => {
                if !lvalue && self.lookup(n) == Some(true) {
                    let alts: Vec<String> = self.int_vars().into_iter().filter(|x| x != n).collect();
                    if !alts.is_empty() {
                        self.facts.operands.push((e.span, alts));
                    }
                }
            }
            ExprKind::Unary { op, op_span, operand } => {
                match op {
                    UnOp::PreInc | UnOp::PostInc => self.facts.incdec.push((true, *op_span)),
                    UnOp::PreDec | UnOp::PostDec => self.facts.incdec.push((false, *op_span)),
                    _ => {}
                }
                let lv = matches!(
                    op,
                    UnOp::PreInc | UnOp::PostInc | UnOp::PreDec | UnOp::PostDec | UnOp::AddrOf
                );
                self.expr(operand, lv);
            }
            ExprKind::Binary { op, op_span, lhs, rhs } => {
                self.facts.binops.push((*op, *op_span));
                self.expr(lhs, false);
                self.expr(rhs, false);
            }
            ExprKind::Assign { op, op_span, lhs, rhs } => {
                match op {
                    Some(b) => self.facts.compound.push((*b, *op_span)),
                    None => {
                        if let ExprKind::Ident(n) = &lhs.kind {
                            if self.returned.contains(n) {
                                self.facts.returned_assigns.push(rhs.span);
                            }
                        }
                    }
                }
                self.expr(lhs, true);
                self.expr(rhs, false);
            }
            ExprKind::Cond(a, b, c) => {
                self.expr(a, false);
                self.expr(b, false);
                self.expr(c, false);
            }
            ExprKind::Call { args, .. } => {
                for a in args {
                    self.expr(a, false);
                }
            }
            ExprKind::Index(base, idx) => {
                self.facts.indices.push(idx.span);
                self.expr(base, lvalue);
                self.expr(idx, false);
            }
            ExprKind::Member { base, .. } => self.expr(base, lvalue),
            ExprKind::Cast(_, inner) => self.expr(inner, false),
            ExprKind::Comma(a, b) => {
                self.expr(a, false);
                self.expr(b, false);
            }
            ExprKind::InitList(items) => {
                for i in items {
                    self.expr(i, false);
                }
            }
            ExprKind::Char(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::SizeofType(_)
            | ExprKind::SizeofExpr(_) => {}
        }
    }

    fn block(&mut self, b: &Block) {
        self.scopes.push(Vec::new());
        for s in &b.stmts {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(b) => self.block(b),
            StmtKind::Decl(vars) => {
                for v in vars {
                    self.declare(v);
                }
            }
            StmtKind::Expr(e) => {
                self.facts.expr_stmts.push(s.span);
                self.expr(e, false);
            }
            StmtKind::Empty | StmtKind::Continue => {}
            StmtKind::If { cond, then, els } => {
                self.facts.conds.push((cond.span, true));
                self.expr(cond, false);
                self.stmt(then);
                if let Some(e) = els {
                    self.facts.elses.push(Span::new(then.span.end, e.span.end));
                    self.stmt(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.facts.conds.push((cond.span, false));
                self.expr(cond, false);
                self.in_breakable(Breakable::Loop, body);
            }
            StmtKind::DoWhile { body, cond } => {
                self.in_breakable(Breakable::Loop, body);
                self.facts.conds.push((cond.span, false));
                self.expr(cond, false);
            }
            StmtKind::For { init, cond, step, body } => {
                self.scopes.push(Vec::new());
                match init {
                    Some(ForInit::Decl(vars)) => {
                        for v in vars {
                            self.declare(v);
                        }
                    }
                    Some(ForInit::Expr(e)) => self.expr(e, false),
                    None => {}
                }
                if let Some(c) = cond {
                    self.facts.conds.push((c.span, false));
                    self.expr(c, false);
                }
                if let Some(st) = step {
                    self.expr(st, false);
                }
                self.in_breakable(Breakable::Loop, body);
                self.scopes.pop();
            }
            StmtKind::Switch { cond, body } => {
                self.expr(cond, false);
                self.in_breakable(Breakable::Switch, body);
            }
            StmtKind::Case { body, .. } | StmtKind::Default { body } => self.stmt(body),
            StmtKind::Break => {
                if self.breakables.last() == Some(&Breakable::Loop) {
                    self.facts.loop_breaks.push(s.span);
                }
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.facts.returns.push(e.span);
                    self.expr(e, false);
                }
            }
        }
    }

    fn in_breakable(&mut self, b: Breakable, body: &Stmt) {
        self.breakables.push(b);
        self.stmt(body);
        self.breakables.pop();
    }
}

fn collect(src: &str, decls: &[Declaration]) -> Facts {
    let mut c = Collector {
        src,
        facts: Facts::default(),
        scopes: Vec::new(),
        breakables: Vec::new(),
        returned: BTreeSet::new(),
        seen_specs: BTreeSet::new(),
    };
    for d in decls {
        let Some(f) = d.function() else { continue };
        c.returned.clear();
        f.walk(&mut |s| {
            if let StmtKind::Return(Some(Expr {
                kind: ExprKind::Ident(n),
                ..
            })) = &s.kind
            {
                c.returned.insert(n.clone());
            }
        });
        let params = f
            .sig
            .params
            .iter()
            .filter_map(|p| Some((p.name.clone()?, p.ty.is_integer())))
            .collect();
        c.scopes.push(params);
        c.block(&f.body);
        c.scopes.pop();
    }
    c.facts
}

fn literal_text(v: i128, suffix: &str) -> String {
    if v < 0 {
        format!("(-{}{suffix})", -v)
    } else {
        format!("{v}{suffix}")
    }
}

fn plus(src: &str, span: Span, delta: i64) -> String {
    let inner = span.text(src);
    if delta < 0 {
        format!("({inner}) - {}", -delta)
    } else {
        format!("({inner}) + {delta}")
    }
}

/// Every edit `op` can make in `src`, in source order.
pub fn edits_for(op: &MutationOperator, src: &str, decls: &[Declaration]) -> Vec<Edit> {
    let f = collect(src, decls);
    let from = op.from.as_deref().unwrap_or("");
    let to = op.to.as_deref().unwrap_or("");
    let delta = op.delta.unwrap_or(0);
    let e = |span: Span, text: String| Edit { span, text };
    let mut out: Vec<Edit> = match op.rule {
        Rule::BinaryOp => f
            .binops
            .iter()
            .filter(|(b, _)| b.symbol() == from)
            .map(|(_, s)| e(*s, to.to_string()))
            .collect(),
        Rule::Incdec => f
            .incdec
            .iter()
            .filter(|(inc, _)| (if *inc { "++" } else { "--" }) == from)
            .map(|(_, s)| e(*s, to.to_string()))
            .collect(),
        Rule::CompoundAssign => f
            .compound
            .iter()
            .filter(|(_, s)| s.text(src) == from)
            .map(|(_, s)| e(*s, to.to_string()))
            .collect(),
        Rule::OperandReplace => f
            .operands
            .iter()
            .flat_map(|(s, alts)| alts.iter().map(move |a| e(*s, a.clone())))
            .collect(),
        Rule::IndexShift => f.indices.iter().map(|s| e(*s, plus(src, *s, delta))).collect(),
        Rule::ConstAdd | Rule::ConstZero => f
            .literals
            .iter()
            .filter_map(|(s, v)| {
                let text = s.text(src);
                let suffix: String = text
                    .chars()
                    .rev()
                    .take_while(|c| "uUlL".contains(*c))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .rev()
                    .collect();
                match op.rule {
                    Rule::ConstZero if *v != 0 => Some(e(*s, format!("0{suffix}"))),
                    Rule::ConstAdd => Some(e(*s, literal_text(v + delta as i128, &suffix))),
                    _ => None,
                }
            })
            .collect(),
        Rule::StmtDelete => f.expr_stmts.iter().map(|s| e(*s, ";".into())).collect(),
        Rule::StmtDuplicate => f
            .expr_stmts
            .iter()
            .map(|s| e(*s, format!("{{ {0} {0} }}", s.text(src))))
            .collect(),
        Rule::CondNegate => f
            .conds
            .iter()
            .map(|(s, _)| e(*s, format!("!({})", s.text(src))))
            .collect(),
        Rule::IfConst => f
            .conds
            .iter()
            .filter(|(_, is_if)| *is_if)
            .map(|(s, _)| e(*s, delta.to_string()))
            .collect(),
        Rule::ElseRemove => f.elses.iter().map(|s| e(*s, String::new())).collect(),
        Rule::BreakToContinue => f.loop_breaks.iter().map(|s| e(*s, "continue;".into())).collect(),
        Rule::ReturnZero => f
            .returns
            .iter()
            .filter(|s| s.text(src).trim() != "0")
            .map(|s| e(*s, "0".into()))
            .collect(),
        Rule::ReturnAdd => f.returns.iter().map(|s| e(*s, plus(src, *s, delta))).collect(),
        Rule::ReturnedAssignAdd => f.returned_assigns.iter().map(|s| e(*s, plus(src, *s, delta))).collect(),
        Rule::InitZero => f
            .inits
            .iter()
            .filter(|s| s.text(src).trim() != "0")
            .map(|s| e(*s, "0".into()))
            .collect(),
        Rule::InitAdd => f.inits.iter().map(|s| e(*s, plus(src, *s, delta))).collect(),
        Rule::TypeReplace => f
            .local_types
            .iter()
            .filter(|(_, t)| t == from)
            .map(|(s, _)| e(*s, to.to_string()))
            .collect(),
    };
    out.retain(|x| x.span.text(src) != x.text);
    out.sort_by_key(|x| (x.span, x.text.clone()));
    out.dedup();
    out
}
