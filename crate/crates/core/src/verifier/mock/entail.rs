// SPDX-License-Identifier: Apache-2.0

//! Bounded logical entailment between clauses at one point of interest,
//! independent of the function body.

use std::collections::{BTreeSet, HashMap};

use crate::acsl::AExpr;
use crate::frontend::{CType, Declaration, ForInit, StmtKind};
use crate::spec::ClauseKind;

use super::eval::{Scope, SpecCtx, SpecErr};
use super::interp::{zero_outward, Memory, Val};
use super::{for_each_index, free_names, index_program, param_domain, Input, MockDomain};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entailment {
    Holds,
    /// A state where every premise holds and the goal does not.
    Fails(String),
    Unsupported(String),
}

fn uses(e: &AExpr, f: &dyn Fn(&AExpr) -> bool) -> bool {
    let mut hit = false;
    e.walk(&mut |x| hit |= f(x));
    hit
}

/// Checks that `premises` imply `goal` on every state of the bounded domain.
///
/// For a function contract (`at_loop == false`) the state is the parameters
/// and, for postconditions, the return value; preconditions only draw on
/// other preconditions. At a loop head the state is the parameters and the
/// locals of `func`.
pub fn entails(
    decls: &[Declaration],
    func: &str,
    at_loop: bool,
    premises: &[(ClauseKind, AExpr)],
    goal: &(ClauseKind, AExpr),
    d: &MockDomain,
) -> Entailment {
    let prog = index_program(decls, &HashMap::new()).prog;
    let Some(f) = prog.funcs.get(func) else {
        return Entailment::Unsupported(format!("unknown function `{func}`"));
    };
    let premises: Vec<&AExpr> = premises
        .iter()
        .filter(|(k, _)| match goal.0 {
            ClauseKind::Requires => *k == ClauseKind::Requires,
            ClauseKind::Ensures => matches!(k, ClauseKind::Requires | ClauseKind::Ensures),
            _ => *k == goal.0,
        })
        .map(|(_, p)| p)
        .collect();
    let mut vars: Vec<(String, CType)> = f
        .sig
        .params
        .iter()
        .filter_map(|p| p.name.clone().map(|n| (n, p.ty.clone())))
        .collect();
    if at_loop {
        if let Some(def) = &f.def {
            def.walk(&mut |s| match &s.kind {
                StmtKind::Decl(vs)
                | StmtKind::For {
                    init: Some(ForInit::Decl(vs)),
                    ..
                } => vars.extend(vs.iter().map(|v| (v.name.clone(), v.ty.clone()))),
                _ => {}
            });
        }
    }
    let all: Vec<&AExpr> = premises.iter().copied().chain(std::iter::once(&goal.1)).collect();
    if at_loop
        && all
            .iter()
            .any(|e| uses(e, &|x| matches!(x, AExpr::Old(_) | AExpr::At(..))))
    {
        return Entailment::Unsupported("pre-state references at a loop head".into());
    }
    let mut names = BTreeSet::new();
    for e in &all {
        free_names(e, &mut Vec::new(), &mut names);
    }
    let mut used = Vec::new();
    for n in &names {
        match vars.iter().find(|(v, _)| v == n) {
            Some(v) => used.push(v.clone()),
            None if prog.enums.contains_key(n) => {}
            None => return Entailment::Unsupported(format!("`{n}` is not a parameter or local")),
        }
    }
    let mut domains = Vec::new();
    for (_, ty) in &used {
        match param_domain(ty, d) {
            Ok(dom) => domains.push(dom),
            Err(m) => return Entailment::Unsupported(m),
        }
    }
    let wants_result = goal.0 == ClauseKind::Ensures && all.iter().any(|e| uses(e, &|x| matches!(x, AExpr::Result)));
    if wants_result {
        let Some(t) = f.sig.ret.int_type() else {
            return Entailment::Unsupported("non-integer return value".into());
        };
        let lo = (d.int_min as i128).max(t.min());
        let hi = (d.int_max as i128).min(t.max());
        domains.push(zero_outward(lo, hi).into_iter().map(Input::Scalar).collect());
    }
    let total = domains.iter().try_fold(1usize, |acc, x| acc.checked_mul(x.len()));
    if total.is_none_or(|t| t > d.input_cap) {
        return Entailment::Unsupported("state space too large".into());
    }
    let params: Vec<String> = f.sig.params.iter().filter_map(|p| p.name.clone()).collect();
    let globals = Scope::new();
    let sizes: Vec<usize> = domains.iter().map(Vec::len).collect();
    let mut verdict = Entailment::Holds;
    let check = |idx: &[usize]| -> Result<Option<String>, String> {
        let mut mem = Memory::default();
        let mut scope = Scope::new();
        let mut desc = Vec::new();
        for (k, (name, ty)) in used.iter().enumerate() {
            let input = &domains[k][idx[k]];
            desc.push(input.describe(name));
            let val = match input {
                Input::Scalar(x) => Val::Int(*x),
                Input::Buf(cells) => Val::Ptr {
                    buf: mem.alloc(cells.iter().map(|c| Val::Int(*c)).collect()),
                    off: 0,
                },
            };
            let cell = mem.alloc(vec![val]);
            scope.insert(name.clone(), (cell, ty.clone()));
        }
        let result = wants_result.then(|| match &domains[used.len()][idx[used.len()]] {
            Input::Scalar(x) => Val::Int(*x),
            Input::Buf(_) => Val::Undef,
        });
        if let Some(Val::Int(r)) = result {
            desc.push(format!("\\result = {r}"));
        }
        let scopes = [scope];
        let ctx = SpecCtx {
            cur: &mem,
            pre: Some(&mem),
            scopes: &scopes,
            globals: &globals,
            enums: &prog.enums,
            result,
            params: &params,
            params_in_pre: goal.0 == ClauseKind::Ensures,
            quant_window: d.quant_window as i128,
        };
        for p in &premises {
            match ctx.holds(p) {
                Ok(true) => {}
                Ok(false) | Err(SpecErr::Memory(_)) => return Ok(None),
                Err(SpecErr::Invalid(m)) => return Err(m),
            }
        }
        match ctx.holds(&goal.1) {
            Ok(true) => Ok(None),
            Ok(false) | Err(SpecErr::Memory(_)) => Ok(Some(if desc.is_empty() {
                "counterexample: (no variables)".into()
            } else {
                format!("counterexample: {}", desc.join(", "))
            })),
            Err(SpecErr::Invalid(m)) => Err(m),
        }
    };
    for_each_index(&sizes, |idx| match check(idx) {
        Ok(None) => true,
        Ok(Some(cex)) => {
            verdict = Entailment::Fails(cex);
            false
        }
        Err(m) => {
            verdict = Entailment::Unsupported(m);
            false
        }
    });
    // no variables at all: a single empty state
    if sizes.is_empty() {
        verdict = match check(&[]) {
            Ok(None) => Entailment::Holds,
            Ok(Some(c)) => Entailment::Fails(c),
            Err(m) => Entailment::Unsupported(m),
        };
    }
    verdict
}
