// SPDX-License-Identifier: Apache-2.0

//! Scope-aware collection of the names a declaration refers to.

use std::collections::BTreeSet;

use super::ast::*;
use super::parser::collect_idents;

pub(crate) fn referenced_names(
    kind: &DeclKind,
    name: &str,
    also: &[String],
    item: &Item,
    spec_refs: &[String],
) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = spec_refs.iter().cloned().collect();
    match item {
        Item::Function(f) => {
            sig_refs(&f.sig, &mut out);
            let params = f.sig.params.iter().filter_map(|p| p.name.clone()).collect();
            let mut scopes = vec![params];
            block_refs(&f.body, &mut scopes, &mut out);
        }
        Item::Prototype(sig) => sig_refs(sig, &mut out),
        Item::Globals(vars) => {
            for v in vars {
                let mut v_refs = Vec::new();
                for d in v.array_dims.iter().flatten() {
                    collect_idents(d, &mut v_refs);
                }
                if let Some(init) = &v.init {
                    collect_idents(init, &mut v_refs);
                }
                out.extend(v_refs);
            }
        }
        Item::Typedef { .. } | Item::Record { .. } | Item::Enum { .. } => {}
    }
    let keeps_self = matches!(
        kind,
        DeclKind::FunctionDef | DeclKind::StructOrUnionDef | DeclKind::TypeDef
    );
    if !keeps_self {
        out.retain(|n| n != name && !also.contains(n));
    }
    out
}

fn sig_refs(sig: &FunctionSig, out: &mut BTreeSet<String>) {
    out.extend(sig.ret_spec.refs.iter().cloned());
    for p in &sig.params {
        out.extend(p.spec.refs.iter().cloned());
    }
}

fn bound(scopes: &[BTreeSet<String>], n: &str) -> bool {
    scopes.iter().any(|s| s.contains(n))
}

fn expr_refs(e: &Expr, scopes: &[BTreeSet<String>], out: &mut BTreeSet<String>) {
    let mut v = Vec::new();
    collect_idents(e, &mut v);
    out.extend(v.into_iter().filter(|n| !bound(scopes, n)));
}

fn vars_refs(vars: &[VarDecl], scopes: &mut [BTreeSet<String>], out: &mut BTreeSet<String>) {
    for v in vars {
        out.extend(v.spec.refs.iter().cloned());
        for d in v.array_dims.iter().flatten() {
            expr_refs(d, scopes, out);
        }
        scopes.last_mut().unwrap().insert(v.name.clone());
        if let Some(init) = &v.init {
            expr_refs(init, scopes, out);
        }
    }
}

fn block_refs(b: &Block, scopes: &mut Vec<BTreeSet<String>>, out: &mut BTreeSet<String>) {
    scopes.push(BTreeSet::new());
    for s in &b.stmts {
        stmt_refs(s, scopes, out);
    }
    scopes.pop();
}

fn stmt_refs(s: &Stmt, scopes: &mut Vec<BTreeSet<String>>, out: &mut BTreeSet<String>) {
    match &s.kind {
        StmtKind::Block(b) => block_refs(b, scopes, out),
        StmtKind::Decl(vars) => vars_refs(vars, scopes, out),
        StmtKind::For { init, cond, step, body } => {
            scopes.push(BTreeSet::new());
            match init {
                Some(ForInit::Decl(vars)) => vars_refs(vars, scopes, out),
                Some(ForInit::Expr(e)) => expr_refs(e, scopes, out),
                None => {}
            }
            for e in cond.iter().chain(step.iter()) {
                expr_refs(e, scopes, out);
            }
            stmt_refs(body, scopes, out);
            scopes.pop();
        }
        _ => {
            for e in s.exprs() {
                expr_refs(e, scopes, out);
            }
            for c in s.children() {
                stmt_refs(c, scopes, out);
            }
        }
    }
}
