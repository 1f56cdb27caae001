// SPDX-License-Identifier: Apache-2.0

//! Deterministic bounded verifier.
//!
//! Each function that owns a clause under check is executed on every input
//! of a small domain (scalars in `[int_min, int_max]`, buffers up to
//! `array_len_max` cells). Inputs rejected by the function's preconditions
//! are skipped; inputs that trigger a runtime error in the program are
//! treated as outside the domain. Calls to functions that write no
//! caller-visible memory go through the callee contract: every return value
//! admitted by its postconditions is explored. Other callees are executed.
//! A clause is Proved when no explored input violates it.

mod entail;
mod eval;
mod interp;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::acsl::{parse_predicate, split_clauses, AExpr, ClauseKind};
use crate::frontend::InstrumentedSource;
use crate::frontend::{
    const_eval, parse_text, AnnotBlock, CType, DeclKind, Declaration, ExprKind, ForInit, FunctionDef, Item, Stmt,
    StmtKind, UnOp,
};
use crate::spec::ClauseId;

use super::{VerdictStatus, Verifier, VerifierError, VerifierVerdict};
use eval::Scope;
use interp::{zero_outward, Checks, FuncInfo, LClause, Program, Run, Stop, Val};

pub use entail::{entails, Entailment};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockDomain {
    pub int_min: i64,
    pub int_max: i64,
    /// Range of buffer cell values.
    pub elem_min: i64,
    pub elem_max: i64,
    pub array_len_max: usize,
    pub loop_cap: usize,
    /// Choice vectors explored per input before giving up.
    pub path_cap: usize,
    /// Inputs per function before giving up.
    pub input_cap: usize,
    /// Range `[-w, w]` for quantified variables without syntactic bounds.
    pub quant_window: i64,
}

impl Default for MockDomain {
    fn default() -> Self {
        Self {
            int_min: -8,
            int_max: 8,
            elem_min: -1,
            elem_max: 1,
            array_len_max: 3,
            loop_cap: 64,
            path_cap: 256,
            input_cap: 250_000,
            quant_window: 16,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockVerifier {
    pub domain: MockDomain,
}

impl MockVerifier {
    pub fn new(domain: MockDomain) -> Self {
        Self { domain }
    }
}

/// One concrete value of a parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Input {
    Scalar(i128),
    Buf(Vec<i128>),
}

impl Input {
    fn describe(&self, name: &str) -> String {
        match self {
            Input::Scalar(v) => format!("{name} = {v}"),
            Input::Buf(cells) => format!(
                "{name} = {{{}}}",
                cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

/// Values a parameter of type `ty` ranges over, in enumeration order.
pub(crate) fn param_domain(ty: &CType, d: &MockDomain) -> Result<Vec<Input>, String> {
    if let Some(t) = ty.int_type() {
        let lo = (d.int_min as i128).max(t.min());
        let hi = (d.int_max as i128).min(t.max());
        return Ok(zero_outward(lo, hi).into_iter().map(Input::Scalar).collect());
    }
    let Some(elem) = ty.element() else {
        return Err("parameter of unsupported type".into());
    };
    let Some(t) = elem.int_type() else {
        return Err("pointer parameter to a non-integer type".into());
    };
    let vals = zero_outward((d.elem_min as i128).max(t.min()), (d.elem_max as i128).min(t.max()));
    let mut out = Vec::new();
    for len in 0..=d.array_len_max {
        for_each_index(&vec![vals.len(); len], |idx| {
            out.push(Input::Buf(idx.iter().map(|i| vals[*i]).collect()));
            true
        });
    }
    Ok(out)
}

/// Iterates the cartesian product of `sizes`, first position outermost.
pub(crate) fn for_each_index(sizes: &[usize], mut f: impl FnMut(&[usize]) -> bool) {
    if sizes.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; sizes.len()];
    loop {
        if !f(&idx) {
            return;
        }
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

struct Indexed {
    prog: Program,
    /// Clauses found in the text, with the function that owns them.
    owner: HashMap<ClauseId, String>,
    /// Clauses found but statically unusable.
    invalid: HashMap<ClauseId, String>,
}

const LOGIC_BUILTINS: &[&str] = &["\\valid", "\\valid_read", "\\separated", "\\abs", "\\max", "\\min"];

/// Names a predicate reads that are not bound inside it.
fn free_names(e: &AExpr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match e {
        AExpr::Var(n) => {
            if !bound.contains(n) {
                out.insert(n.clone());
            }
        }
        AExpr::Quant { vars, body, .. } => {
            let k = bound.len();
            bound.extend(vars.iter().cloned());
            free_names(body, bound, out);
            bound.truncate(k);
        }
        AExpr::Let(n, v, body) => {
            free_names(v, bound, out);
            bound.push(n.clone());
            free_names(body, bound, out);
            bound.pop();
        }
        AExpr::Old(x)
        | AExpr::At(x, _)
        | AExpr::Unary(_, x)
        | AExpr::Deref(x)
        | AExpr::Member(x, _)
        | AExpr::Cast(_, x) => free_names(x, bound, out),
        AExpr::Binary(_, a, b) | AExpr::Index(a, b) | AExpr::Range(a, b) => {
            free_names(a, bound, out);
            free_names(b, bound, out);
        }
        AExpr::Cond(a, b, c) => {
            free_names(a, bound, out);
            free_names(b, bound, out);
            free_names(c, bound, out);
        }
        AExpr::App(_, args) => args.iter().for_each(|a| free_names(a, bound, out)),
        AExpr::Int(_) | AExpr::Bool(_) | AExpr::Result => {}
    }
}

/// Static well-formedness of a clause at its attachment point.
fn static_check(kind: ClauseKind, p: &AExpr, visible: &HashSet<String>, void_fn: bool) -> Result<(), String> {
    let mut names = BTreeSet::new();
    free_names(p, &mut Vec::new(), &mut names);
    if let Some(n) = names.iter().find(|n| !visible.contains(*n)) {
        return Err(format!("unknown identifier `{n}`"));
    }
    let mut err = None;
    p.walk(&mut |x| match x {
        AExpr::Result if kind != ClauseKind::Ensures || void_fn => {
            err.get_or_insert_with(|| format!("\\result is not allowed in a {kind} clause"));
        }
        AExpr::Old(_) if kind == ClauseKind::Requires => {
            err.get_or_insert_with(|| "\\old is not allowed in a precondition".to_string());
        }
        AExpr::Member(..) => {
            err.get_or_insert_with(|| "struct member access is not supported".to_string());
        }
        AExpr::App(f, _) if !LOGIC_BUILTINS.contains(&f.as_str()) => {
            err.get_or_insert_with(|| format!("unknown logic function `{f}`"));
        }
        _ => {}
    });
    err.map_or(Ok(()), Err)
}

fn local_names(f: &FunctionDef) -> HashSet<String> {
    let mut out: HashSet<String> = f.sig.params.iter().filter_map(|p| p.name.clone()).collect();
    f.walk(&mut |s| match &s.kind {
        StmtKind::Decl(vars)
        | StmtKind::For {
            init: Some(ForInit::Decl(vars)),
            ..
        } => out.extend(vars.iter().map(|v| v.name.clone())),
        _ => {}
    });
    out
}

/// Whether `f` writes memory outside its own locals.
fn writes_nonlocal(f: &FunctionDef) -> bool {
    let locals = local_names(f);
    let mut found = false;
    let mut check = |e: &crate::frontend::Expr| {
        e.walk(&mut |x| {
            let target = match &x.kind {
                ExprKind::Assign { lhs, .. } => Some(lhs.as_ref()),
                ExprKind::Unary {
                    op: UnOp::PreInc | UnOp::PreDec | UnOp::PostInc | UnOp::PostDec,
                    operand,
                    ..
                } => Some(operand.as_ref()),
                _ => None,
            };
            if let Some(t) = target {
                match &t.kind {
                    ExprKind::Ident(n) if locals.contains(n) => {}
                    _ => found = true,
                }
            }
        })
    };
    f.walk(&mut |s| s.exprs().into_iter().for_each(&mut check));
    found
}

fn called_names(f: &FunctionDef) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    f.walk(&mut |s| {
        for e in s.exprs() {
            e.walk(&mut |x| {
                if let Some(n) = x.called_name() {
                    out.insert(n.to_string());
                }
            });
        }
    });
    out
}

struct Indexer<'a> {
    ids: &'a HashMap<String, ClauseId>,
    owner: HashMap<ClauseId, String>,
    invalid: HashMap<ClauseId, String>,
    globals: HashSet<String>,
}

impl Indexer<'_> {
    /// Parses the clauses of `annots`; `allowed` filters kinds valid here.
    fn clauses(
        &mut self,
        annots: &[AnnotBlock],
        owner: &str,
        visible: &HashSet<String>,
        void_fn: bool,
        allowed: &[ClauseKind],
    ) -> Vec<LClause> {
        let mut out = Vec::new();
        for a in annots {
            for raw in split_clauses(&a.text).into_iter().flatten() {
                let id = raw.label.as_ref().and_then(|l| self.ids.get(l)).copied();
                let pred = parse_predicate(&raw.predicate).map_err(|e| e.to_string());
                if let Some(id) = id {
                    self.owner.insert(id, owner.to_string());
                    let problem = if !allowed.contains(&raw.kind) {
                        Some(format!("{} clause is misplaced", raw.kind))
                    } else {
                        match &pred {
                            Err(e) => Some(e.clone()),
                            Ok(p) => {
                                let mut vis = visible.clone();
                                vis.extend(self.globals.iter().cloned());
                                static_check(raw.kind, p, &vis, void_fn).err()
                            }
                        }
                    };
                    if let Some(m) = problem {
                        self.invalid.insert(id, m);
                    }
                }
                if allowed.contains(&raw.kind) {
                    out.push(LClause {
                        kind: raw.kind,
                        pred,
                        id,
                    });
                }
            }
        }
        out
    }
}

fn index_program(decls: &[Declaration], ids: &HashMap<String, ClauseId>) -> Indexed {
    let mut prog = Program::default();
    let mut globals = HashSet::new();
    for d in decls {
        match &d.item {
            Item::Globals(vars) => {
                for v in vars {
                    globals.insert(v.name.clone());
                    if !v.spec.is_extern {
                        prog.globals.push(v.clone());
                    }
                }
            }
            Item::Enum { enumerators, .. } => {
                let mut next = 0i128;
                for en in enumerators {
                    if let Some(e) = &en.value {
                        let lookup = |n: &str| prog.enums.get(n).copied();
                        next = const_eval(e, &lookup).unwrap_or(next);
                    }
                    prog.enums.insert(en.name.clone(), next);
                    globals.insert(en.name.clone());
                    next += 1;
                }
            }
            _ => {}
        }
    }
    let mut ix = Indexer {
        ids,
        owner: HashMap::new(),
        invalid: HashMap::new(),
        globals,
    };
    for d in decls {
        let Some(sig) = d.signature() else {
            // annotations on non-functions are never checked
            ix.clauses(&d.annots, &d.name, &HashSet::new(), true, &[]);
            continue;
        };
        let params: HashSet<String> = sig.params.iter().filter_map(|p| p.name.clone()).collect();
        let void_fn = sig.ret == CType::Void;
        let contract = ix.clauses(
            &d.annots,
            &d.name,
            &params,
            void_fn,
            &[ClauseKind::Requires, ClauseKind::Ensures],
        );
        let (requires, ensures) = contract.into_iter().partition(|c| c.kind == ClauseKind::Requires);
        let def = d.function().cloned();
        if let Some(f) = &def {
            let locals = local_names(f);
            let mut visit = |s: &Stmt, ix: &mut Indexer| {
                let allowed: &[ClauseKind] = if s.is_loop() {
                    &[ClauseKind::LoopInvariant, ClauseKind::Assert]
                } else {
                    &[ClauseKind::Assert]
                };
                let cs = ix.clauses(&s.annots, &d.name, &locals, void_fn, allowed);
                let (inv, asr): (Vec<_>, Vec<_>) = cs.into_iter().partition(|c| c.kind == ClauseKind::LoopInvariant);
                if !inv.is_empty() {
                    prog.loop_invs.entry(s.span).or_default().extend(inv);
                }
                if !asr.is_empty() {
                    prog.asserts.entry(s.span).or_default().extend(asr);
                }
                if let StmtKind::Block(b) = &s.kind {
                    let t = ix.clauses(&b.trailing_annots, &d.name, &locals, void_fn, &[ClauseKind::Assert]);
                    if !t.is_empty() {
                        prog.trailing.entry(b.span).or_default().extend(t);
                    }
                }
            };
            let mut all = Vec::new();
            f.walk(&mut |s| all.push(s));
            for s in all {
                visit(s, &mut ix);
            }
            let t = ix.clauses(
                &f.body.trailing_annots,
                &d.name,
                &locals,
                void_fn,
                &[ClauseKind::Assert],
            );
            if !t.is_empty() {
                prog.trailing.entry(f.body.span).or_default().extend(t);
            }
        }
        prog.funcs.insert(
            d.name.clone(),
            FuncInfo {
                sig: sig.clone(),
                def,
                requires,
                ensures,
                pure_fn: true,
            },
        );
    }
    // purity: no non-local writes, transitively through defined callees
    let mut impure: HashSet<String> = prog
        .funcs
        .iter()
        .filter(|(_, f)| f.def.as_ref().is_some_and(writes_nonlocal))
        .map(|(n, _)| n.clone())
        .collect();
    let calls: HashMap<String, BTreeSet<String>> = prog
        .funcs
        .iter()
        .filter_map(|(n, f)| f.def.as_ref().map(|d| (n.clone(), called_names(d))))
        .collect();
    loop {
        let before = impure.len();
        for (n, cs) in &calls {
            if cs.iter().any(|c| impure.contains(c)) {
                impure.insert(n.clone());
            }
        }
        if impure.len() == before {
            break;
        }
    }
    for n in impure {
        if let Some(f) = prog.funcs.get_mut(&n) {
            f.pure_fn = false;
        }
    }
    Indexed {
        prog,
        owner: ix.owner,
        invalid: ix.invalid,
    }
}

fn clause_ids_in(f: &FuncInfo, prog: &Program) -> Vec<ClauseId> {
    let mut out: Vec<ClauseId> = f.ensures.iter().filter_map(|c| c.id).collect();
    if let Some(def) = &f.def {
        let mut spans = Vec::new();
        def.walk(&mut |s| {
            spans.push(s.span);
            if let StmtKind::Block(b) = &s.kind {
                spans.push(b.span);
            }
        });
        spans.push(def.body.span);
        for sp in spans {
            for m in [&prog.loop_invs, &prog.asserts, &prog.trailing] {
                if let Some(cs) = m.get(&sp) {
                    out.extend(cs.iter().filter_map(|c| c.id));
                }
            }
        }
        for callee in called_names(def) {
            if let Some(g) = prog.funcs.get(&callee) {
                out.extend(g.requires.iter().filter_map(|c| c.id));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn analyze(prog: &Program, cfg: &MockDomain, f: &FuncInfo, relevant: &[ClauseId], checks: &mut Checks) {
    let mark_invalid = |checks: &mut Checks, m: &str| {
        for id in relevant {
            let o = checks.outcomes.entry(*id).or_default();
            if o.violated.is_none() {
                o.invalid.get_or_insert_with(|| m.to_string());
            }
        }
    };
    let mut domains = Vec::new();
    let mut names = Vec::new();
    for p in &f.sig.params {
        match param_domain(&p.ty, cfg) {
            Ok(d) => domains.push(d),
            Err(m) => return mark_invalid(checks, &m),
        }
        names.push(p.name.clone().unwrap_or_else(|| "_".into()));
    }
    let sizes: Vec<usize> = domains.iter().map(Vec::len).collect();
    let total = sizes.iter().try_fold(1usize, |a, s| a.checked_mul(*s));
    let mut timed_out = total.is_none_or(|t| t > cfg.input_cap);
    let mut unsupported: Option<String> = None;
    if !timed_out {
        for_each_index(&sizes, |idx| {
            let inputs: Vec<&Input> = idx.iter().enumerate().map(|(k, i)| &domains[k][*i]).collect();
            checks.input_desc = if inputs.is_empty() {
                "(no parameters)".into()
            } else {
                inputs
                    .iter()
                    .zip(&names)
                    .map(|(v, n)| v.describe(n))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let mut prefix = Vec::new();
            let mut paths = 0;
            loop {
                let mut run = Run::new(prog, cfg, checks, prefix);
                let r = run.init_globals().and_then(|_| {
                    let mut scope = Scope::new();
                    for ((p, v), n) in f.sig.params.iter().zip(&inputs).zip(&names) {
                        let val = match v {
                            Input::Scalar(x) => Val::Int(*x),
                            Input::Buf(cells) => {
                                let buf = run.mem.alloc(cells.iter().map(|c| Val::Int(*c)).collect());
                                Val::Ptr { buf, off: 0 }
                            }
                        };
                        let cell = run.mem.alloc(vec![val]);
                        scope.insert(n.clone(), (cell, p.ty.clone()));
                    }
                    run.run_entry(f, scope)
                });
                let mut trail = std::mem::take(&mut run.trail);
                match r {
                    Ok(()) | Err(Stop::Rte(_)) | Err(Stop::Infeasible) => {}
                    Err(Stop::Timeout(_)) => {
                        timed_out = true;
                        break;
                    }
                    Err(Stop::Unsupported(m)) => {
                        unsupported = Some(m);
                        return false;
                    }
                }
                paths += 1;
                let mut next = None;
                while let Some((c, n)) = trail.pop() {
                    if c + 1 < n {
                        let mut p: Vec<usize> = trail.iter().map(|t| t.0).collect();
                        p.push(c + 1);
                        next = Some(p);
                        break;
                    }
                }
                match next {
                    Some(p) if paths < cfg.path_cap => prefix = p,
                    Some(_) => {
                        timed_out = true;
                        break;
                    }
                    None => break,
                }
            }
            !relevant.iter().all(|id| checks.settled(*id))
        });
    }
    if let Some(m) = unsupported {
        return mark_invalid(checks, &m);
    }
    if timed_out {
        for id in relevant {
            checks.outcomes.entry(*id).or_default().timeout = true;
        }
    }
}

impl Verifier for MockVerifier {
    fn name(&self) -> &str {
        "mock"
    }

    fn verify(&self, program: &InstrumentedSource) -> Result<Vec<VerifierVerdict>, VerifierError> {
        let ids: HashMap<String, ClauseId> = program.clause_labels.iter().map(|(id, l)| (l.clone(), *id)).collect();
        let verdict = |id: ClauseId, status, diagnostic: String| VerifierVerdict {
            clause_id: id,
            status,
            diagnostic,
            goal_name: program.clause_labels[&id].clone(),
        };
        let decls = match parse_text(&program.text, &BTreeSet::new()) {
            Ok(d) => d,
            Err(e) => {
                return Ok(program
                    .clause_labels
                    .keys()
                    .map(|id| verdict(*id, VerdictStatus::Invalid, format!("program does not parse: {e}")))
                    .collect())
            }
        };
        let ix = index_program(&decls, &ids);
        let mut checks = Checks::default();
        let mut requires_with_callers: BTreeSet<ClauseId> = BTreeSet::new();
        // deterministic order: declaration order
        for d in decls.iter().filter(|d| d.kind == DeclKind::FunctionDef) {
            let f = &ix.prog.funcs[&d.name];
            let relevant: Vec<ClauseId> = clause_ids_in(f, &ix.prog)
                .into_iter()
                .filter(|id| !ix.invalid.contains_key(id))
                .collect();
            if relevant.is_empty() {
                continue;
            }
            for id in &relevant {
                if f.ensures.iter().all(|c| c.id != Some(*id)) {
                    requires_with_callers.insert(*id);
                }
            }
            analyze(&ix.prog, &self.domain, f, &relevant, &mut checks);
        }
        let mut out = Vec::new();
        for (id, label) in &program.clause_labels {
            let v = if !ix.owner.contains_key(id) {
                verdict(
                    *id,
                    VerdictStatus::Invalid,
                    format!("clause {label} not found in the program text"),
                )
            } else if let Some(m) = ix.invalid.get(id) {
                verdict(*id, VerdictStatus::Invalid, m.clone())
            } else {
                let o = checks.outcomes.get(id).cloned().unwrap_or_default();
                if let Some(m) = o.invalid {
                    verdict(*id, VerdictStatus::Invalid, m)
                } else if let Some(m) = o.violated {
                    verdict(*id, VerdictStatus::Unproved, m)
                } else if o.timeout {
                    verdict(*id, VerdictStatus::Timeout, "bounded exploration exhausted".into())
                } else {
                    let d = if is_requires(&ix.prog, *id) && !requires_with_callers.contains(id) {
                        "no call sites"
                    } else {
                        "holds on all explored inputs"
                    };
                    verdict(*id, VerdictStatus::Proved, d.into())
                }
            };
            out.push(v);
        }
        Ok(out)
    }
}

fn is_requires(prog: &Program, id: ClauseId) -> bool {
    prog.funcs.values().any(|f| f.requires.iter().any(|c| c.id == Some(id)))
}
