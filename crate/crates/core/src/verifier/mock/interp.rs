// SPDX-License-Identifier: Apache-2.0

//! Concrete interpreter for the C subset with clause checking hooks.

use std::collections::HashMap;

use crate::acsl::{AExpr, ClauseKind};
use crate::frontend::{
    BinOp, Block, CType, Expr, ExprKind, ForInit, FunctionDef, FunctionSig, IntType, Span, Stmt, StmtKind, UnOp,
    VarDecl,
};
use crate::spec::ClauseId;

use super::eval::{Scope, SpecCtx, SpecErr};
use super::MockDomain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Val {
    Int(i128),
    Ptr { buf: usize, off: i128 },
    Undef,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Memory {
    bufs: Vec<Vec<Val>>,
}

impl Memory {
    pub fn alloc(&mut self, cells: Vec<Val>) -> usize {
        self.bufs.push(cells);
        self.bufs.len() - 1
    }

    pub fn in_bounds(&self, buf: usize, off: i128) -> bool {
        self.bufs.get(buf).is_some_and(|b| off >= 0 && (off as usize) < b.len())
    }

    pub fn read(&self, buf: usize, off: i128) -> Result<Val, String> {
        if !self.in_bounds(buf, off) {
            return Err(format!("out-of-bounds read at offset {off}"));
        }
        Ok(self.bufs[buf][off as usize])
    }

    pub fn write(&mut self, buf: usize, off: i128, v: Val) -> Result<(), String> {
        if !self.in_bounds(buf, off) {
            return Err(format!("out-of-bounds write at offset {off}"));
        }
        self.bufs[buf][off as usize] = v;
        Ok(())
    }
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Stop {
    /// Runtime error in the program; the input is outside the analysed domain.
    Rte(String),
    /// An assumption (callee precondition or contract) cannot hold on this path.
    Infeasible,
    Timeout(String),
    Unsupported(String),
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Option<Val>),
}

/// A clause as found in the program text.
#[derive(Debug, Clone)]
pub(crate) struct LClause {
    pub kind: ClauseKind,
    pub pred: Result<AExpr, String>,
    /// Set when the clause is under verification.
    pub id: Option<ClauseId>,
}

#[derive(Debug, Clone)]
pub(crate) struct FuncInfo {
    pub sig: FunctionSig,
    pub def: Option<FunctionDef>,
    pub requires: Vec<LClause>,
    pub ensures: Vec<LClause>,
    /// Writes no memory visible to its caller.
    pub pure_fn: bool,
}

#[derive(Debug, Default)]
pub(crate) struct Program {
    pub funcs: HashMap<String, FuncInfo>,
    pub globals: Vec<VarDecl>,
    pub enums: HashMap<String, i128>,
    pub loop_invs: HashMap<Span, Vec<LClause>>,
    pub asserts: HashMap<Span, Vec<LClause>>,
    /// Assertions before a block's closing brace, keyed by the block span.
    pub trailing: HashMap<Span, Vec<LClause>>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Outcome {
    pub violated: Option<String>,
    pub invalid: Option<String>,
    pub timeout: bool,
}

#[derive(Debug, Default)]
pub(crate) struct Checks {
    pub outcomes: HashMap<ClauseId, Outcome>,
    pub input_desc: String,
}

impl Checks {
    pub fn settled(&self, id: ClauseId) -> bool {
        self.outcomes
            .get(&id)
            .is_some_and(|o| o.violated.is_some() || o.invalid.is_some())
    }

    fn record(&mut self, id: ClauseId, r: Result<bool, SpecErr>) {
        let o = self.outcomes.entry(id).or_default();
        match r {
            Ok(true) => {}
            Ok(false) => o.violated = Some(format!("counterexample: {}", self.input_desc)),
            Err(SpecErr::Memory(m)) => o.violated = Some(format!("{m}; counterexample: {}", self.input_desc)),
            Err(SpecErr::Invalid(m)) => o.invalid = Some(m),
        }
    }
}

pub(crate) struct Frame {
    pub scopes: Vec<Scope>,
    pub params: Vec<String>,
    pub pre: Option<Memory>,
    pub checking: bool,
}

/// One execution along one vector of nondeterministic choices.
pub(crate) struct Run<'p, 'c> {
    pub prog: &'p Program,
    pub cfg: &'p MockDomain,
    pub mem: Memory,
    pub globals: Scope,
    pub checks: &'c mut Checks,
    prefix: Vec<usize>,
    pos: usize,
    /// `(choice, options)` at every choice point taken.
    pub trail: Vec<(usize, usize)>,
    steps: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 24;
const MAX_STEPS: usize = 200_000;

pub(crate) fn promote(t: IntType) -> IntType {
    if t.bits < 32 {
        IntType::INT
    } else {
        t
    }
}

/// Usual arithmetic conversions.
pub(crate) fn common(a: IntType, b: IntType) -> IntType {
    let (a, b) = (promote(a), promote(b));
    if a == b {
        a
    } else if a.signed == b.signed {
        if a.bits >= b.bits {
            a
        } else {
            b
        }
    } else {
        let (s, u) = if a.signed { (a, b) } else { (b, a) };
        if u.bits >= s.bits {
            u
        } else {
            s
        }
    }
}

fn unsupported<T>(msg: impl Into<String>) -> Result<T, Stop> {
    Err(Stop::Unsupported(msg.into()))
}

fn rte<T>(msg: impl Into<String>) -> Result<T, Stop> {
    Err(Stop::Rte(msg.into()))
}

fn decay(ty: &CType) -> CType {
    match ty {
        CType::Array(e, _) => CType::Pointer(e.clone()),
        t => t.clone(),
    }
}

/// Converts `v` for storage in an object of type `ty`.
fn convert(v: Val, ty: &CType) -> Result<Val, Stop> {
    match (v, ty) {
        (Val::Int(x), t) if t.is_integer() => Ok(Val::Int(t.int_type().unwrap().wrap(x))),
        (Val::Ptr { .. }, CType::Int(t)) if t.bits == 1 => Ok(Val::Int(1)),
        (Val::Ptr { .. }, t) if t.is_integer() => unsupported("pointer to integer conversion"),
        (v, _) => Ok(v),
    }
}

pub(crate) fn sizeof(ty: &CType) -> Result<i128, Stop> {
    Ok(match ty {
        CType::Int(t) if t.bits == 1 => 1,
        CType::Int(t) => t.bits as i128 / 8,
        CType::Enum(_) => 4,
        CType::Pointer(_) => 8,
        CType::Array(e, Some(n)) => sizeof(e)? * *n as i128,
        _ => return unsupported("sizeof of an unsupported type"),
    })
}

impl<'p, 'c> Run<'p, 'c> {
    pub fn new(prog: &'p Program, cfg: &'p MockDomain, checks: &'c mut Checks, prefix: Vec<usize>) -> Self {
        Self {
            prog,
            cfg,
            mem: Memory::default(),
            globals: Scope::new(),
            checks,
            prefix,
            pos: 0,
            trail: Vec::new(),
            steps: 0,
            depth: 0,
        }
    }

    fn choose(&mut self, n: usize) -> Result<usize, Stop> {
        if n == 0 {
            return Err(Stop::Infeasible);
        }
        let c = self.prefix.get(self.pos).copied().unwrap_or(0).min(n - 1);
        self.pos += 1;
        self.trail.push((c, n));
        Ok(c)
    }

    /// Allocates and initialises globals in declaration order.
    pub fn init_globals(&mut self) -> Result<(), Stop> {
        let prog = self.prog;
        let mut fr = Frame {
            scopes: vec![Scope::new()],
            params: Vec::new(),
            pre: None,
            checking: false,
        };
        for g in &prog.globals {
            self.declare(&mut fr, g, true)?;
            let loc = fr.scopes[0].remove(&g.name).unwrap();
            self.globals.insert(g.name.clone(), loc);
        }
        Ok(())
    }

    fn lookup(&self, fr: &Frame, name: &str) -> Option<(usize, CType)> {
        fr.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .or_else(|| self.globals.get(name))
            .cloned()
    }

    fn declare(&mut self, fr: &mut Frame, v: &'p VarDecl, zero: bool) -> Result<(), Stop> {
        let fill = if zero { Val::Int(0) } else { Val::Undef };
        let (cells, ty) = match &v.ty {
            CType::Int(_) | CType::Enum(_) | CType::Pointer(_) => {
                let init = match &v.init {
                    Some(e) => {
                        let (x, _) = self.eval(fr, e)?;
                        convert(x, &v.ty)?
                    }
                    None => fill,
                };
                (vec![init], v.ty.clone())
            }
            CType::Array(elem, n) => {
                if !(elem.is_integer() || matches!(**elem, CType::Pointer(_))) {
                    return unsupported(format!("array `{}` of unsupported element type", v.name));
                }
                let items: Vec<&Expr> = match &v.init {
                    Some(Expr {
                        kind: ExprKind::InitList(items),
                        ..
                    }) => items.iter().collect(),
                    Some(_) => return unsupported("array initialiser that is not a list"),
                    None => Vec::new(),
                };
                let len = match n {
                    Some(n) => *n as usize,
                    None => items.len(),
                };
                if len > 4096 {
                    return unsupported(format!("array `{}` is too large", v.name));
                }
                let default = if v.init.is_some() { Val::Int(0) } else { fill };
                let mut cells = vec![default; len];
                for (i, e) in items.iter().enumerate().take(len) {
                    let (x, _) = self.eval(fr, e)?;
                    cells[i] = convert(x, elem)?;
                }
                (cells, v.ty.clone())
            }
            _ => return unsupported(format!("variable `{}` of unsupported type", v.name)),
        };
        let buf = self.mem.alloc(cells);
        fr.scopes.last_mut().unwrap().insert(v.name.clone(), (buf, ty));
        Ok(())
    }

    fn tick(&mut self) -> Result<(), Stop> {
        self.steps += 1;
        if self.steps > MAX_STEPS {
            return Err(Stop::Timeout("step budget exhausted".into()));
        }
        Ok(())
    }

    // ---- clause checks ----

    fn check_clauses(&mut self, fr: &Frame, clauses: Option<&'p Vec<LClause>>, result: Option<Val>, post: bool) {
        let Some(clauses) = clauses else { return };
        for c in clauses {
            let Some(id) = c.id else { continue };
            if self.checks.settled(id) {
                continue;
            }
            let r = match &c.pred {
                Ok(p) => self.spec_ctx(fr, &fr.scopes, result, post).holds(p),
                Err(m) => Err(SpecErr::Invalid(m.clone())),
            };
            self.checks.record(id, r);
        }
    }

    pub fn spec_ctx<'a>(&'a self, fr: &'a Frame, scopes: &'a [Scope], result: Option<Val>, post: bool) -> SpecCtx<'a> {
        SpecCtx {
            cur: &self.mem,
            pre: fr.pre.as_ref(),
            scopes,
            globals: &self.globals,
            enums: &self.prog.enums,
            result,
            params: &fr.params,
            params_in_pre: post,
            quant_window: self.cfg.quant_window as i128,
        }
    }

    // ---- functions ----

    /// Runs `f` as the analysed entry point with parameters already
    /// allocated in `scope`. Returns `Err(Infeasible)` when the
    /// preconditions reject the input.
    pub fn run_entry(&mut self, f: &'p FuncInfo, scope: Scope) -> Result<(), Stop> {
        let def = f.def.as_ref().expect("entry has a body");
        let mut fr = Frame {
            scopes: vec![scope],
            params: f.sig.params.iter().filter_map(|p| p.name.clone()).collect(),
            pre: None,
            checking: true,
        };
        fr.pre = Some(self.mem.clone());
        for r in &f.requires {
            let ok = match &r.pred {
                Ok(p) => self.spec_ctx(&fr, &fr.scopes, None, false).holds(p).unwrap_or(false),
                Err(_) => false,
            };
            if !ok {
                return Err(Stop::Infeasible);
            }
        }
        let ret = self.exec_body(&mut fr, def)?;
        let ret = self.return_value(f, ret)?;
        let scopes = vec![fr.scopes[0].clone()];
        fr.scopes = scopes;
        self.check_clauses(&fr, Some(&f.ensures), ret, true);
        Ok(())
    }

    fn return_value(&self, f: &FuncInfo, ret: Option<Val>) -> Result<Option<Val>, Stop> {
        match (&f.sig.ret, ret) {
            (CType::Void, _) => Ok(None),
            (_, None) => rte("missing return value"),
            (t, Some(v)) => Ok(Some(convert(v, t)?)),
        }
    }

    fn exec_body(&mut self, fr: &mut Frame, def: &'p FunctionDef) -> Result<Option<Val>, Stop> {
        match self.exec_block(fr, &def.body)? {
            Flow::Return(v) => Ok(v),
            _ => Ok(None),
        }
    }

    fn call(&mut self, fr: &mut Frame, e: &'p Expr, callee: &'p Expr, args: &'p [Expr]) -> Result<(Val, CType), Stop> {
        let ExprKind::Ident(name) = &callee.kind else {
            return unsupported("indirect call");
        };
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(fr, a)?.0);
        }
        if matches!(name.as_str(), "abs" | "labs" | "llabs") && vals.len() == 1 && !self.prog.funcs.contains_key(name) {
            let Val::Int(x) = vals[0] else {
                return rte("abs of a non-integer");
            };
            let t = if name == "abs" { IntType::INT } else { IntType::LONG };
            return Ok((Val::Int(t.wrap(x.abs())), CType::Int(t)));
        }
        let Some(g) = self.prog.funcs.get(name) else {
            return unsupported(format!(
                "call to undeclared function `{name}` at offset {}",
                e.span.start
            ));
        };
        if g.sig.params.len() != vals.len() || g.sig.variadic {
            return unsupported(format!("call to `{name}` with mismatched arguments"));
        }
        let mut scope = Scope::new();
        let mut names = Vec::new();
        for (p, v) in g.sig.params.iter().zip(vals) {
            let v = convert(v, &p.ty)?;
            let Some(n) = &p.name else { continue };
            let buf = self.mem.alloc(vec![v]);
            scope.insert(n.clone(), (buf, p.ty.clone()));
            names.push(n.clone());
        }
        let mut callee_fr = Frame {
            scopes: vec![scope],
            params: names,
            pre: None,
            checking: false,
        };
        // preconditions at the call site
        for r in &g.requires {
            let res = match &r.pred {
                Ok(p) => self.spec_ctx(&callee_fr, &callee_fr.scopes, None, false).holds(p),
                Err(m) => Err(SpecErr::Invalid(m.clone())),
            };
            let held = matches!(res, Ok(true));
            if let (Some(id), true) = (r.id, fr.checking) {
                if !self.checks.settled(id) {
                    self.checks.record(id, res);
                }
                continue;
            }
            if !held {
                return Err(Stop::Infeasible);
            }
        }
        let ret_ty = decay(&g.sig.ret);
        if let (Some(def), false) = (&g.def, g.pure_fn) {
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                return Err(Stop::Timeout(format!("call depth exceeded in `{name}`")));
            }
            let r = self.exec_body(&mut callee_fr, def);
            self.depth -= 1;
            let v = self.return_value(g, r?)?;
            return Ok((v.unwrap_or(Val::Int(0)), ret_ty));
        }
        // contract abstraction
        if ret_ty == CType::Void {
            return Ok((Val::Int(0), ret_ty));
        }
        let Some(t) = ret_ty.int_type() else {
            return unsupported(format!("`{name}` returns a non-integer value"));
        };
        let mut cands: Vec<i128> = Vec::new();
        for en in &g.ensures {
            if let Ok(p) = &en.pred {
                for x in result_equalities(p) {
                    let v = self.spec_ctx(&callee_fr, &callee_fr.scopes, None, false).value(x);
                    if let Ok(v) = v {
                        if !cands.contains(&v) && t.wrap(v) == v {
                            cands.push(v);
                        }
                    }
                }
            }
        }
        for v in zero_outward(
            (self.cfg.int_min as i128).max(t.min()),
            (self.cfg.int_max as i128).min(t.max()),
        ) {
            if !cands.contains(&v) {
                cands.push(v);
            }
        }
        callee_fr.pre = Some(self.mem.clone());
        let mut options = Vec::new();
        for v in cands {
            let ok = g.ensures.iter().all(|en| match &en.pred {
                Ok(p) => self
                    .spec_ctx(&callee_fr, &callee_fr.scopes, Some(Val::Int(v)), true)
                    .holds(p)
                    .unwrap_or(false),
                Err(_) => true,
            });
            if ok {
                options.push(v);
            }
        }
        let k = self.choose(options.len())?;
        Ok((Val::Int(options[k]), ret_ty))
    }

    // ---- statements ----

    fn exec_block(&mut self, fr: &mut Frame, b: &'p Block) -> Result<Flow, Stop> {
        fr.scopes.push(Scope::new());
        let r = self.exec_stmts(fr, &b.stmts);
        if matches!(r, Ok(Flow::Normal)) && fr.checking {
            self.check_clauses(fr, self.prog.trailing.get(&b.span), None, false);
        }
        fr.scopes.pop();
        r
    }

    fn exec_stmts(&mut self, fr: &mut Frame, stmts: &'p [Stmt]) -> Result<Flow, Stop> {
        for s in stmts {
            match self.exec(fr, s)? {
                Flow::Normal => {}
                f => return Ok(f),
            }
        }
        Ok(Flow::Normal)
    }

    fn truth(&mut self, fr: &mut Frame, e: &'p Expr) -> Result<bool, Stop> {
        match self.eval(fr, e)?.0 {
            Val::Int(v) => Ok(v != 0),
            Val::Ptr { .. } => Ok(true),
            Val::Undef => rte("use of an uninitialized value"),
        }
    }

    fn loop_head(&mut self, fr: &mut Frame, s: &'p Stmt, iters: &mut usize) -> Result<(), Stop> {
        if fr.checking {
            self.check_clauses(fr, self.prog.loop_invs.get(&s.span), None, false);
        }
        *iters += 1;
        if *iters > self.cfg.loop_cap + 1 {
            return Err(Stop::Timeout(format!(
                "loop at offset {} exceeded {} iterations",
                s.span.start, self.cfg.loop_cap
            )));
        }
        Ok(())
    }

    fn exec(&mut self, fr: &mut Frame, s: &'p Stmt) -> Result<Flow, Stop> {
        self.tick()?;
        if fr.checking {
            self.check_clauses(fr, self.prog.asserts.get(&s.span), None, false);
        }
        Ok(match &s.kind {
            StmtKind::Block(b) => self.exec_block(fr, b)?,
            StmtKind::Decl(vars) => {
                for v in vars {
                    self.declare(fr, v, false)?;
                }
                Flow::Normal
            }
            StmtKind::Expr(e) => {
                self.eval(fr, e)?;
                Flow::Normal
            }
            StmtKind::Empty => Flow::Normal,
            StmtKind::If { cond, then, els } => {
                if self.truth(fr, cond)? {
                    self.exec(fr, then)?
                } else if let Some(e) = els {
                    self.exec(fr, e)?
                } else {
                    Flow::Normal
                }
            }
            StmtKind::While { cond, body } => {
                let mut iters = 0;
                loop {
                    self.loop_head(fr, s, &mut iters)?;
                    if !self.truth(fr, cond)? {
                        break;
                    }
                    match self.exec(fr, body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        _ => {}
                    }
                }
                Flow::Normal
            }
            StmtKind::DoWhile { body, cond } => {
                let mut iters = 0;
                loop {
                    self.loop_head(fr, s, &mut iters)?;
                    match self.exec(fr, body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        _ => {}
                    }
                    if !self.truth(fr, cond)? {
                        break;
                    }
                }
                Flow::Normal
            }
            StmtKind::For { init, cond, step, body } => {
                fr.scopes.push(Scope::new());
                let r = self.exec_for(fr, s, init, cond, step, body);
                fr.scopes.pop();
                r?
            }
            StmtKind::Switch { cond, body } => {
                let (v, _) = self.eval(fr, cond)?;
                let Val::Int(v) = v else {
                    return rte("switch on a non-integer");
                };
                self.exec_switch(fr, v, body)?
            }
            StmtKind::Case { body, .. } | StmtKind::Default { body } => self.exec(fr, body)?,
            StmtKind::Break => Flow::Break,
            StmtKind::Continue => Flow::Continue,
            StmtKind::Return(e) => match e {
                Some(e) => Flow::Return(Some(self.eval(fr, e)?.0)),
                None => Flow::Return(None),
            },
        })
    }

    fn exec_for(
        &mut self,
        fr: &mut Frame,
        s: &'p Stmt,
        init: &'p Option<ForInit>,
        cond: &'p Option<Expr>,
        step: &'p Option<Expr>,
        body: &'p Stmt,
    ) -> Result<Flow, Stop> {
        match init {
            Some(ForInit::Decl(vars)) => {
                for v in vars {
                    self.declare(fr, v, false)?;
                }
            }
            Some(ForInit::Expr(e)) => {
                self.eval(fr, e)?;
            }
            None => {}
        }
        let mut iters = 0;
        loop {
            self.loop_head(fr, s, &mut iters)?;
            if let Some(c) = cond {
                if !self.truth(fr, c)? {
                    break;
                }
            }
            match self.exec(fr, body)? {
                Flow::Break => break,
                Flow::Return(v) => return Ok(Flow::Return(v)),
                _ => {}
            }
            if let Some(st) = step {
                self.eval(fr, st)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_switch(&mut self, fr: &mut Frame, v: i128, body: &'p Stmt) -> Result<Flow, Stop> {
        let StmtKind::Block(b) = &body.kind else {
            return unsupported("switch body that is not a block");
        };
        let mut start = None;
        let mut default = None;
        for (i, s) in b.stmts.iter().enumerate() {
            let mut cur = s;
            loop {
                match &cur.kind {
                    StmtKind::Case { value, body } => {
                        let lookup = |n: &str| self.prog.enums.get(n).copied();
                        let Some(c) = crate::frontend::const_eval(value, &lookup) else {
                            return unsupported("non-constant case label");
                        };
                        if c == v && start.is_none() {
                            start = Some(i);
                        }
                        cur = body;
                    }
                    StmtKind::Default { body } => {
                        default.get_or_insert(i);
                        cur = body;
                    }
                    _ => break,
                }
            }
        }
        let Some(start) = start.or(default) else {
            return Ok(Flow::Normal);
        };
        fr.scopes.push(Scope::new());
        let r = self.exec_stmts(fr, &b.stmts[start..]);
        fr.scopes.pop();
        Ok(match r? {
            Flow::Break => Flow::Normal,
            f => f,
        })
    }

    // ---- expressions ----

    /// Location of an lvalue: buffer, offset, object type.
    fn lvalue(&mut self, fr: &mut Frame, e: &'p Expr) -> Result<(usize, i128, CType), Stop> {
        match &e.kind {
            ExprKind::Ident(n) => match self.lookup(fr, n) {
                Some((buf, ty)) => Ok((buf, 0, ty)),
                None => unsupported(format!("unknown variable `{n}`")),
            },
            ExprKind::Unary {
                op: UnOp::Deref,
                operand,
                ..
            } => {
                let (p, ty) = self.eval(fr, operand)?;
                let elem = ty.element().cloned().unwrap_or(CType::Int(IntType::INT));
                match p {
                    Val::Ptr { buf, off } => Ok((buf, off, elem)),
                    _ => rte("dereference of a null or invalid pointer"),
                }
            }
            ExprKind::Index(a, i) => {
                let (p, ty) = self.eval(fr, a)?;
                let (iv, _) = self.eval(fr, i)?;
                let elem = ty.element().cloned().unwrap_or(CType::Int(IntType::INT));
                match (p, iv) {
                    (Val::Ptr { buf, off }, Val::Int(k)) => Ok((buf, off + k, elem)),
                    (Val::Undef, _) | (_, Val::Undef) => rte("use of an uninitialized value"),
                    _ => rte("subscript of a non-pointer"),
                }
            }
            ExprKind::Member { .. } => unsupported("struct member access"),
            _ => unsupported("unsupported lvalue"),
        }
    }

    fn load(&self, buf: usize, off: i128, ty: &CType) -> Result<(Val, CType), Stop> {
        if let CType::Array(..) = ty {
            return Ok((Val::Ptr { buf, off }, decay(ty)));
        }
        match self.mem.read(buf, off) {
            Ok(Val::Undef) => rte("read of an uninitialized value"),
            Ok(v) => Ok((v, ty.clone())),
            Err(m) => rte(m),
        }
    }

    fn store(&mut self, buf: usize, off: i128, ty: &CType, v: Val) -> Result<Val, Stop> {
        if let CType::Array(..) = ty {
            return unsupported("assignment to an array");
        }
        let v = convert(v, ty)?;
        self.mem.write(buf, off, v).or_else(rte)?;
        Ok(v)
    }

    pub(crate) fn eval(&mut self, fr: &mut Frame, e: &'p Expr) -> Result<(Val, CType), Stop> {
        Ok(match &e.kind {
            ExprKind::Int(v) => {
                let t = if IntType::INT.wrap(*v) == *v {
                    IntType::INT
                } else {
                    IntType::LONG
                };
                (Val::Int(*v), CType::Int(t))
            }
            ExprKind::Char(v) => (Val::Int(*v), CType::Int(IntType::INT)),
            ExprKind::Float(_) => return unsupported("floating-point arithmetic"),
            ExprKind::Str(_) => return unsupported("string literal"),
            ExprKind::Ident(n) => {
                if let Some((buf, ty)) = self.lookup(fr, n) {
                    self.load(buf, 0, &ty)?
                } else if let Some(v) = self.prog.enums.get(n) {
                    (Val::Int(*v), CType::Int(IntType::INT))
                } else {
                    return unsupported(format!("unknown identifier `{n}`"));
                }
            }
            ExprKind::Unary { op, operand, .. } => self.unary(fr, *op, operand)?,
            ExprKind::Binary { op, lhs, rhs, .. } => match op {
                BinOp::And => {
                    let v = self.truth(fr, lhs)? && self.truth(fr, rhs)?;
                    (Val::Int(v as i128), CType::Int(IntType::INT))
                }
                BinOp::Or => {
                    let v = self.truth(fr, lhs)? || self.truth(fr, rhs)?;
                    (Val::Int(v as i128), CType::Int(IntType::INT))
                }
                _ => {
                    let l = self.eval(fr, lhs)?;
                    let r = self.eval(fr, rhs)?;
                    arith(*op, l, r)?
                }
            },
            ExprKind::Assign { op, lhs, rhs, .. } => {
                let (buf, off, ty) = self.lvalue(fr, lhs)?;
                let r = self.eval(fr, rhs)?;
                let v = match op {
                    None => r.0,
                    Some(op) => {
                        let cur = self.load(buf, off, &ty)?;
                        arith(*op, cur, r)?.0
                    }
                };
                let v = self.store(buf, off, &ty, v)?;
                (v, ty)
            }
            ExprKind::Cond(c, a, b) => {
                if self.truth(fr, c)? {
                    self.eval(fr, a)?
                } else {
                    self.eval(fr, b)?
                }
            }
            ExprKind::Call { callee, args } => self.call(fr, e, callee, args)?,
            ExprKind::Index(..) => {
                let (buf, off, ty) = self.lvalue(fr, e)?;
                self.load(buf, off, &ty)?
            }
            ExprKind::Member { .. } => return unsupported("struct member access"),
            ExprKind::Cast(spec, inner) => {
                let (v, _) = self.eval(fr, inner)?;
                match &spec.ty {
                    CType::Void => (Val::Int(0), CType::Void),
                    t if t.is_integer() => (convert(v, t)?, t.clone()),
                    t @ CType::Pointer(_) => (v, t.clone()),
                    _ => return unsupported("cast to an unsupported type"),
                }
            }
            ExprKind::SizeofType(spec) => (Val::Int(sizeof(&spec.ty)?), CType::Int(IntType::ULONG)),
            ExprKind::SizeofExpr(inner) => {
                let ty = self.static_type(fr, inner)?;
                (Val::Int(sizeof(&ty)?), CType::Int(IntType::ULONG))
            }
            ExprKind::Comma(a, b) => {
                self.eval(fr, a)?;
                self.eval(fr, b)?
            }
            ExprKind::InitList(_) => return unsupported("initializer list in expression"),
        })
    }

    fn static_type(&self, fr: &Frame, e: &Expr) -> Result<CType, Stop> {
        match &e.kind {
            ExprKind::Ident(n) => match self.lookup(fr, n) {
                Some((_, ty)) => Ok(ty),
                None => unsupported(format!("sizeof of unknown `{n}`")),
            },
            ExprKind::Index(a, _) => Ok(self
                .static_type(fr, a)?
                .element()
                .cloned()
                .unwrap_or(CType::Int(IntType::INT))),
            ExprKind::Unary {
                op: UnOp::Deref,
                operand,
                ..
            } => Ok(self
                .static_type(fr, operand)?
                .element()
                .cloned()
                .unwrap_or(CType::Int(IntType::INT))),
            _ => Ok(CType::Int(IntType::INT)),
        }
    }

    fn unary(&mut self, fr: &mut Frame, op: UnOp, x: &'p Expr) -> Result<(Val, CType), Stop> {
        let int = CType::Int(IntType::INT);
        Ok(match op {
            UnOp::Deref => {
                let (buf, off, ty) = self.lvalue(fr, x)?;
                let (p, _) = self.load(buf, off, &ty)?;
                let elem = decay(&ty).element().cloned().unwrap_or(CType::Int(IntType::INT));
                match p {
                    Val::Ptr { buf, off } => self.load(buf, off, &elem)?,
                    _ => return rte("dereference of a null or invalid pointer"),
                }
            }
            UnOp::AddrOf => {
                let (buf, off, ty) = self.lvalue(fr, x)?;
                (Val::Ptr { buf, off }, CType::Pointer(Box::new(ty)))
            }
            UnOp::PreInc | UnOp::PreDec | UnOp::PostInc | UnOp::PostDec => {
                let (buf, off, ty) = self.lvalue(fr, x)?;
                let cur = self.load(buf, off, &ty)?;
                let bop = if matches!(op, UnOp::PreInc | UnOp::PostInc) {
                    BinOp::Add
                } else {
                    BinOp::Sub
                };
                let (nv, _) = arith(bop, cur.clone(), (Val::Int(1), int))?;
                let stored = self.store(buf, off, &ty, nv)?;
                if matches!(op, UnOp::PreInc | UnOp::PreDec) {
                    (stored, ty)
                } else {
                    cur
                }
            }
            UnOp::Not => {
                let t = self.truth(fr, x)?;
                (Val::Int((!t) as i128), int)
            }
            UnOp::Neg | UnOp::Plus | UnOp::BitNot => {
                let (v, ty) = self.eval(fr, x)?;
                let Val::Int(v) = v else {
                    return rte("arithmetic on a non-integer");
                };
                let Some(t) = ty.int_type() else {
                    return unsupported("arithmetic on a non-integer type");
                };
                let t = promote(t);
                let r = match op {
                    UnOp::Neg => -v,
                    UnOp::BitNot => !v,
                    _ => v,
                };
                (Val::Int(t.wrap(r)), CType::Int(t))
            }
        })
    }
}

/// Binary arithmetic with C conversions and pointer arithmetic.
pub(crate) fn arith(op: BinOp, l: (Val, CType), r: (Val, CType)) -> Result<(Val, CType), Stop> {
    use BinOp::*;
    let int = CType::Int(IntType::INT);
    match (l.0, r.0) {
        (Val::Undef, _) | (_, Val::Undef) => rte("use of an uninitialized value"),
        (Val::Int(a), Val::Int(b)) => {
            let (Some(ta), Some(tb)) = (l.1.int_type(), r.1.int_type()) else {
                // integer stored as a null pointer
                return match op {
                    Eq => Ok((Val::Int((a == b) as i128), int)),
                    Ne => Ok((Val::Int((a != b) as i128), int)),
                    _ => unsupported("arithmetic on a null pointer"),
                };
            };
            if matches!(op, Shl | Shr) {
                let t = promote(ta);
                if b < 0 || b >= t.bits as i128 {
                    return rte("shift amount out of range");
                }
                let a = t.wrap(a);
                let v = if op == Shl { a << b } else { a >> b };
                return Ok((Val::Int(t.wrap(v)), CType::Int(t)));
            }
            let t = common(ta, tb);
            let (a, b) = (t.wrap(a), t.wrap(b));
            let cmp = |c: bool| Ok((Val::Int(c as i128), CType::Int(IntType::INT)));
            let v = match op {
                Add => a + b,
                Sub => a - b,
                Mul => a * b,
                Div | Rem if b == 0 => return rte("division by zero"),
                Div => a / b,
                Rem => a % b,
                Lt => return cmp(a < b),
                Le => return cmp(a <= b),
                Gt => return cmp(a > b),
                Ge => return cmp(a >= b),
                Eq => return cmp(a == b),
                Ne => return cmp(a != b),
                BitAnd => a & b,
                BitOr => a | b,
                BitXor => a ^ b,
                Shl | Shr | And | Or => unreachable!(),
            };
            Ok((Val::Int(t.wrap(v)), CType::Int(t)))
        }
        (Val::Ptr { buf, off }, Val::Int(k)) if matches!(op, Add | Sub) => {
            let off = if op == Add { off + k } else { off - k };
            Ok((Val::Ptr { buf, off }, decay(&l.1)))
        }
        (Val::Int(k), Val::Ptr { buf, off }) if op == Add => Ok((Val::Ptr { buf, off: off + k }, decay(&r.1))),
        (Val::Ptr { buf: b1, off: o1 }, Val::Ptr { buf: b2, off: o2 }) => {
            let c = |v: bool| Ok((Val::Int(v as i128), int.clone()));
            match op {
                Eq => c(b1 == b2 && o1 == o2),
                Ne => c(b1 != b2 || o1 != o2),
                _ if b1 != b2 => rte("pointer comparison across objects"),
                Sub => Ok((Val::Int(o1 - o2), CType::Int(IntType::LONG))),
                Lt => c(o1 < o2),
                Le => c(o1 <= o2),
                Gt => c(o1 > o2),
                Ge => c(o1 >= o2),
                _ => unsupported("pointer arithmetic"),
            }
        }
        (Val::Ptr { .. }, Val::Int(0)) | (Val::Int(0), Val::Ptr { .. }) if matches!(op, Eq | Ne) => {
            Ok((Val::Int((op == Ne) as i128), int))
        }
        _ => unsupported("pointer arithmetic"),
    }
}

/// `e` for every conjunct `\result == e` (either side).
fn result_equalities(p: &AExpr) -> Vec<&AExpr> {
    use crate::acsl::ABinOp;
    let mut out = Vec::new();
    match p {
        AExpr::Binary(ABinOp::And | ABinOp::Or, a, b) => {
            out.extend(result_equalities(a));
            out.extend(result_equalities(b));
        }
        AExpr::Binary(ABinOp::Implies, _, b) => out.extend(result_equalities(b)),
        AExpr::Binary(ABinOp::Eq, a, b) => {
            if matches!(**a, AExpr::Result) && !b.mentions_result() {
                out.push(b);
            } else if matches!(**b, AExpr::Result) && !a.mentions_result() {
                out.push(a);
            }
        }
        _ => {}
    }
    out
}

/// `0, 1, -1, 2, -2, ...` restricted to `[lo, hi]`.
pub(crate) fn zero_outward(lo: i128, hi: i128) -> Vec<i128> {
    let mut out = Vec::new();
    if lo > hi {
        return out;
    }
    let start = 0i128.clamp(lo, hi);
    out.push(start);
    let mut k = 1;
    loop {
        let up = start + k;
        let down = start - k;
        let mut any = false;
        if up <= hi {
            out.push(up);
            any = true;
        }
        if down >= lo {
            out.push(down);
            any = true;
        }
        if !any {
            break;
        }
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_outward_order() {
        assert_eq!(zero_outward(-2, 2), vec![0, 1, -1, 2, -2]);
        assert_eq!(zero_outward(0, 3), vec![0, 1, 2, 3]);
        assert_eq!(zero_outward(2, 4), vec![2, 3, 4]);
        assert!(zero_outward(1, 0).is_empty());
    }

    #[test]
    fn usual_conversions() {
        assert_eq!(common(IntType::INT, IntType::UINT), IntType::UINT);
        assert_eq!(common(IntType::LONG, IntType::UINT), IntType::LONG);
        assert_eq!(common(IntType::CHAR, IntType::CHAR), IntType::INT);
        let r = arith(
            BinOp::Lt,
            (Val::Int(-1), CType::Int(IntType::INT)),
            (Val::Int(1), CType::Int(IntType::UINT)),
        )
        .unwrap();
        assert_eq!(r.0, Val::Int(0), "-1 converts to UINT_MAX");
    }
}
